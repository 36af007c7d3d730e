#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdf {

using cplx = std::complex<double>;

// Single error type; message carries the diagnostic.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

// Principal square root, stable near the negative real axis.
inline cplx psqrt(cplx u) {
    const double a = u.real(), b = u.imag();
    const double r = std::sqrt(a * a + b * b);
    const double t = std::sqrt((r + std::abs(a)) * 0.5);
    if (t == 0.0) return {0.0, 0.0};
    const double q = b / (2.0 * t);
    if (a >= 0.0) return {t, q};
    return {std::abs(q), std::copysign(t, b)};
}

// z^k for small integer k, by repeated products.
inline cplx ipow(cplx z, int k) {
    cplx r{1.0, 0.0};
    const bool neg = k < 0;
    for (int i = 0; i < (neg ? -k : k); ++i) r *= z;
    return neg ? cplx{1.0, 0.0} / r : r;
}

}  // namespace qdf
