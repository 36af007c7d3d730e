#include "qdflat/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace qdf::kernels {

void FactorSet::clear() {
    cr.clear();
    ci.clear();
    ir.clear();
    ii.clear();
    e.clear();
}

void FactorSet::push(double cre, double cim, double ire, double iim, int ord) {
    cr.push_back(cre);
    ci.push_back(cim);
    ir.push_back(ire);
    ii.push_back(iim);
    e.push_back(ord);
}

namespace scalar {

void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                    double* outr, double* outi) {
    const std::size_t nf = f.size();
    for (std::size_t k = 0; k < n; ++k) {
        double nr = 1.0, ni = 0.0, qr = 1.0, qi = 0.0;
        for (std::size_t j = 0; j < nf; ++j) {
            const int e = f.e[j];
            if (e == 0) continue;
            const double xr = dr[k] + f.cr[j], xi = di[k] + f.ci[j];
            const double ur = xr * f.ir[j] - xi * f.ii[j];
            const double ui = xr * f.ii[j] + xi * f.ir[j];
            const int a = e < 0 ? -e : e;
            double tr = 1.0, ti = 0.0;
            for (int p = 0; p < a / 2; ++p) {
                const double t = tr * ur - ti * ui;
                ti = tr * ui + ti * ur;
                tr = t;
            }
            if (a & 1) {
                const double r = std::sqrt(ur * ur + ui * ui);
                const double t = std::sqrt((r + std::fabs(ur)) * 0.5);
                const double q = t == 0.0 ? 0.0 : ui / (2.0 * t);
                const double sr = ur >= 0.0 ? t : std::fabs(q);
                const double si = ur >= 0.0 ? q : std::copysign(t, ui);
                const double tt = tr * sr - ti * si;
                ti = tr * si + ti * sr;
                tr = tt;
            }
            if (e > 0) {
                const double t = nr * tr - ni * ti;
                ni = nr * ti + ni * tr;
                nr = t;
            } else {
                const double t = qr * tr - qi * ti;
                qi = qr * ti + qi * tr;
                qr = t;
            }
        }
        const double den = qr * qr + qi * qi;
        outr[k] = (nr * qr + ni * qi) / den;
        outi[k] = (ni * qr - nr * qi) / den;
    }
}

void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                 double* out) {
    const std::size_t nf = f.size();
    for (std::size_t k = 0; k < n; ++k) {
        double num = 1.0, den = 1.0;
        for (std::size_t j = 0; j < nf; ++j) {
            const int e = f.e[j];
            if (e == 0) continue;
            const double xr = dr[k] + f.cr[j], xi = di[k] + f.ci[j];
            const double m = std::sqrt(xr * xr + xi * xi);
            const int a = e < 0 ? -e : e;
            double t = 1.0;
            for (int p = 0; p < a / 2; ++p) t *= m;
            if (a & 1) t *= std::sqrt(m);
            if (e > 0) num *= t;
            else den *= t;
        }
        out[k] = num / den;
    }
}

}  // namespace scalar

namespace {

Backend pick_default() {
    const char* env = std::getenv("QDFLAT_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    return avx2_available() ? Backend::AVX2 : Backend::Scalar;
}

Backend& current() {
    static Backend b = pick_default();
    return b;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active() { return current(); }

void set_backend(Backend b) {
    if (b == Backend::AVX2 && !avx2_available()) throw std::runtime_error("AVX2 backend unavailable");
    current() = b;
}

const char* backend_name(Backend b) { return b == Backend::AVX2 ? "avx2" : "scalar"; }

void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                    double* outr, double* outi) {
    if (current() == Backend::AVX2) avx2::branch_product(f, dr, di, n, outr, outi);
    else scalar::branch_product(f, dr, di, n, outr, outi);
}

void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                 double* out) {
    if (current() == Backend::AVX2) avx2::abs_product(f, dr, di, n, out);
    else scalar::abs_product(f, dr, di, n, out);
}

}  // namespace qdf::kernels
