#pragma once

#include <functional>

#include "qdflat/common.hpp"

namespace qdf::quad {

// Fills out[k] = f(x[k]) for k < n.
using BatchFn = std::function<void(const double* x, std::size_t n, cplx* out)>;

struct Result {
    cplx value{};
    double error = 0.0;
    double absIntegral = 0.0;  // integral of |f|, for relative stopping
    int intervals = 0;
    bool converged = true;
};

struct Piece {
    BatchFn f;
    double a = 0.0, b = 1.0;
};

// Globally adaptive Gauss-Kronrod 7/15 over several pieces sharing one budget.
// Stops when the summed error estimate is below max(tol, relFloor * integral of |f|).
Result integrate(const std::vector<Piece>& pieces, double tol, int maxIntervals = 4000,
                 double relFloor = 64.0 * 2.220446049250313e-16);

Result integrate(const BatchFn& f, double a, double b, double tol, int maxIntervals = 4000);

// n-point Gauss-Legendre rule on [0, 1].
void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w);

}  // namespace qdf::quad
