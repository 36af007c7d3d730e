#pragma once

#include <cstddef>
#include <vector>

namespace qdf::kernels {

// Factors for  G(d) = prod_j psqrt((d + c_j) * inv_j)^{e_j}
// where d is an offset from a base point and c_j = base - z_j.
struct FactorSet {
    std::vector<double> cr, ci;  // c_j
    std::vector<double> ir, ii;  // inv_j (1/ref_j); ignored by abs_product
    std::vector<int> e;          // integer exponents in [-8, 8]

    std::size_t size() const { return e.size(); }
    void clear();
    void push(double cre, double cim, double ire, double iim, int ord);
};

enum class Backend { Scalar, AVX2 };

// Branch product, values written to (outr, outi).
void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                    double* outr, double* outi);
// prod_j |d + c_j|^{e_j / 2}
void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                 double* out);

Backend active();
void set_backend(Backend b);  // throws if the backend is unavailable on this CPU
bool avx2_available();
const char* backend_name(Backend b);

namespace scalar {
void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                    double* outr, double* outi);
void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                 double* out);
}  // namespace scalar

namespace avx2 {
void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                    double* outr, double* outi);
void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                 double* out);
}  // namespace avx2

}  // namespace qdf::kernels
