#include "qdflat/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define QDF_AVX2 __attribute__((target("avx2,fma")))
#endif

namespace qdf::kernels::avx2 {

#if defined(__x86_64__) || defined(__i386__)

namespace {

struct V2 {
    __m256d r, i;
};

QDF_AVX2 inline V2 cmul(V2 a, V2 b) {
    return {_mm256_sub_pd(_mm256_mul_pd(a.r, b.r), _mm256_mul_pd(a.i, b.i)),
            _mm256_add_pd(_mm256_mul_pd(a.r, b.i), _mm256_mul_pd(a.i, b.r))};
}

QDF_AVX2 inline V2 csqrt_principal(V2 u) {
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d sign = _mm256_set1_pd(-0.0);
    const __m256d absr = _mm256_andnot_pd(sign, u.r);
    const __m256d r = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(u.r, u.r), _mm256_mul_pd(u.i, u.i)));
    const __m256d t = _mm256_sqrt_pd(_mm256_mul_pd(_mm256_add_pd(r, absr), half));
    const __m256d tz = _mm256_cmp_pd(t, zero, _CMP_EQ_OQ);
    __m256d q = _mm256_div_pd(u.i, _mm256_add_pd(t, t));
    q = _mm256_blendv_pd(q, zero, tz);
    const __m256d pos = _mm256_cmp_pd(u.r, zero, _CMP_GE_OQ);
    const __m256d absq = _mm256_andnot_pd(sign, q);
    const __m256d tsigned = _mm256_or_pd(t, _mm256_and_pd(sign, u.i));
    return {_mm256_blendv_pd(absq, t, pos), _mm256_blendv_pd(tsigned, q, pos)};
}

}  // namespace

QDF_AVX2 void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                             double* outr, double* outi) {
    const std::size_t nf = f.size();
    std::size_t k = 0;
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    for (; k + 4 <= n; k += 4) {
        const __m256d pr = _mm256_loadu_pd(dr + k), pi = _mm256_loadu_pd(di + k);
        V2 num{one, zero}, den{one, zero};
        for (std::size_t j = 0; j < nf; ++j) {
            const int e = f.e[j];
            if (e == 0) continue;
            const __m256d xr = _mm256_add_pd(pr, _mm256_set1_pd(f.cr[j]));
            const __m256d xi = _mm256_add_pd(pi, _mm256_set1_pd(f.ci[j]));
            const V2 u = cmul({xr, xi}, {_mm256_set1_pd(f.ir[j]), _mm256_set1_pd(f.ii[j])});
            const int a = e < 0 ? -e : e;
            V2 t{one, zero};
            for (int p = 0; p < a / 2; ++p) t = cmul(t, u);
            if (a & 1) t = cmul(t, csqrt_principal(u));
            if (e > 0) num = cmul(num, t);
            else den = cmul(den, t);
        }
        const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(den.r, den.r), _mm256_mul_pd(den.i, den.i));
        const __m256d rr = _mm256_add_pd(_mm256_mul_pd(num.r, den.r), _mm256_mul_pd(num.i, den.i));
        const __m256d ri = _mm256_sub_pd(_mm256_mul_pd(num.i, den.r), _mm256_mul_pd(num.r, den.i));
        _mm256_storeu_pd(outr + k, _mm256_div_pd(rr, d2));
        _mm256_storeu_pd(outi + k, _mm256_div_pd(ri, d2));
    }
    if (k < n) scalar::branch_product(f, dr + k, di + k, n - k, outr + k, outi + k);
}

QDF_AVX2 void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                          double* out) {
    const std::size_t nf = f.size();
    std::size_t k = 0;
    const __m256d one = _mm256_set1_pd(1.0);
    for (; k + 4 <= n; k += 4) {
        const __m256d pr = _mm256_loadu_pd(dr + k), pi = _mm256_loadu_pd(di + k);
        __m256d num = one, den = one;
        for (std::size_t j = 0; j < nf; ++j) {
            const int e = f.e[j];
            if (e == 0) continue;
            const __m256d xr = _mm256_add_pd(pr, _mm256_set1_pd(f.cr[j]));
            const __m256d xi = _mm256_add_pd(pi, _mm256_set1_pd(f.ci[j]));
            const __m256d m = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(xr, xr), _mm256_mul_pd(xi, xi)));
            const int a = e < 0 ? -e : e;
            __m256d t = one;
            for (int p = 0; p < a / 2; ++p) t = _mm256_mul_pd(t, m);
            if (a & 1) t = _mm256_mul_pd(t, _mm256_sqrt_pd(m));
            if (e > 0) num = _mm256_mul_pd(num, t);
            else den = _mm256_mul_pd(den, t);
        }
        _mm256_storeu_pd(out + k, _mm256_div_pd(num, den));
    }
    if (k < n) scalar::abs_product(f, dr + k, di + k, n - k, out + k);
}

#else

void branch_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                    double* outr, double* outi) {
    scalar::branch_product(f, dr, di, n, outr, outi);
}

void abs_product(const FactorSet& f, const double* dr, const double* di, std::size_t n,
                 double* out) {
    scalar::abs_product(f, dr, di, n, out);
}

#endif

}  // namespace qdf::kernels::avx2
