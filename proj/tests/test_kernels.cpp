#include "doctest.h"

#include <cmath>
#include <random>

#include "qdflat/kernels.hpp"
#include "qdflat/periods.hpp"

using namespace qdf;
namespace K = qdf::kernels;

namespace {

struct Case {
    K::FactorSet f;
    std::vector<double> dr, di;
};

Case random_case(std::mt19937& rng, std::size_t nf, std::size_t n) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_int_distribution<int> ord(-3, 4);
    Case c;
    for (std::size_t j = 0; j < nf; ++j) {
        const cplx ref = std::polar(1.0, u(rng));
        const cplx inv = 1.0 / ref;
        c.f.push(u(rng), u(rng), inv.real(), inv.imag(), ord(rng));
    }
    for (std::size_t k = 0; k < n; ++k) {
        c.dr.push_back(u(rng));
        c.di.push_back(u(rng));
    }
    return c;
}

cplx oracle(const K::FactorSet& f, cplx d) {
    cplx out{1.0, 0.0};
    for (std::size_t j = 0; j < f.size(); ++j) {
        const cplx u = (d + cplx(f.cr[j], f.ci[j])) * cplx(f.ir[j], f.ii[j]);
        const int e = f.e[j];
        cplx t = ipow(u, std::abs(e) / 2);
        if (std::abs(e) & 1) t *= psqrt(u);
        out *= e < 0 ? 1.0 / t : t;
    }
    return out;
}

double abs_oracle(const K::FactorSet& f, cplx d) {
    double out = 1.0;
    for (std::size_t j = 0; j < f.size(); ++j) out *= std::pow(std::abs(d + cplx(f.cr[j], f.ci[j])), f.e[j] / 2.0);
    return out;
}

}  // namespace

TEST_CASE("scalar kernels match the complex oracle") {
    std::mt19937 rng(11);
    for (std::size_t nf : {1u, 3u, 7u, 12u}) {
        const Case c = random_case(rng, nf, 37);
        std::vector<double> orr(37), oi(37), oa(37);
        K::scalar::branch_product(c.f, c.dr.data(), c.di.data(), 37, orr.data(), oi.data());
        K::scalar::abs_product(c.f, c.dr.data(), c.di.data(), 37, oa.data());
        for (std::size_t k = 0; k < 37; ++k) {
            const cplx d(c.dr[k], c.di[k]);
            const cplx want = oracle(c.f, d);
            CHECK(std::abs(cplx(orr[k], oi[k]) - want) <= 1e-12 * std::abs(want));
            CHECK(oa[k] == doctest::Approx(abs_oracle(c.f, d)).epsilon(1e-12));
            CHECK(std::abs(want) == doctest::Approx(oa[k]).epsilon(1e-11));
        }
    }
}

TEST_CASE("avx2 kernels agree with scalar") {
    if (!K::avx2_available()) {
        MESSAGE("AVX2 not available on this CPU; scalar path only");
        CHECK_THROWS_AS(K::set_backend(K::Backend::AVX2), std::exception);
        return;
    }
    std::mt19937 rng(12);
    // lengths around the vector width exercise the tail handling
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 15u, 64u, 101u}) {
        const Case c = random_case(rng, 1 + n % 9, n);
        std::vector<double> sr(n), si(n), vr(n), vi(n), sa(n), va(n);
        K::scalar::branch_product(c.f, c.dr.data(), c.di.data(), n, sr.data(), si.data());
        K::avx2::branch_product(c.f, c.dr.data(), c.di.data(), n, vr.data(), vi.data());
        K::scalar::abs_product(c.f, c.dr.data(), c.di.data(), n, sa.data());
        K::avx2::abs_product(c.f, c.dr.data(), c.di.data(), n, va.data());
        for (std::size_t k = 0; k < n; ++k) {
            const double m = std::hypot(sr[k], si[k]);
            CHECK(std::abs(sr[k] - vr[k]) <= 1e-13 * m);
            CHECK(std::abs(si[k] - vi[k]) <= 1e-13 * m);
            CHECK(va[k] == doctest::Approx(sa[k]).epsilon(1e-13));
        }
    }
}

TEST_CASE("branch cut of the odd factor is the principal one") {
    K::FactorSet f;
    f.push(0.0, 0.0, 1.0, 0.0, 1);
    const double dr[2] = {-1.0, -1.0}, di[2] = {1e-300, -1e-300};
    double orr[2], oi[2];
    K::scalar::branch_product(f, dr, di, 2, orr, oi);
    CHECK(oi[0] == doctest::Approx(1.0));
    CHECK(oi[1] == doctest::Approx(-1.0));
}

TEST_CASE("periods do not depend on the backend") {
    RationalQD q;
    q.sing = {{{-1.0, 0.2}, 1, false}, {{1.0, -0.1}, 2, false}, {{0.2, 1.5}, -1, true}, {{-0.5, -1.2}, -1, true}};
    const Contour c = make_contour(q, {{-1.5, -0.5}, {0.0, 0.4}, {1.7, 0.9}});
    const K::Backend before = K::active();
    K::set_backend(K::Backend::Scalar);
    const cplx ps = period(q, c, 1e-13);
    CHECK(std::string(K::backend_name(K::active())) == K::backend_name(K::Backend::Scalar));
    if (K::avx2_available()) {
        K::set_backend(K::Backend::AVX2);
        const cplx pv = period(q, c, 1e-13);
        CHECK(std::abs(ps - pv) <= 1e-12 * std::abs(ps));
    }
    K::set_backend(before);
}
