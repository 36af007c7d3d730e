#include "doctest.h"

#include <boost/math/special_functions/ellint_1.hpp>
#include <cmath>

#include "qdflat/nrrp.hpp"
#include "qdflat/qcmap.hpp"

using namespace qdf;

namespace {

RationalQD zero_and_poles(cplx zero, int poles, double radius, double stretch1 = 1.0) {
    RationalQD q;
    q.sing.push_back({zero, 1, false});
    for (int k = 0; k < poles; ++k) {
        cplx z = std::polar(radius, 0.3 + 2 * kPi * k / poles);
        if (k == 1) z *= stretch1;
        q.sing.push_back({z, -1, true});
    }
    return q;
}

RationalQD pair_and_poles(double eps) {
    RationalQD q;
    q.sing = {{-eps, 1, false}, {eps, 1, false}};
    for (int k = 0; k < 6; ++k) q.sing.push_back({std::polar(3.0, 0.3 + 2 * kPi * k / 6), -1, true});
    return q;
}

// BA extension by composite Simpson, independent of the library quadrature
cplx ba_simpson(const std::function<double(double)>& h, double r, cplx z, int n = 20000) {
    const double x = z.real(), y = z.imag();
    double s = 0.0, d = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double t = double(k) / n;
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        const double a = h(x + y * t), b = h(x - y * t);
        s += w * (a + b);
        d += w * (a - b);
    }
    s /= 3.0 * n;
    d /= 3.0 * n;
    return {0.5 * s, 0.5 * r * d};
}

}  // namespace

TEST_CASE("boundary maps") {
    const auto id = BoundaryMap::from_function([](double x) { return x; }, -5, 5);
    CHECK(id.fixes_zero_and_one());
    CHECK(id(0.37) == doctest::Approx(0.37));
    CHECK_THROWS_AS(id(6.0), Error);
    CHECK_THROWS_AS(BoundaryMap({0, 1, 2, 3}, {0, 1, 1, 2}), Error);
    CHECK_THROWS_AS(BoundaryMap({0, 1, 1, 3}, {0, 1, 2, 3}), Error);
    const auto two = BoundaryMap::from_function([](double x) { return 2 * x; }, -5, 5);
    CHECK_FALSE(two.fixes_zero_and_one());
    // pchip keeps monotone data monotone between samples
    const auto cube = BoundaryMap::from_function([](double x) { return x * x * x; }, -2, 2, 16);
    double prev = cube(-2.0);
    for (int k = 1; k <= 400; ++k) {
        const double v = cube(-2.0 + 4.0 * k / 400);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("quasisymmetry constant") {
    const auto plan = SamplePlan::grid(-2, 2, 9, 0.05, 1.0, 5);
    const auto id = BoundaryMap::from_function([](double x) { return x; }, -5, 5);
    CHECK(quasisymmetry_constant(id, plan).rho == doctest::Approx(1.0).epsilon(1e-12));
    const auto two = BoundaryMap::from_function([](double x) { return 2 * x; }, -5, 5);
    CHECK(quasisymmetry_constant(two, plan).rho == doctest::Approx(1.0).epsilon(1e-12));
    const auto cube = BoundaryMap::from_function([](double x) { return x * x * x; }, -10, 10);
    const auto e = quasisymmetry_constant(cube, SamplePlan{{1.0}, {1.0}});
    CHECK(e.rho == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(e.samples == 1);
    CHECK(quasisymmetry_constant(cube, plan).rho >= 7.0 - 1e-9);
}

TEST_CASE("Beurling-Ahlfors closed forms") {
    const auto id = BoundaryMap::from_function([](double x) { return x; }, -20, 20);
    for (double r : {0.5, 1.0, 2.0, 3.0})
        for (cplx z : {cplx(0.0, 1.0), cplx(-1.3, 0.4), cplx(2.1, 3.7)}) {
            const cplx f = beurling_ahlfors(id, r)(z);
            CHECK(std::abs(f - cplx(z.real(), r * z.imag() / 2)) < 1e-12);
        }
    const auto two = BoundaryMap::from_function([](double x) { return 2 * x; }, -20, 20);
    for (cplx z : {cplx(0.3, 0.7), cplx(-2.0, 1.5)}) CHECK(std::abs(beurling_ahlfors(two, 2.0)(z) - 2.0 * z) < 1e-12);

    // nonlinear boundary map against an independent Simpson rule
    auto mob = [](double x) { return x / (1.0 - x / 10.0); };
    const auto hm = BoundaryMap::from_function(mob, -5, 5, 8192);
    for (cplx z : {cplx(0.0, 1.0), cplx(0.5, 0.25), cplx(-1.0, 2.0)}) {
        const cplx f = beurling_ahlfors(hm, 2.0)(z);
        CHECK(std::abs(f - ba_simpson(mob, 2.0, z)) < 1e-7);
    }
    CHECK_THROWS_AS(beurling_ahlfors(hm, 2.0)(cplx(4.0, 2.0)), Error);
    CHECK_THROWS_AS(beurling_ahlfors(hm, 2.0)(cplx(0.0, -1.0)), Error);
    CHECK_THROWS_AS(beurling_ahlfors(hm, 0.0), Error);
}

TEST_CASE("dilatation fields") {
    const Grid g{-1, 1, 0.1, 1, 6, 6};
    const auto F = dilatation_field([](cplx z) { return cplx(2 * z.real(), z.imag() / 2); }, g, 1e-4);
    CHECK(F.maxK == doctest::Approx(4.0).epsilon(1e-9));
    for (double k : F.K) CHECK(k == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(dilatation_field([](cplx z) { return z; }, g, 1e-4).maxK == doctest::Approx(1.0).epsilon(1e-12));
    for (double c : {0.25, 0.8, 3.0}) {
        const auto Fc = dilatation_field([c](cplx z) { return cplx(z.real(), c * z.imag()); }, g, 1e-4);
        CHECK(Fc.maxK == doctest::Approx(std::max(c, 1 / c)).epsilon(1e-9));
        // the same through beurling_ahlfors(identity, r) with c = r / 2
        const auto id = BoundaryMap::from_function([](double x) { return x; }, -5, 5);
        CHECK(dilatation_field(beurling_ahlfors(id, 2 * c), g, 1e-4).maxK ==
              doctest::Approx(std::max(c, 1 / c)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(dilatation_field([](cplx z) { return std::conj(z); }, g, 1e-4), Error);

    // excluded neighbourhoods are skipped
    const auto Fe = dilatation_field([](cplx z) { return z; }, g, 1e-2, {cplx(-1.0, 0.1)});
    CHECK(Fe.excluded == 1);
    CHECK(Fe.K.size() == 35);

    // affine boundary map, r = 2: K <= 1 + 5 step
    const auto aff = BoundaryMap::from_function([](double x) { return 3 * x + 1; }, -10, 10);
    const double step = 1e-3;
    CHECK(dilatation_field(beurling_ahlfors(aff, 2.0), g, step).maxK <= 1 + 5 * step);
}

TEST_CASE("ρ² bound on a smooth corpus") {
    // K <= rho^2 with r = 2 for mildly nonlinear maps (the checkable direction of the Beurling-Ahlfors bound)
    const std::vector<std::function<double(double)>> corpus = {
        [](double x) { return x + 0.1 * std::sin(x); },
        [](double x) { return x + 0.05 * x * std::abs(x); },
        [](double x) { return std::sinh(0.4 * x) / 0.4; },
    };
    const Grid g{-1.5, 1.5, 0.2, 1.5, 8, 8};
    for (const auto& f : corpus) {
        const auto h = BoundaryMap::from_function(f, -8, 8, 8192);
        const double rho = quasisymmetry_constant(h, SamplePlan::grid(-4, 4, 41, 0.01, 3.0, 25)).rho;
        const double K = dilatation_field(beurling_ahlfors(h, 2.0), g, 1e-4).maxK;
        CHECK(K >= 1.0);
        CHECK(K <= rho * rho * 1.01);
    }
}

TEST_CASE("affine triangles and PL maps") {
    const std::array<cplx, 3> s{0.0, 1.0, cplx(0, 1)};
    const std::array<cplx, 3> d{0.0, 2.0, cplx(0, 1)};
    CHECK(affine_between(s, d).K == doctest::Approx(2.0).epsilon(1e-14));
    const cplx rot = std::polar(1.0, kPi / 6);
    CHECK(affine_between(s, {0.0, rot, rot * cplx(0, 1)}).K == doctest::Approx(1.0).epsilon(1e-14));
    const auto A = affine_between(s, d);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(A.a * s[k] + A.b * std::conj(s[k]) + A.c - d[k]) < 1e-14);
    CHECK_THROWS_AS(affine_between({0.0, 1.0, 2.0}, d), Error);
    const auto pl = pl_map_dilatation(std::vector{s, s}, std::vector{s, d});
    CHECK(pl.K[0] == 1.0);
    CHECK(pl.maxK == doctest::Approx(2.0));
    CHECK(pl.argMax == 1);
    // diag(2, 1/2): a = 1.25, b = 0.75
    CHECK(dilatation_of(1.25, 0.75) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK_THROWS_AS(dilatation_of(0.5, 0.75), Error);
}

TEST_CASE("marked point shear") {
    const Shear id = marked_point_shear(cplx(0.3, 0.7), cplx(0.3, 0.7));
    CHECK(id.K == doctest::Approx(1.0).epsilon(1e-15));
    for (double e : {1e-3, 0.1, 0.5}) CHECK(marked_point_shear(cplx(0, 1 + e), cplx(0, 1)).K == doctest::Approx(1 + e));
    const Shear sh = marked_point_shear(cplx(0.1, 1.0), cplx(0.0, 1.0));
    const double fz = std::sqrt(1.0025), fzb = 0.05;
    CHECK(sh.K == doctest::Approx((fz + fzb) / (fz - fzb)).epsilon(1e-14));
    CHECK(sh.K == doctest::Approx(1.105).epsilon(1e-3));
    CHECK(std::abs(sh.apply(cplx(0, 1)) - cplx(0.1, 1.0)) < 1e-15);
    for (double x : {-2.0, 0.0, 3.5}) CHECK(std::abs(sh.apply(x) - x) < 1e-15);
    CHECK_THROWS_AS(marked_point_shear(cplx(0, 1), cplx(1, 0)), Error);
    CHECK_THROWS_AS(marked_point_shear(cplx(0, -1), cplx(0, 1)), Error);
}

TEST_CASE("NRRP around a simple zero") {
    const RationalQD q = zero_and_poles(0.0, 5, 3.0);
    const NrrpSystem S = nrrp_system(q, 0.1);
    REQUIRE(S.nrrps.size() == 6);
    const NRRP& P = S.nrrps[0];
    CHECK(P.side_count() == 6);  // 2 (m + 2) sides, cone angle 3 pi
    CHECK(P.closure < 1e-10 * P.R);
    double lo = 1e300, hi = 0.0;
    for (int k = 0; k < P.side_count(); ++k) {
        CHECK(P.sides[k].length > 0.0);
        lo = std::min(lo, P.sides[k].length);
        hi = std::max(hi, P.sides[k].length);
        // each corner turns left by pi/2; the last one wraps through the branch flip of the 3 pi cone
        if (k + 1 < P.side_count()) CHECK(std::abs(P.sides[k + 1].dir / P.sides[k].dir - cplx(0, 1)) < 1e-12);
    }
    CHECK(std::abs(P.sides[0].dir / P.sides.back().dir - cplx(0, -1)) < 1e-12);
    CHECK(hi / lo < 1.01);  // nearly regular
    CHECK(std::abs(P.sides.front().z.front() - P.sides.back().z.back()) < 1e-10);
    for (std::size_t a = 1; a < S.nrrps.size(); ++a) CHECK(S.nrrps[a].side_count() == 2);

    CHECK_THROWS_AS(trace_nrrp(q, {0}, 50.0), Error);  // too large: swallows the poles
}

TEST_CASE("doubling the degenerate square") {
    const NRRP sq = rectangle_nrrp(1.0, 1.0);
    DoubleOptions o;
    o.guess = DoubleGuess{{2.4}, {}, 0.3};
    const DoubleResult d = double_nrrp(sq, o);
    REQUIRE(d.converged);
    CHECK(d.residual < 1e-8);
    CHECK(d.corners[2] == doctest::Approx(2.0).epsilon(1e-9));
    const double K = boost::math::ellint_1(1.0 / std::sqrt(2.0));
    CHECK(d.q.scale.real() == doctest::Approx(1.0 / (2.0 * K * K)).epsilon(1e-9));
    CHECK(d.order > 1.5);
    const auto L = double_side_lengths(d.q, d.corners);
    for (double l : L) CHECK(l == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(double_nrrp(rectangle_nrrp(1.0, 2.0), DoubleOptions{40, 1e-12, 1e-14, 1e-7, DoubleGuess{{0.5}, {}, 0}}),
                    Error);
}

TEST_CASE("doubling NRRPs with interior singularities") {
    const NrrpSystem S = nrrp_system(zero_and_poles(0.0, 5, 3.0), 0.1);
    const DoubleResult d = double_nrrp(S.nrrps[0]);
    CHECK(d.converged);
    CHECK(d.residual < 1e-10);
    CHECK(d.ratioResidual < 1e-10);
    CHECK(conjugation_invariant(d.q, 1e-10));
    // the two-zero cluster needs the interior labels matched
    const NrrpSystem S2 = nrrp_system(pair_and_poles(0.02), 0.1);
    REQUIRE(S2.nrrps[0].side_count() == 8);
    const DoubleResult d2 = double_nrrp(S2.nrrps[0]);
    CHECK(d2.converged);
    CHECK(d2.ratioResidual < 1e-10);
}

TEST_CASE("assembled maps") {
    SUBCASE("polygon surfaces") {
        const auto sq = build_from_polygons(torus_spec(1.0, {0, 1}));
        const auto rect = build_from_polygons(torus_spec(2.0, {0, 0.5}));
        const DilatationReport same = assemble_qc_map(sq, sq);
        CHECK(same.K == 1.0);
        CHECK(same.teichBound == 0.0);
        const DilatationReport r = assemble_qc_map(sq, rect);
        CHECK(r.K == doctest::Approx(4.0).epsilon(1e-14));
        CHECK(r.teichBound == doctest::Approx(std::log(2.0)).epsilon(1e-14));
        CHECK_THROWS_AS(assemble_qc_map(sq, build_from_polygons(pillowcase_spec(1.0, {0, 1}))), Error);
    }
    SUBCASE("sphere differentials") {
        const RationalQD a = zero_and_poles(0.0, 5, 3.0);
        const RationalQD b = zero_and_poles({0.05, 0.02}, 5, 3.0, 1.03);
        const DilatationReport same = assemble_qc_map(a, a);
        CHECK(same.K == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(same.teichBound < 1e-9);
        const DilatationReport ab = assemble_qc_map(a, b), ba = assemble_qc_map(b, a);
        CHECK(ab.K > 1.0);
        double mx = 1.0;
        for (const auto& reg : ab.regions) {
            CHECK(reg.K >= 1.0);
            mx = std::max(mx, reg.K);
        }
        CHECK(ab.K == mx);
        CHECK(ab.teichBound == doctest::Approx(0.5 * std::log(ab.K)));
        CHECK(std::abs(ab.teichBound - ba.teichBound) <= 0.05 * std::max(ab.teichBound, ba.teichBound));
        RationalQD c = a;
        c.sing.pop_back();
        CHECK_THROWS_AS(assemble_qc_map(a, c), Error);
    }
}
