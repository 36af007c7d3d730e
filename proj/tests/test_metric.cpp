#include "doctest.h"

#include <cmath>
#include <random>

#include "qdflat/metric.hpp"

using namespace qdf;

namespace {

RationalQD poly(std::vector<std::pair<cplx, int>> roots, cplx scale = 1.0) {
    RationalQD q;
    q.scale = scale;
    for (auto& [z, e] : roots) q.sing.push_back({z, e, e <= 0});
    return q;
}

}  // namespace

TEST_CASE("flat distance oracles") {
    RationalQD flat;
    const auto r0 = flat_distance(flat, 0.0, {3.0, 4.0}, 1e-8);
    CHECK(std::abs(r0.distance - 5.0) < 1e-8);

    const RationalQD z1 = poly({{0.0, 1}});
    const auto r1 = flat_distance(z1, 0.0, 1.0, 1e-8);
    CHECK(std::abs(r1.distance - 2.0 / 3.0) < 1e-7);

    const RationalQD z2 = poly({{-1.0, 1}, {1.0, 1}});
    const auto r2 = flat_distance(z2, -1.0, 1.0, 1e-8);
    CHECK(std::abs(r2.distance - kPi / 2) < 1e-7);
}

TEST_CASE("distance estimates are monotone under refinement") {
    const RationalQD q = poly({{{0.2, 0.3}, 1}, {{-0.4, -0.1}, 2}, {{1.5, 0.7}, -1}});
    const auto r = flat_distance(q, {-1.0, 0.5}, {1.0, -0.4}, 1e-7);
    for (std::size_t i = 1; i < r.levels.size(); ++i) CHECK(r.levels[i] <= r.levels[i - 1]);
    CHECK(r.distance > 0);
}

TEST_CASE("symmetry and triangle inequality") {
    const RationalQD q = poly({{{0.2, 0.3}, 1}, {{-0.4, -0.1}, 1}, {{0.6, -0.5}, -1}});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 3; ++t) {
        const cplx a(U(rng), U(rng)), b(U(rng), U(rng)), c(U(rng), U(rng));
        const auto ab = flat_distance(q, a, b, 1e-7), ba = flat_distance(q, b, a, 1e-7);
        const auto bc = flat_distance(q, b, c, 1e-7), ac = flat_distance(q, a, c, 1e-7);
        const double slack = 2 * (ab.errorBound + ba.errorBound + bc.errorBound + ac.errorBound) + 1e-9;
        CHECK(std::abs(ab.distance - ba.distance) <= slack);
        CHECK(ac.distance <= ab.distance + bc.distance + slack);
    }
}

TEST_CASE("geodesic bends around a large cone point") {
    // Straight segment passes near an order-4 zero; the geodesic goes through it
    // or around, never longer than the straight segment.
    const RationalQD q = poly({{{0.0, 0.05}, 4}, {{3.0, 3.0}, -1}});
    const double straight = segment_flat_length(q, -1.0, 1.0, 64);
    const auto r = flat_distance(q, -1.0, 1.0, 1e-7);
    CHECK(r.distance <= straight + 1e-9);
}

TEST_CASE("singular diameter") {
    const RationalQD z2 = poly({{-1.0, 1}, {1.0, 1}});
    CHECK(std::abs(singular_diameter(z2, {-1.0, 1.0}).diameter - kPi / 2) < 1e-6);
    RationalQD flat;
    CHECK(std::abs(singular_diameter(flat, {0.0, 1.0}).diameter - 1.0) < 1e-9);
    // shrinking by t scales the diameter by t^2 for m = 2
    const RationalQD zt = poly({{-0.25, 1}, {0.25, 1}});
    CHECK(std::abs(singular_diameter(zt, {-0.25, 0.25}).diameter - kPi / 2 / 16) < 1e-7);
}

TEST_CASE("joint continuity along a convergent sequence") {
    const RationalQD lim = poly({{{0.2, 0.3}, 1}, {{-0.4, -0.1}, 1}});
    const double d0 = flat_distance(lim, -1.0, 1.0, 1e-8).distance;
    double prev = 1e9;
    for (double h : {1e-2, 1e-3, 1e-4}) {
        RationalQD q = lim;
        q.sing[0].z += h;
        const auto r = flat_distance(q, cplx(-1.0, h), 1.0, 1e-8);
        const double gap = std::abs(r.distance - d0);
        CHECK(gap < prev + 10 * r.errorBound);
        prev = gap;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("ball scaling probe") {
    ClusterFamily lin;
    lin.pts = {{0.0, 1, false, true}};
    const auto r1 = ball_scaling_probe(lin, {0.1, 0.05, 0.025, 0.0125});
    CHECK(std::abs(r1.slope - 1.5) < 0.02);
    CHECK(std::abs(r1.prefactorRatio - 2.0 / 3.0) < 1e-3);

    ClusterFamily dbl;
    dbl.pts = {{0.0, 2, false, true}};
    CHECK(std::abs(ball_scaling_probe(dbl, {0.1, 0.05, 0.025, 0.0125}).slope - 2.0) < 0.02);

    ClusterFamily flat;
    flat.pts = {{3.0, 0, true, false}};
    CHECK(std::abs(ball_scaling_probe(flat, {0.1, 0.05, 0.025, 0.0125}).slope - 1.0) < 1e-6);

    CHECK_THROWS_AS(ball_scaling_probe(lin, {0.1, 0.05, 0.025}), Error);
    CHECK_THROWS_AS(ball_scaling_probe(lin, {0.1, 0.05, 0.07, 0.01}), Error);
}
