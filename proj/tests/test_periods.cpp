#include "doctest.h"

#include <cmath>
#include <random>

#include "qdflat/fit.hpp"
#include "qdflat/periods.hpp"

using namespace qdf;

namespace {

RationalQD poly(std::vector<std::pair<cplx, int>> roots, cplx scale = 1.0) {
    RationalQD q;
    q.scale = scale;
    for (auto& [z, e] : roots) q.sing.push_back({z, e, e <= 0});
    return q;
}

}  // namespace

TEST_CASE("period closed forms") {
    RationalQD flat;
    CHECK(std::abs(period(flat, make_contour(flat, {0.0, 1.0})) - 1.0) < 1e-14);

    const RationalQD z1 = poly({{0.0, 1}});
    CHECK(std::abs(period(z1, make_contour(z1, {0.0, 1.0})) - 2.0 / 3.0) < 1e-12);

    const RationalQD z2 = poly({{-1.0, 1}, {1.0, 1}});
    const cplx P = period(z2, segment_contour(z2, 0, 1));
    CHECK(std::abs(std::abs(P) - kPi / 2) < 1e-12);
    CHECK(std::abs(P.real()) < 1e-12);
}

TEST_CASE("simple pole endpoint") {
    // int_0^1 z^{-1/2} dz = 2
    const RationalQD p = poly({{0.0, -1}});
    CHECK(std::abs(period(p, make_contour(p, {0.0, 1.0})) - 2.0) < 1e-12);
    // sqrt(z) from 0 to 4i via a bent path equals (2/3)(4i)^{3/2}
    const RationalQD z1 = poly({{0.0, 1}});
    const cplx expect = 2.0 / 3.0 * std::pow(cplx(0.0, 4.0), 1.5);
    const cplx got = period(z1, make_contour(z1, {0.0, {1.0, 1.0}, {0.5, 3.0}, {0.0, 4.0}}));
    CHECK(std::abs(got - expect) < 1e-11);
}

TEST_CASE("homotopy invariance") {
    const RationalQD q = poly({{-1.0, 1}, {1.0, 1}, {{0.3, 2.0}, -1}, {{2.0, -1.0}, 2}}, {0.7, 0.2});
    const Contour a = make_contour(q, {q.sing[0].z, {0.0, -0.5}, q.sing[1].z});
    const Contour b = make_contour(q, {q.sing[0].z, {-0.3, -0.9}, {0.6, -0.8}, q.sing[1].z});
    const cplx Pa = period(q, a), Pb = period(q, b);
    CHECK(std::abs(Pa - Pb) < 1e-11 * std::abs(Pa));
}

TEST_CASE("contour through a singularity is rejected") {
    const RationalQD q = poly({{-1.0, 1}, {0.0, 1}, {1.0, 1}});
    CHECK_THROWS_AS(period(q, make_contour(q, {-2.0, 2.0})), Error);
}

TEST_CASE("spanning tree chart") {
    const RationalQD q = poly({{-1.0, 1}, {1.0, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    REQUIRE(c.contours.size() == 1);
    CHECK(std::abs(std::abs(c.values[0]) - kPi / 2) < 1e-12);

    const RationalQD r = poly({{0.0, 1}, {1.0, 1}, {10.0, 1}});
    const PeriodChart t = spanning_tree_chart(r);
    REQUIRE(t.edges.size() == 2);
    CHECK(t.edges[0] == std::pair<int, int>{0, 1});
    CHECK(t.edges[1] == std::pair<int, int>{1, 2});

    CHECK_THROWS_AS(spanning_tree_chart(poly({{0.0, 1}})), Error);
}

TEST_CASE("jacobian closed form and identities") {
    const RationalQD q = poly({{-1.0, 1}, {1.0, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    const PeriodJacobian J = period_jacobian(q, c);
    // P = i pi (b - a)^2 / 8 up to the branch sign.
    const double s = c.values[0].imag() > 0 ? 1.0 : -1.0;
    CHECK(std::abs(J.matrix(0, 0) - s * cplx(0.0, -kPi / 2)) < 1e-10);
    CHECK(std::abs(J.matrix.row(0).sum()) < 1e-10);
}

TEST_CASE("jacobian against finite differences on a mixed corpus") {
    RationalQD q = poly({{{0.1, 0.05}, 1}, {{1.2, -0.3}, 1}, {{-0.8, 0.9}, 2}, {{0.4, 1.5}, -1}, {{-1.1, -0.7}, 0}},
                        {0.3, 1.1});
    const PeriodChart c = spanning_tree_chart(q);
    const PeriodJacobian J = period_jacobian(q, c);
    for (std::size_t i = 0; i < c.contours.size(); ++i) {
        CHECK(std::abs(J.matrix.row(i).sum()) <= 1e-8 * J.matrix.row(i).norm());
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double h = 1e-6 * 0.5;
            RationalQD qp = q, qm = q;
            qp.sing[j].z += h;
            qm.sing[j].z -= h;
            cplx Pp = period(qp, chart_contour(qp, c, i), 1e-15);
            cplx Pm = period(qm, chart_contour(qm, c, i), 1e-15);
            if (std::abs(Pp - c.values[i]) > std::abs(Pp + c.values[i])) Pp = -Pp;
            if (std::abs(Pm - c.values[i]) > std::abs(Pm + c.values[i])) Pm = -Pm;
            const cplx fd = (Pp - Pm) / (2 * h);
            const double scale = std::max(std::abs(fd), 1e-3 * J.matrix.row(i).norm());
            CHECK(std::abs(J.matrix(i, j) - fd) <= 1e-5 * scale);
        }
    }
}

TEST_CASE("Euler identity for cluster differentials") {
    const RationalQD q = poly({{{0.3, 0.1}, 1}, {{-0.5, 0.2}, 2}, {{0.7, -0.4}, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    const PeriodJacobian J = period_jacobian(q, c);
    const double m = 4;
    for (std::size_t i = 0; i < c.contours.size(); ++i) {
        cplx s = 0;
        for (std::size_t j = 0; j < q.size(); ++j) s += q.sing[j].z * J.matrix(i, j);
        CHECK(std::abs(s - (m + 2) / 2 * c.values[i]) < 1e-6 * std::abs(c.values[i]));
    }
}

TEST_CASE("scaling law: periods scale by t^{(m+2)/2}") {
    ClusterDifferential cd;
    cd.roots = {{{1.0, 0.0}, 1}, {{-0.5, 0.5}, 1}, {{-0.5, -0.5}, 1}};
    const auto sc = scale_singularities(cd, 4.0);
    CHECK(sc.factor == doctest::Approx(32.0));
    const RationalQD q0 = cd.to_rational(), q1 = sc.q.to_rational();
    const cplx P0 = period(q0, segment_contour(q0, 0, 1));
    const cplx P1 = period(q1, segment_contour(q1, 0, 1));
    CHECK(std::abs(P1 - sc.factor * P0) < 1e-12 * std::abs(P1));
}

TEST_CASE("derivative scaling by s^{m/2}") {
    const RationalQD q = poly({{{0.3, 0.1}, 1}, {{-0.5, 0.2}, 1}, {{0.2, -0.3}, 1}});
    RationalQD qs = q;
    const double s = 3.0;
    for (auto& r : qs.sing) r.z *= s;
    const PeriodChart c = spanning_tree_chart(q);
    const PeriodJacobian J = period_jacobian(q, c);
    PeriodChart cs = c;
    const PeriodJacobian Js = period_jacobian(qs, cs);
    const double f = std::pow(s, 1.5);
    for (int i = 0; i < J.matrix.rows(); ++i)
        for (int j = 0; j < J.matrix.cols(); ++j) {
            cplx a = Js.matrix(i, j), b = f * J.matrix(i, j);
            if (std::abs(a + b) < std::abs(a - b)) a = -a;
            CHECK(std::abs(a - b) < 1e-6 * std::abs(b));
        }
}

TEST_CASE("d_euclidean_chart first order Taylor") {
    const RationalQD q = poly({{-1.0, 1}, {1.0, 1}, {5.0, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    const PeriodJacobian J = period_jacobian(q, c);
    CHECK(d_euclidean_chart(q, q, c) == 0.0);
    const double eps = 1e-3;
    RationalQD q2 = q;
    q2.sing[2].z += eps;
    double pred = 0.0;
    for (int i = 0; i < J.matrix.rows(); ++i) pred = std::max(pred, std::abs(J.matrix(i, 2)) * eps);
    CHECK(std::abs(d_euclidean_chart(q, q2, c) - pred) < 10 * eps * eps);
}

TEST_CASE("d_euclidean_chart detects pinching") {
    const RationalQD q = poly({{-1.0, 1}, {1.0, 1}, {{0.0, 3.0}, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    REQUIRE(c.edges[0] == std::pair<int, int>{0, 1});
    RationalQD q2 = q;
    q2.sing[2].z = {0.0, -3.0};  // crosses the segment -1 -> 1
    CHECK_THROWS_AS(d_euclidean_chart(q, q2, c), Error);
}

TEST_CASE("branch sign is continued along the homotopy") {
    // Moving the third zero around the origin region flips conventional branches;
    // continuation keeps the distance small.
    const RationalQD q = poly({{-1.0, 1}, {1.0, 1}, {{3.0, 0.0}, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    RationalQD q2 = q;
    q2.sing[2].z = {3.0, 1e-4};
    CHECK(d_euclidean_chart(q, q2, c) < 1e-3);
}

TEST_CASE("chart persistence under small log-period perturbation") {
    const RationalQD q = poly({{{0.1, 0.05}, 1}, {{1.2, -0.3}, 1}, {{-0.8, 0.9}, 1}, {{0.4, 1.5}, 1}});
    const PeriodChart c = spanning_tree_chart(q);
    const PeriodJacobian J = period_jacobian(q, c);
    // Newton on the period map with the first root pinned to realize small log-period moves.
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1e-3, 1e-3);
    std::vector<cplx> target;
    for (const auto& P : c.values) target.push_back(P * std::exp(cplx(U(rng), U(rng))));
    RationalQD qn = q;
    for (int it = 0; it < 8; ++it) {
        const PeriodJacobian Jn = period_jacobian(qn, c);
        Eigen::VectorXcd r(c.contours.size());
        for (std::size_t k = 0; k < c.contours.size(); ++k) {
            cplx P = period(qn, chart_contour(qn, c, k));
            if (std::abs(P - target[k]) > std::abs(P + target[k])) P = -P;
            r(k) = target[k] - P;
        }
        const Eigen::MatrixXcd A = Jn.matrix.rightCols(q.size() - 1);
        const Eigen::VectorXcd dz = A.colPivHouseholderQr().solve(r);
        for (std::size_t j = 1; j < q.size(); ++j) qn.sing[j].z += dz(j - 1);
        if (r.norm() < 1e-13) break;
    }
    CHECK(chart_persistence(q, qn, c).persists);
    (void)J;
}

TEST_CASE("cluster limit probe") {
    ClusterFamily fam;
    fam.pts = {{{1.0, 0.0}, 1, false, true}, {{-1.0, 0.0}, 1, false, true}, {{5.0, 0.0}, 1, false, false}};
    const auto rep = jacobian_cluster_limit_probe(fam, {1e-1, 3e-2, 1e-2, 3e-3, 1e-3});
    CHECK(rep.m == 2);
    CHECK(std::abs(rep.fittedExponent - 1.0) < 0.1);
    for (const auto& r : rep.rows) CHECK(r.onesRatio < 1e-6);
    CHECK(rep.defectMonotone);
}
