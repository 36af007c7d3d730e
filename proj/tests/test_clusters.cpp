#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "qdflat/assignment.hpp"
#include "qdflat/clusters.hpp"
#include "qdflat/metric.hpp"
#include "qdflat/periods.hpp"

using namespace qdf;

namespace {

RationalQD poly(std::vector<std::pair<cplx, int>> roots, cplx scale = 1.0) {
    RationalQD q;
    q.scale = scale;
    for (auto& [z, e] : roots) q.sing.push_back({z, e, e <= 0});
    return q;
}

using Sets = std::vector<std::vector<int>>;

// Every subset, keep the qualifying ones, then the maximal ones.
Sets brute_clusters(const std::vector<cplx>& p, double delta) {
    const int n = static_cast<int>(p.size());
    Sets ok;
    for (int mask = 1; mask < (1 << n) - 1; ++mask) {
        std::vector<int> D;
        for (int i = 0; i < n; ++i)
            if (mask >> i & 1) D.push_back(i);
        if (D.size() < 2) continue;
        double diam = 0, gap = 1e300;
        for (int i : D)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                if (mask >> j & 1)
                    diam = std::max(diam, std::abs(p[i] - p[j]));
                else
                    gap = std::min(gap, std::abs(p[i] - p[j]));
            }
        if (diam <= delta * gap) ok.push_back(D);
    }
    Sets out;
    for (const auto& D : ok) {
        bool inside = false;
        for (const auto& M : ok)
            if (M.size() > D.size() && std::includes(M.begin(), M.end(), D.begin(), D.end())) inside = true;
        if (!inside) out.push_back(D);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<cplx> planted(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<cplx> p;
    while (static_cast<int>(p.size()) < n) {
        const cplx c(3 * U(rng), 3 * U(rng));
        const double s = std::pow(10.0, -3.0 * (U(rng) + 1.0) / 2.0);
        const int k = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < k && static_cast<int>(p.size()) < n; ++i) p.push_back(c + s * cplx(U(rng), U(rng)));
    }
    return p;
}

}  // namespace

TEST_CASE("delta clusters examples") {
    CHECK(delta_clusters(std::vector<cplx>{0.0, 0.01, 1.0}, 0.1) == Sets{{0, 1}});
    CHECK(delta_clusters(std::vector<cplx>{0.0}, 0.1).empty());
    CHECK(delta_clusters(std::vector<cplx>{0.0, 0.5, 1.0}, 0.1).empty());
    CHECK_THROWS_WITH(delta_clusters(std::vector<cplx>{0.0, 1.0}, 1.0), "delta must lie in (0, 1)");
}

TEST_CASE("delta clusters agree with subset enumeration") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = planted(rng, 3 + static_cast<int>(rng() % 6));
        for (double delta : {0.05, 0.1, 0.3}) CHECK(delta_clusters(p, delta) == brute_clusters(p, delta));
    }
}

TEST_CASE("delta clusters: order independence, disjointness, monotonicity in delta") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = planted(rng, 8);
        std::vector<int> perm(p.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<cplx> pp(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) pp[i] = p[perm[i]];
        const Sets a = delta_clusters(p, 0.1);
        std::set<std::vector<int>> b;
        for (auto D : delta_clusters(pp, 0.1)) {
            for (int& i : D) i = perm[i];
            std::sort(D.begin(), D.end());
            b.insert(D);
        }
        CHECK(std::set<std::vector<int>>(a.begin(), a.end()) == b);
        std::vector<int> seen(p.size(), 0);
        for (const auto& D : a)
            for (int i : D) ++seen[i];
        CHECK(*std::max_element(seen.begin(), seen.end()) <= 1);
        for (const auto& D : delta_clusters(p, 0.03)) {
            bool contained = false;
            for (const auto& M : a) contained = contained || std::includes(M.begin(), M.end(), D.begin(), D.end());
            CHECK(contained);
        }
    }
}

TEST_CASE("cluster tree examples") {
    const double e = 1e-3, e2 = 1e-4;
    const RationalQD a = poly({{e, 1}, {-e, 1}, {5.0 + e2, 1}, {5.0 - e2, 1}}, 1.0);
    const ClusterTree ta = cluster_tree(a, 0.1, ClusterMetric::Complex, false);
    REQUIRE(ta.nodes.size() == 3);
    CHECK(ta.nodes[0].children == std::vector<int>{1, 2});
    CHECK(ta.nodes[1].members == std::vector<int>{0, 1});
    CHECK(ta.nodes[2].members == std::vector<int>{2, 3});
    CHECK(ta.nodes[1].totalOrder == 2);

    const RationalQD b = poly({{e, 1}, {e + e * e, 1}, {1.0, 1}});
    const ClusterTree tb = cluster_tree(b, 0.1, ClusterMetric::Complex, false);
    REQUIRE(tb.nodes.size() == 2);
    CHECK(tb.nodes[1].members == std::vector<int>{0, 1});
    CHECK(tb.nodes[1].parent == 0);

    const RationalQD c = poly({{0.0, 1}, {1.0, 1}, {{0.0, 1.0}, 1}});
    CHECK(cluster_tree(c, 0.1, ClusterMetric::Complex, false).nodes.size() == 1);
}

TEST_CASE("cluster tree nests and annotates flat diameters") {
    // {0, 1e-4} inside {0, 1e-4, 1e-2} inside the root
    const RationalQD q = poly({{0.0, 1}, {1e-4, 1}, {1e-2, 1}, {2.0, 1}, {{0.0, 3.0}, -1}});
    const ClusterTree t = cluster_tree(q, 0.1);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[1].members == std::vector<int>{0, 1, 2});
    CHECK(t.nodes[2].members == std::vector<int>{0, 1});
    CHECK(t.nodes[2].parent == 1);
    CHECK(t.nodes[1].totalOrder == 3);
    CHECK(t.nodes[0].markedCount == 1);
    CHECK(t.nodes[2].diamQ > 0.0);
    CHECK(t.nodes[2].diamQ < t.nodes[1].diamQ);
    CHECK(t.nodes[1].diamQ < t.nodes[0].diamQ);
}

TEST_CASE("cluster trees agree under the complex and flat metrics") {
    const std::vector<RationalQD> corpus = {
        poly({{1e-3, 1}, {-1e-3, 1}, {5.0, 1}, {{0.0, 3.0}, -1}}),
        poly({{1e-3, 1}, {-1e-3, 1}, {{5.0, 1e-4}, 1}, {{5.0, -1e-4}, 1}}),
        poly({{0.0, 2}, {{2e-3, 1e-3}, 1}, {1.0, 1}, {{-1.0, 1.0}, -1}}),
        poly({{0.0, 1}, {1.0, 1}, {{0.0, 1.0}, 1}}),
    };
    auto same = [](const ClusterTree& a, const ClusterTree& b) {
        if (a.nodes.size() != b.nodes.size()) return false;
        for (std::size_t k = 0; k < a.nodes.size(); ++k)
            if (a.nodes[k].members != b.nodes[k].members) return false;
        return true;
    };
    for (std::size_t c = 0; c < corpus.size(); ++c) {
        CAPTURE(c);
        CHECK(same(cluster_tree(corpus[c], 0.02, ClusterMetric::Complex, false),
                   cluster_tree(corpus[c], 0.02, ClusterMetric::Flat)));
        // at 0.05 the order-2 zero shrinks {0, w, 1} to flat diameter 0.142 against a gap of 3.34
        const bool agree05 = same(cluster_tree(corpus[c], 0.05, ClusterMetric::Complex, false),
                                  cluster_tree(corpus[c], 0.05, ClusterMetric::Flat));
        CHECK(agree05 == (c != 2));
    }
}

TEST_CASE("cluster center") {
    CHECK(std::abs(cluster_center({{1e-3, 1}, {-1e-3, 1}})) < 1e-18);
    CHECK(std::abs(cluster_center({{0.3, 2}, {0.0, 1}}) - 0.2) < 1e-15);
    CHECK_THROWS_WITH(cluster_center({{0.3, 1}, {0.0, -1}}), "cluster center undefined: total order 0 is not positive");
}

TEST_CASE("assignment solver matches permutation enumeration") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 6);
        std::vector<double> c(n * n);
        for (double& x : c) x = U(rng);
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double s = 0;
            for (int i = 0; i < n; ++i) s += c[i * n + perm[i]];
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const Assignment a = solve_assignment(c, n);
        CHECK(std::abs(a.cost - best) < 1e-12);
        std::vector<int> cols = a.rowToCol;
        std::sort(cols.begin(), cols.end());
        for (int i = 0; i < n; ++i) CHECK(cols[i] == i);
    }
}

TEST_CASE("d_sym examples and pseudometric") {
    const RationalQD a = poly({{0.1, 1}, {-0.1, 1}});
    CHECK(d_sym(a, a) == 0.0);
    CHECK(std::abs(d_sym(a, poly({{0.1 + 1e-3, 1}, {-0.1, 1}})) - 1e-3) < 1e-15);
    CHECK(d_sym(poly({{0.0, 1}, {1.0, 1}}), poly({{1.0, 1}, {0.0, 1}})) == 0.0);
    CHECK(std::abs(d_sym(a, poly({{0.1, 1}, {-0.1, 1}}, 2.0)) - 1.0) < 1e-15);
    CHECK_THROWS_WITH(d_sym(a, poly({{0.1, 2}, {-0.1, 1}})),
                      "strata mismatch: 2 vs 1 singularities of order 1");

    std::mt19937 rng(8);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto sample = [&] {
        return poly({{{U(rng), U(rng)}, 1}, {{U(rng), U(rng)}, 1}, {{U(rng), U(rng)}, 1}, {{U(rng), U(rng)}, -1},
                     {{U(rng), U(rng)}, 2}},
                    cplx(1 + 0.1 * U(rng), 0.1 * U(rng)));
    };
    for (int t = 0; t < 100; ++t) {
        const RationalQD x = sample(), y = sample(), z = sample();
        CHECK(std::abs(d_sym(x, y) - d_sym(y, x)) < 1e-12);
        CHECK(d_sym(x, z) <= d_sym(x, y) + d_sym(y, z) + 1e-12);
    }
}

TEST_CASE("projection to the cluster differential") {
    const double e = 1e-3;
    const RationalQD q = poly({{e, 1}, {-e, 1}, {1.0, 1}});
    const ClusterProjection p = project_to_cluster_differential(q, {0, 1});
    CHECK(std::abs(p.t - cplx(-1.0, 0.0)) < 1e-15);
    CHECK(std::abs(std::pow(p.root, 4) + 1.0) < 1e-14);
    CHECK(std::abs(p.root - std::polar(1.0, kPi / 4)) < 1e-14);
    REQUIRE(p.alpha.roots.size() == 2);
    // alpha = w^2 - root^2 e^2
    CHECK(std::abs(p.alpha.roots[0].first * p.alpha.roots[1].first + p.root * p.root * e * e) < 1e-18);

    // the cluster differential itself projects to itself
    const RationalQD c = poly({{0.3, 1}, {-0.3, 1}, {{0.0, 0.5}, 1}, {{0.0, -0.5}, 1}});
    const ClusterProjection pc = project_to_cluster_differential(c, {0, 1, 2, 3});
    CHECK(std::abs(pc.root - 1.0) < 1e-15);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(pc.alpha.roots[i].first - c.sing[i].z) < 1e-15);
    CHECK(projection_defect(c, pc) < 1e-12);

    CHECK_THROWS_WITH(project_to_cluster_differential(poly({{0.0, 1}, {1e-3, -1}, {1.0, 1}}), {0, 1}),
                      "cluster contains a pole");
    // root hint picks the nearest fourth root of -1
    const ClusterProjection ph = project_to_cluster_differential(q, {0, 1}, cplx(-1.0, 1.0));
    CHECK(std::abs(ph.root - std::polar(1.0, 3 * kPi / 4)) < 1e-14);
}

TEST_CASE("projection defect is small against the cluster flat diameter") {
    std::vector<double> ratio;
    for (double e : {1e-2, 1e-3, 1e-4}) {
        const RationalQD q = poly({{e, 1}, {{-e, 0.3 * e}, 1}, {1.0, 1}, {{0.5, 2.0}, -1}});
        const ClusterProjection p = project_to_cluster_differential(q, {0, 1});
        const double diamQ = singular_diameter(q, {q.sing[0].z, q.sing[1].z}).diameter;
        ratio.push_back(projection_defect(q, p) / diamQ);
    }
    CHECK(ratio[0] < 0.1);
    CHECK(ratio[1] < ratio[0]);
    CHECK(ratio[2] < ratio[1]);
}

TEST_CASE("projected periods scale with the cluster") {
    // scaling the cluster about its center by s scales alpha periods by s^{(m+2)/2}
    const RationalQD q = poly({{{2e-3, 0.0}, 1}, {{-1e-3, 1e-3}, 1}, {{-1e-3, -1e-3}, 1}, {1.0, 1}, {{0.0, 2.0}, -1}});
    const std::vector<int> S{0, 1, 2};
    const cplx c = cluster_center(q, S);
    for (double s : {2.0, 0.5}) {
        RationalQD qs = q;
        for (int i : S) qs.sing[i].z = c + s * (q.sing[i].z - c);
        const auto a = project_to_cluster_differential(q, S).alpha.to_rational();
        const auto b = project_to_cluster_differential(qs, S).alpha.to_rational();
        const PeriodChart chart = spanning_tree_chart(a);
        for (std::size_t k = 0; k < chart.contours.size(); ++k) {
            const cplx pa = period(a, chart.contours[k]);
            const cplx pb = period(b, chart_contour(b, chart, k));
            CHECK(std::abs(std::abs(pb) / std::abs(pa) - std::pow(s, 2.5)) < 1e-9 * std::pow(s, 2.5));
        }
    }
}

TEST_CASE("holder probe") {
    const std::vector<double> eps{1e-2, std::pow(10.0, -2.5), 1e-3, std::pow(10.0, -3.5)};
    SUBCASE("three-zero symmetric collision: slope 5/2") {
        ClusterFamily f;
        for (int j = 0; j < 3; ++j) f.pts.push_back({std::polar(1.0, 2 * kPi * j / 3), 1, false, true});
        f.pts.push_back({{1.0, 1.0}, 1, false, false});
        f.pts.push_back({{-1.5, 0.5}, -1, true, false});
        const HolderReport r = holder_exponent_probe(f, eps);
        CHECK(r.k == 3);
        CHECK(r.expected == doctest::Approx(2.5));
        CHECK(std::abs(r.slope - 2.5) < 0.05 * 2.5);
    }
    SUBCASE("single moving zero: slope 1") {
        ClusterFamily f;
        f.center = {0.3, 0.1};
        f.pts.push_back({{1.0, 0.5}, 1, false, true});
        f.pts.push_back({{1.0, 1.0}, 1, false, false});
        f.pts.push_back({{-1.0, 0.2}, 1, false, false});
        const HolderReport r = holder_exponent_probe(f, eps);
        CHECK(r.expected == 1.0);
        CHECK(std::abs(r.slope - 1.0) < 0.05);
    }
    SUBCASE("errors") {
        ClusterFamily f;
        f.pts.push_back({1.0, 1, false, true});
        f.pts.push_back({-1.0, 1, false, true});
        f.pts.push_back({2.0, 1, false, false});
        CHECK_THROWS_WITH(holder_exponent_probe(f, {1e-2, 1e-3, 1e-4}), "holder probe needs at least 4 eps values");
        CHECK_THROWS_WITH(holder_exponent_probe(f, {1e-2, 1e-3, 1e-2, 1e-4}),
                          "d_Sym is not monotone over the eps schedule");
        f.pts[1].order = -1;
        f.pts[1].marked = true;
        CHECK_THROWS_WITH(holder_exponent_probe(f, {1e-2, 1e-3, 1e-4, 1e-5}),
                          "colliding set contains a pole (lift with double_cover_pullback first)");
    }
}
