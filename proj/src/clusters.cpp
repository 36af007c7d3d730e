#include "qdflat/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "qdflat/assignment.hpp"
#include "qdflat/fit.hpp"
#include "qdflat/metric.hpp"
#include "qdflat/periods.hpp"

namespace qdf {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
};

bool qualifies(const std::vector<double>& dist, int n, const std::vector<int>& D, double delta) {
    std::vector<bool> in(n, false);
    for (int i : D) in[i] = true;
    double diam = 0.0, gap = std::numeric_limits<double>::infinity();
    for (int i : D)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (in[j])
                diam = std::max(diam, dist[i * n + j]);
            else
                gap = std::min(gap, dist[i * n + j]);
        }
    return diam <= delta * gap;
}

}  // namespace

std::vector<std::vector<int>> delta_clusters(const std::vector<double>& dist, int n, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0, 1)");
    if (dist.size() != static_cast<std::size_t>(n) * n) throw Error("distance matrix size mismatch");
    // Any delta-cluster is a component of a threshold graph, hence a single-linkage merge.
    std::vector<std::tuple<double, int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.emplace_back(dist[i * n + j], i, j);
    std::sort(edges.begin(), edges.end());
    UnionFind uf(n);
    std::vector<std::vector<int>> comp(n);
    for (int i = 0; i < n; ++i) comp[i] = {i};
    std::vector<std::vector<int>> found;
    for (const auto& [d, i, j] : edges) {
        const int a = uf.find(i), b = uf.find(j);
        if (a == b) continue;
        uf.parent[b] = a;
        comp[a].insert(comp[a].end(), comp[b].begin(), comp[b].end());
        comp[b].clear();
        std::sort(comp[a].begin(), comp[a].end());
        if (static_cast<int>(comp[a].size()) < n && qualifies(dist, n, comp[a], delta)) found.push_back(comp[a]);
    }
    std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.size() > y.size(); });
    std::vector<std::vector<int>> maximal;
    for (const auto& D : found) {
        bool inside = false;
        for (const auto& M : maximal)
            if (std::includes(M.begin(), M.end(), D.begin(), D.end())) inside = true;
        if (!inside) maximal.push_back(D);
    }
    std::sort(maximal.begin(), maximal.end());
    return maximal;
}

std::vector<std::vector<int>> delta_clusters(const std::vector<cplx>& pts, double delta) {
    const int n = static_cast<int>(pts.size());
    std::vector<double> dist(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dist[i * n + j] = std::abs(pts[i] - pts[j]);
    return delta_clusters(dist, n, delta);
}

std::vector<double> singularity_distances(const RationalQD& q, ClusterMetric metric, double tol) {
    const int n = static_cast<int>(q.size());
    std::vector<double> dist(n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = metric == ClusterMetric::Complex
                                 ? std::abs(q.sing[i].z - q.sing[j].z)
                                 : flat_distance(q, q.sing[i].z, q.sing[j].z, tol * segment_flat_length(q, q.sing[i].z, q.sing[j].z, 32)).distance;
            dist[i * n + j] = dist[j * n + i] = d;
        }
    return dist;
}

std::vector<std::vector<int>> delta_clusters(const RationalQD& q, double delta, ClusterMetric metric) {
    return delta_clusters(singularity_distances(q, metric), static_cast<int>(q.size()), delta);
}

ClusterTree cluster_tree(const RationalQD& q, double delta, ClusterMetric metric, bool annotateFlat) {
    const ValidityReport v = validate(q);
    if (!v.ok) throw Error("invalid differential: " + v.issues.front());
    const int n = static_cast<int>(q.size());
    const std::vector<double> dist = singularity_distances(q, metric);
    ClusterTree tree;
    tree.delta = delta;
    tree.metric = metric;
    ClusterNode root;
    root.members.resize(n);
    std::iota(root.members.begin(), root.members.end(), 0);
    tree.nodes.push_back(root);
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        const std::vector<int> mem = tree.nodes[k].members;
        const int s = static_cast<int>(mem.size());
        if (s < 3) continue;
        std::vector<double> sub(s * s);
        for (int a = 0; a < s; ++a)
            for (int b = 0; b < s; ++b) sub[a * s + b] = dist[mem[a] * n + mem[b]];
        for (const auto& D : delta_clusters(sub, s, delta)) {
            ClusterNode child;
            for (int a : D) child.members.push_back(mem[a]);
            child.parent = static_cast<int>(k);
            tree.nodes[k].children.push_back(static_cast<int>(tree.nodes.size()));
            tree.nodes.push_back(child);
        }
    }
    for (auto& node : tree.nodes) {
        std::vector<cplx> locs;
        for (int i : node.members) {
            node.totalOrder += q.sing[i].order;
            if (q.sing[i].marked) ++node.markedCount;
            locs.push_back(q.sing[i].z);
            for (int j : node.members) node.diamC = std::max(node.diamC, std::abs(q.sing[i].z - q.sing[j].z));
        }
        if (metric == ClusterMetric::Flat) {
            for (int i : node.members)
                for (int j : node.members) node.diamQ = std::max(node.diamQ, dist[i * n + j]);
        } else if (annotateFlat && locs.size() >= 2) {
            node.diamQ = singular_diameter(q, locs).diameter;
        }
    }
    return tree;
}

cplx cluster_center(const std::vector<std::pair<cplx, int>>& cluster) {
    cplx num{};
    int den = 0;
    for (const auto& [z, e] : cluster) {
        num += double(e) * z;
        den += e;
    }
    if (den <= 0) throw Error("cluster center undefined: total order " + std::to_string(den) + " is not positive");
    return num / double(den);
}

cplx cluster_center(const RationalQD& q, const std::vector<int>& members) {
    std::vector<std::pair<cplx, int>> c;
    for (int i : members) c.push_back({q.sing.at(i).z, q.sing.at(i).order});
    return cluster_center(c);
}

double d_sym(const RationalQD& q1, const RationalQD& q2) {
    if (q1.infinityMarked != q2.infinityMarked && q1.infinity_order() == 0)
        throw Error("strata mismatch: marking at infinity differs");
    std::map<std::pair<int, bool>, std::pair<std::vector<cplx>, std::vector<cplx>>> classes;
    for (const auto& r : q1.sing) classes[{r.order, r.marked}].first.push_back(r.z);
    for (const auto& r : q2.sing) classes[{r.order, r.marked}].second.push_back(r.z);
    double total = std::abs(q1.scale - q2.scale);
    for (const auto& [key, sets] : classes) {
        const auto& [A, B] = sets;
        if (A.size() != B.size())
            throw Error("strata mismatch: " + std::to_string(A.size()) + " vs " + std::to_string(B.size()) +
                        " singularities of order " + std::to_string(key.first) + (key.second ? " (marked)" : ""));
        const int n = static_cast<int>(A.size());
        std::vector<double> cost(n * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) cost[i * n + j] = std::abs(A[i] - B[j]);
        total += solve_assignment(cost, n).cost;
    }
    return total;
}

ClusterProjection project_to_cluster_differential(const RationalQD& q, const std::vector<int>& members,
                                                  std::optional<cplx> rootHint) {
    if (members.empty()) throw Error("empty cluster");
    std::vector<bool> in(q.size(), false);
    for (int i : members) {
        if (i < 0 || i >= static_cast<int>(q.size())) throw Error("cluster index out of range");
        if (q.sing[i].order < 0) throw Error("cluster contains a pole");
        in[i] = true;
    }
    ClusterProjection P;
    P.center = cluster_center(q, members);
    P.t = q.scale;
    for (std::size_t j = 0; j < q.size(); ++j)
        if (!in[j]) P.t *= ipow(P.center - q.sing[j].z, q.sing[j].order);
    if (std::abs(P.t) == 0.0 || !std::isfinite(std::abs(P.t)))
        throw Error("degenerate outside configuration (t = 0)");
    for (int i : members) P.m += q.sing[i].order;
    const int r = P.m + 2;
    const double mod = std::pow(std::abs(P.t), 1.0 / r), arg = std::arg(P.t) / r;
    P.root = std::polar(mod, arg);
    if (rootHint) {
        double best = std::abs(P.root - *rootHint);
        for (int k = 1; k < r; ++k) {
            const cplx c = std::polar(mod, arg + 2.0 * kPi * k / r);
            if (std::abs(c - *rootHint) < best) best = std::abs(c - *rootHint), P.root = c;
        }
    }
    for (int i : members) {
        if (q.sing[i].order == 0) continue;  // regular marked points do not enter alpha
        P.alpha.roots.push_back({P.root * (q.sing[i].z - P.center), q.sing[i].order});
        P.members.push_back(i);
    }
    return P;
}

double projection_defect(const RationalQD& q, const ClusterProjection& proj, double tol) {
    const RationalQD a = proj.alpha.to_rational();
    if (a.size() < 2) throw Error("projection defect needs at least two cluster singularities");
    const PeriodChart chart = spanning_tree_chart(a, 0.0, tol);
    double dPlus = 0.0, dMinus = 0.0;
    for (std::size_t k = 0; k < chart.contours.size(); ++k) {
        const Contour& ga = chart.contours[k];
        std::vector<cplx> zs;
        for (const cplx& w : ga.vertices) zs.push_back(proj.center + w / proj.root);
        zs.front() = q.sing[proj.members[chart.edges[k].first]].z;
        zs.back() = q.sing[proj.members[chart.edges[k].second]].z;
        const Contour gq = make_contour(q, zs);
        const cplx Pq = period(q, gq, tol);
        const cplx Pa = period(a, ga, tol);
        // align the two conventional branches: sqrt(q) dz against sqrt(alpha) dw
        const cplx ratio = conventional_root(q, gq, 0.5) / (conventional_root(a, ga, 0.5) * proj.root);
        const double s = ratio.real() >= 0.0 ? 1.0 : -1.0;
        dPlus = std::max(dPlus, std::abs(Pq - s * Pa));
        dMinus = std::max(dMinus, std::abs(Pq + s * Pa));
    }
    return std::min(dPlus, dMinus);
}

HolderReport holder_exponent_probe(const ClusterFamily& family, const std::vector<double>& eps, double tol) {
    if (eps.size() < 4) throw Error("holder probe needs at least 4 eps values");
    const std::vector<int> S = family.colliding();
    if (S.empty()) throw Error("family has no colliding points");
    for (int j : S)
        if (family.pts[j].order < 0) throw Error("colliding set contains a pole (lift with double_cover_pullback first)");
    HolderReport rep;
    rep.k = family.cluster_degree();
    rep.expected = S.size() >= 2 ? 0.5 * (2 + rep.k) : 1.0;
    std::vector<std::pair<double, double>> pairs;
    for (double e : eps) {
        if (!(e > 0.0)) throw Error("eps values must be positive");
        const RationalQD q1 = family.at(e), q2 = family.at(family.compareFactor * e);
        for (const RationalQD* q : {&q1, &q2}) {
            const ValidityReport v = validate(*q);
            if (!v.ok) throw Error("family leaves the stratum at eps = " + std::to_string(e) + ": " + v.issues.front());
        }
        const PeriodChart chart = spanning_tree_chart(q1, 0.0, tol);
        HolderRow row;
        row.eps = e;
        row.dSym = d_sym(q1, q2);
        row.dPeriods = d_euclidean_chart(q1, q2, chart, tol);
        rep.rows.push_back(row);
        pairs.push_back({row.dSym, row.dPeriods});
    }
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        inc = inc && rep.rows[i].dSym > rep.rows[i - 1].dSym;
        dec = dec && rep.rows[i].dSym < rep.rows[i - 1].dSym;
    }
    if (!inc && !dec) throw Error("d_Sym is not monotone over the eps schedule");
    const PowerFit f = fit_power_law(pairs);
    rep.slope = f.slope;
    rep.slopeCI = f.slopeCI;
    rep.residuals = f.residuals;
    return rep;
}

}  // namespace qdf
