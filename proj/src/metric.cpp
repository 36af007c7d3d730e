#include "qdflat/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <limits>
#include <queue>
#include <unordered_map>

#include "qdflat/fit.hpp"
#include "qdflat/kernels.hpp"
#include "qdflat/periods.hpp"
#include "qdflat/quadrature.hpp"

namespace qdf {

namespace {

constexpr int kStencil[16][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1},  {-1, 1}, {-1, -1}, {1, -1},
                                 {2, 1}, {1, 2}, {-1, 2}, {-2, 1}, {-2, -1}, {-1, -2}, {1, -2}, {2, -1}};

struct SingIndex {
    std::vector<cplx> z;
    std::vector<int> e;
};

SingIndex nonzero_sing(const RationalQD& q) {
    SingIndex s;
    for (const auto& r : q.sing)
        if (r.order != 0) {
            s.z.push_back(r.z);
            s.e.push_back(r.order);
        }
    return s;
}

int singular_index(const RationalQD& q, cplx p) {
    for (std::size_t j = 0; j < q.size(); ++j)
        if (q.sing[j].order != 0 && std::abs(q.sing[j].z - p) <= 1e-14 * std::max(1.0, std::abs(p)))
            return static_cast<int>(j);
    return -1;
}

double dist_to_polyline(cplx p, const std::vector<cplx>& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
        const cplx a = poly[i], h = poly[i + 1] - a;
        const double L2 = std::norm(h);
        double t = L2 > 0 ? ((p - a) * std::conj(h)).real() / L2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        best = std::min(best, std::abs(p - (a + t * h)));
    }
    if (poly.size() == 1) best = std::abs(p - poly[0]);
    return best;
}

// Winding number of a closed polyline around p.
int winding(const std::vector<cplx>& loop, cplx p) {
    double total = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const cplx a = loop[i] - p, b = loop[(i + 1) % loop.size()] - p;
        if (a == cplx{} || b == cplx{}) return 1;  // on the loop: treat as enclosed
        total += std::arg(b / a);
    }
    return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

bool point_in_triangle(cplx p, cplx a, cplx b, cplx c) {
    auto cross = [](cplx u, cplx v) { return u.real() * v.imag() - u.imag() * v.real(); };
    const double d1 = cross(b - a, p - a), d2 = cross(c - b, p - b), d3 = cross(a - c, p - c);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

class Graph {
public:
    std::vector<cplx> nodes;
    std::vector<bool> special, boundary;
    std::vector<std::vector<std::pair<int, double>>> adj;
    int add(cplx z, bool sp, bool bd) {
        nodes.push_back(z);
        special.push_back(sp);
        boundary.push_back(bd);
        adj.emplace_back();
        return static_cast<int>(nodes.size()) - 1;
    }
    void connect(int a, int b, double w) {
        adj[a].push_back({b, w});
        adj[b].push_back({a, w});
    }
};

// Grid over a region given by a predicate, spacing h, plus special nodes.
Graph build_graph(const RationalQD& q, cplx lo, cplx hi, double h, const std::vector<cplx>& specials,
                  const std::function<bool(cplx)>& keep, bool markRim) {
    Graph g;
    const int nx = std::max(1, static_cast<int>(std::ceil((hi.real() - lo.real()) / h)));
    const int ny = std::max(1, static_cast<int>(std::ceil((hi.imag() - lo.imag()) / h)));
    std::vector<int> id(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
    std::vector<cplx> singz;
    for (const auto& s : q.sing) singz.push_back(s.z);
    // edges may not run through a singularity other than their ends
    auto through = [&](cplx a, cplx b) {
        for (const auto& s : q.sing)
            if (s.order != 0 && s.z != a && s.z != b && dist_to_polyline(s.z, {a, b}) <= 1e-12 * std::abs(b - a))
                return true;
        return false;
    };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const cplx z = lo + cplx(i * h, j * h);
            if (!keep(z)) continue;
            bool tooClose = false;
            for (const cplx& s : singz)
                if (std::abs(z - s) < 1e-9 * h) tooClose = true;
            for (const cplx& s : specials)
                if (std::abs(z - s) < 1e-9 * h) tooClose = true;
            if (tooClose) continue;
            const bool rim = markRim && (i == 0 || j == 0 || i == nx || j == ny);
            id[static_cast<std::size_t>(j) * (nx + 1) + i] = g.add(z, false, rim);
        }
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const int a = id[static_cast<std::size_t>(j) * (nx + 1) + i];
            if (a < 0) continue;
            for (const auto& o : kStencil) {
                // each undirected edge once
                if (o[1] < 0 || (o[1] == 0 && o[0] < 0)) continue;
                const int i2 = i + o[0], j2 = j + o[1];
                if (i2 < 0 || j2 < 0 || i2 > nx || j2 > ny) continue;
                const int b = id[static_cast<std::size_t>(j2) * (nx + 1) + i2];
                if (b < 0 || through(g.nodes[a], g.nodes[b])) continue;
                g.connect(a, b, segment_flat_length(q, g.nodes[a], g.nodes[b], 6));
            }
        }
    const int firstSpecial = static_cast<int>(g.nodes.size());
    for (const cplx& s : specials) g.add(s, true, false);
    const double reach = 2.5 * h;
    for (int s = firstSpecial; s < static_cast<int>(g.nodes.size()); ++s) {
        const cplx z = g.nodes[s];
        const int ci = static_cast<int>(std::floor((z.real() - lo.real()) / h));
        const int cj = static_cast<int>(std::floor((z.imag() - lo.imag()) / h));
        for (int j = cj - 3; j <= cj + 3; ++j)
            for (int i = ci - 3; i <= ci + 3; ++i) {
                if (i < 0 || j < 0 || i > nx || j > ny) continue;
                const int b = id[static_cast<std::size_t>(j) * (nx + 1) + i];
                if (b < 0 || std::abs(g.nodes[b] - z) > reach || through(z, g.nodes[b])) continue;
                g.connect(s, b, segment_flat_length(q, z, g.nodes[b], 8));
            }
        for (int t = firstSpecial; t < s; ++t)
            if (std::abs(g.nodes[t] - z) <= reach && !through(z, g.nodes[t])) g.connect(s, t, segment_flat_length(q, z, g.nodes[t], 8));
    }
    return g;
}

MeshPath dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj, int src, int dst) {
    const std::size_t n = adj.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> prev(n, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.push({0.0, src});
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        if (u == dst) break;
        for (const auto& [v, w] : adj[u]) {
            const double nd = d + w;
            if (nd < dist[v]) {
                dist[v] = nd;
                prev[v] = u;
                pq.push({nd, v});
            }
        }
    }
    MeshPath p;
    p.length = dist[dst];
    if (!std::isfinite(p.length)) return p;
    for (int v = dst; v >= 0; v = prev[v]) p.nodes.push_back(v);
    std::reverse(p.nodes.begin(), p.nodes.end());
    return p;
}

double polyline_length(const RationalQD& q, const std::vector<cplx>& path) {
    double L = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (path[i] == path[i + 1]) continue;
        const Contour c = make_contour(q, {path[i], path[i + 1]});
        L += flat_length(q, c, 1e-13 * std::max(1e-300, std::abs(path[i + 1] - path[i])));
    }
    return L;
}

// Fixed-rule period of a short segment, continuing each factor from p.
// Empty when a singularity other than r sits near the segment.
std::optional<cplx> short_period(const RationalQD& q, cplx p, cplx r) {
    const double L = std::abs(r - p);
    int atEnd = -1;
    double clear = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < q.sing.size(); ++j) {
        if (q.sing[j].order == 0) continue;
        if (q.sing[j].z == r) {
            atEnd = static_cast<int>(j);
            continue;
        }
        clear = std::min(clear, dist_to_polyline(q.sing[j].z, {p, r}));
    }
    if (clear < 0.25 * L) return std::nullopt;
    // Bernstein-ellipse bound: 8 nodes reach ~1e-15 once the clearance is 2L
    static thread_local std::vector<double> x8, w8, x20, w20;
    if (x8.empty()) {
        quad::gauss_legendre01(8, x8, w8);
        quad::gauss_legendre01(20, x20, w20);
    }
    const bool few = clear >= 2.0 * L;
    const std::vector<double>& x = few ? x8 : x20;
    const std::vector<double>& w = few ? w8 : w20;
    const cplx d = r - p;
    cplx sum{};
    for (std::size_t k = 0; k < x.size(); ++k) {
        // t = 1 - u^2 when r is singular, so (1 - t)^{e/2} becomes u^e
        const double u = x[k];
        const double t = atEnd >= 0 ? 1.0 - u * u : u;
        cplx f = 1.0;
        for (std::size_t j = 0; j < q.sing.size(); ++j) {
            const int e = q.sing[j].order;
            if (e == 0) continue;
            if (static_cast<int>(j) == atEnd)
                f *= ipow(cplx(u), e);
            else
                f *= ipow(psqrt(1.0 + t * d / (p - q.sing[j].z)), e);
        }
        sum += w[k] * f * (atEnd >= 0 ? 2.0 * u : 1.0);
    }
    cplx base = psqrt(q.scale);
    for (const auto& s : q.sing)
        if (s.order != 0 && s.z != r) base *= ipow(psqrt(p - s.z), s.order);
    if (atEnd >= 0) base *= ipow(psqrt(-d), q.sing[atEnd].order);
    return base * sum * d;
}

// Period from p to r with the conventional branch at p.
cplx local_period(const RationalQD& q, cplx p, cplx r) {
    if (auto v = short_period(q, p, r)) return *v;
    return period(q, make_contour(q, {p, r}), 1e-14);
}

cplx sqrt_at(const RationalQD& q, cplx p) {
    cplx v = psqrt(q.scale);
    for (const auto& s : q.sing) v *= ipow(psqrt(p - s.z), s.order);
    return v;
}

// Index of a zero inside the swept triangle, -1 if none.
int sweep_blocked(const SingIndex& S, cplx a, cplx oldp, cplx newp) {
    // Paths may swing across poles: a cone angle below 2pi never supports a geodesic.
    for (std::size_t j = 0; j < S.z.size(); ++j)
        if (S.e[j] > 0 && S.z[j] != a && point_in_triangle(S.z[j], a, oldp, newp)) return static_cast<int>(j);
    return -1;
}

// Straighten a path in developed coordinates; vertices at zeros stay pinned.
// blockedBy[i]: zero that stopped vertex i in its last attempted move, -1 otherwise.
std::vector<cplx> relax_path(const RationalQD& q, std::vector<cplx> path, std::vector<bool>& pinned, int sweeps,
                             double moveTol, std::vector<int>* blockedBy = nullptr) {
    const SingIndex S = nonzero_sing(q);
    double scale = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) scale += std::abs(path[i + 1] - path[i]);
    // coincident neighbours and out-and-back spikes
    auto tidy = [&] {
        bool changed = false;
        for (std::size_t i = 1; i + 1 < path.size();) {
            if (!pinned[i] && std::abs(path[i] - path[i - 1]) <= 1e-13 * scale) {
                path.erase(path.begin() + i);
                pinned.erase(pinned.begin() + i);
                changed = true;
            } else if (!pinned[i] && i + 2 < path.size() && !pinned[i + 1] &&
                       std::abs(path[i + 1] - path[i - 1]) <= 1e-13 * scale) {
                path.erase(path.begin() + i, path.begin() + i + 2);
                pinned.erase(pinned.begin() + i, pinned.begin() + i + 2);
                changed = true;
            } else {
                ++i;
            }
        }
        return changed;
    };
    for (int it = 0; it < sweeps; ++it) {
        tidy();
        if (blockedBy) blockedBy->assign(path.size(), -1);
        double maxMove = 0.0;
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            if (pinned[i]) continue;
            const cplx p = path[i];
            double local = std::min(std::abs(path[i - 1] - p), std::abs(path[i + 1] - p));
            for (std::size_t j = 0; j < S.z.size(); ++j)
                if (S.e[j] > 0) local = std::min(local, std::abs(p - S.z[j]));
            if (local <= 0.0) continue;
            cplx A, B;
            try {
                A = local_period(q, p, path[i - 1]);
                B = local_period(q, p, path[i + 1]);
            } catch (const Error&) {
                continue;
            }
            const cplx d = B - A;
            double t = std::norm(d) > 0 ? -(A * std::conj(d)).real() / std::norm(d) : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const cplx target = A + t * d;
            cplx dz = target / sqrt_at(q, p);
            const double cap = 0.25 * local;
            if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
            const cplx np = p + dz;
            int blk = sweep_blocked(S, path[i - 1], p, np);
            if (blk < 0) blk = sweep_blocked(S, path[i + 1], p, np);
            if (blockedBy) (*blockedBy)[i] = blk;
            if (blk >= 0) continue;
            path[i] = np;
            maxMove = std::max(maxMove, std::abs(dz));
        }
        if (maxMove < moveTol) break;
    }
    return path;
}

// Douglas-Peucker style simplification that keeps the homotopy class.
void simplify_rec(const std::vector<cplx>& path, std::size_t i, std::size_t j, const SingIndex& S,
                  std::vector<std::size_t>& keep) {
    if (j <= i + 1) return;
    std::vector<cplx> loop(path.begin() + i, path.begin() + j + 1);
    bool ok = true;
    for (const cplx& s : S.z) {
        bool isVertex = false;
        for (std::size_t k = i; k <= j; ++k)
            if (path[k] == s) isVertex = true;
        if (isVertex) continue;
        if (winding(loop, s) != 0 || dist_to_polyline(s, {path[i], path[j]}) == 0.0) {
            ok = false;
            break;
        }
    }
    if (ok) return;
    const std::size_t mid = (i + j) / 2;
    keep.push_back(mid);
    simplify_rec(path, i, mid, S, keep);
    simplify_rec(path, mid, j, S, keep);
}

}  // namespace

bool Window::contains(cplx z) const {
    return std::abs(z.real() - center.real()) <= half && std::abs(z.imag() - center.imag()) <= half;
}

double segment_flat_length(const RationalQD& q, cplx a, cplx b, int gl) {
    const cplx h = b - a;
    const double L = std::abs(h);
    if (L == 0.0) return 0.0;
    std::vector<double> x, w;
    quad::gauss_legendre01(gl, x, w);
    const int ia = singular_index(q, a), ib = singular_index(q, b);
    kernels::FactorSet fa, fb;
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (q.sing[j].order == 0) continue;
        const cplx ca = int(j) == ia ? cplx{} : a - q.sing[j].z;
        const cplx cb = int(j) == ib ? cplx{} : b - q.sing[j].z;
        fa.push(ca.real(), ca.imag(), 1, 0, q.sing[j].order);
        fb.push(cb.real(), cb.imag(), 1, 0, q.sing[j].order);
    }
    double dr[64], di[64], out[64];
    const int n = static_cast<int>(x.size());
    auto run = [&](const kernels::FactorSet& f, double sgn, bool sub, double lo, double hi) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            const double v = lo + (hi - lo) * x[k];
            const double t = sub ? v * v : v;
            const cplx d = sgn * t * h;
            dr[k] = d.real();
            di[k] = d.imag();
        }
        kernels::abs_product(f, dr, di, n, out);
        for (int k = 0; k < n; ++k) {
            const double v = lo + (hi - lo) * x[k];
            s += w[k] * out[k] * (sub ? 2.0 * v : 1.0) * (hi - lo);
        }
        return s;
    };
    double total;
    if (ia >= 0 && ib >= 0)
        total = run(fa, 1.0, true, 0.0, std::sqrt(0.5)) + run(fb, -1.0, true, 0.0, std::sqrt(0.5));
    else if (ia >= 0)
        total = run(fa, 1.0, true, 0.0, 1.0);
    else if (ib >= 0)
        total = run(fb, -1.0, true, 0.0, 1.0);
    else
        total = run(fa, 1.0, false, 0.0, 1.0);
    return total * std::sqrt(std::abs(q.scale)) * L;
}

MetricMesh build_mesh(const RationalQD& q, const Window& w, int n, const std::vector<cplx>& extra) {
    std::vector<cplx> specials = extra;
    for (const auto& s : q.sing)
        if (w.contains(s.z)) specials.push_back(s.z);
    const cplx lo = w.center - cplx(w.half, w.half), hi = w.center + cplx(w.half, w.half);
    const double h = 2.0 * w.half / n;
    Graph g = build_graph(q, lo, hi, h, specials, [](cplx) { return true; }, true);
    MetricMesh m;
    m.window = w;
    m.nodes = g.nodes;
    m.special = g.special;
    m.onBoundary = g.boundary;
    m.spacing = h;
    m.offsets.push_back(0);
    for (const auto& row : g.adj) {
        for (const auto& [t, wt] : row) {
            m.targets.push_back(t);
            m.weights.push_back(wt);
        }
        m.offsets.push_back(static_cast<int>(m.targets.size()));
    }
    return m;
}

MeshPath shortest_path(const MetricMesh& mesh, int src, int dst) {
    std::vector<std::vector<std::pair<int, double>>> adj(mesh.nodes.size());
    for (std::size_t u = 0; u < mesh.nodes.size(); ++u)
        for (int k = mesh.offsets[u]; k < mesh.offsets[u + 1]; ++k) adj[u].push_back({mesh.targets[k], mesh.weights[k]});
    return dijkstra(adj, src, dst);
}

// Split segments that are long against their clearance from zeros, so the local
// developed picture used by relax_path stays faithful.
void refine_clearance(const SingIndex& S, std::vector<cplx>& path, std::vector<bool>& pins, double floorLen) {
    for (int pass = 0; pass < 40; ++pass) {
        std::vector<cplx> np{path[0]};
        std::vector<bool> npin{pins[0]};
        bool changed = false;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            const cplx a = path[i], b = path[i + 1];
            double clear = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < S.z.size(); ++j)
                if (S.e[j] > 0 && S.z[j] != a && S.z[j] != b) clear = std::min(clear, dist_to_polyline(S.z[j], {a, b}));
            const double L = std::abs(b - a);
            if (L > 0.5 * clear && L > floorLen) {
                np.push_back(0.5 * (a + b));
                npin.push_back(false);
                changed = true;
            }
            np.push_back(b);
            npin.push_back(pins[i + 1]);
        }
        path.swap(np);
        pins.swap(npin);
        if (!changed || path.size() > 4096) break;
    }
}

DistanceResult flat_distance(const RationalQD& q, cplx a, cplx b, double tol) {
    if (!(tol > 0.0)) throw Error("tolerance must be positive");
    DistanceResult res;
    if (a == b) {
        res.path = {a};
        res.levels = {0.0};
        return res;
    }
    const double sep = std::abs(b - a);
    Window w{0.5 * (a + b), sep};
    const int N = 32;
    Graph g;
    MeshPath mp;
    int enlarge = 0;
    for (;;) {
        std::vector<cplx> specials{a, b};
        for (const auto& s : q.sing)
            if (w.contains(s.z) && s.z != a && s.z != b) specials.push_back(s.z);
        const cplx lo = w.center - cplx(w.half, w.half), hi = w.center + cplx(w.half, w.half);
        g = build_graph(q, lo, hi, 2.0 * w.half / N, specials, [](cplx) { return true; }, true);
        const int ia = static_cast<int>(g.nodes.size() - specials.size());
        mp = dijkstra(g.adj, ia, ia + 1);
        if (!std::isfinite(mp.length)) throw Error("flat_distance: mesh disconnected");
        bool touches = false;
        for (int v : mp.nodes)
            if (g.boundary[v]) touches = true;
        if (!touches) break;
        if (++enlarge > 3) throw Error("flat_distance: window too small (path touches boundary after 3 enlargements)");
        w.half *= 2.0;
    }
    res.windowEnlargements = enlarge;
    double best = mp.length;
    res.levels.push_back(best);
    std::vector<cplx> path;
    for (int v : mp.nodes) path.push_back(g.nodes[v]);
    std::vector<cplx> bestPath = path;
    double h = 2.0 * w.half / N;
    for (int level = 1; level <= 2; ++level) {
        const double r = 6.0 * h;
        h *= 0.5;
        cplx lo = path[0], hi = path[0];
        for (const cplx& p : path) {
            lo = {std::min(lo.real(), p.real()), std::min(lo.imag(), p.imag())};
            hi = {std::max(hi.real(), p.real()), std::max(hi.imag(), p.imag())};
        }
        lo -= cplx(r, r);
        hi += cplx(r, r);
        std::vector<cplx> specials{a, b};
        for (const auto& s : q.sing)
            if (s.z != a && s.z != b && dist_to_polyline(s.z, path) <= r) specials.push_back(s.z);
        const std::vector<cplx> prevPath = path;
        Graph t = build_graph(q, lo, hi, h, specials, [&](cplx z) { return dist_to_polyline(z, prevPath) <= r; }, false);
        const int ia = static_cast<int>(t.nodes.size() - specials.size());
        const MeshPath tp = dijkstra(t.adj, ia, ia + 1);
        if (std::isfinite(tp.length)) {
            path.clear();
            for (int v : tp.nodes) path.push_back(t.nodes[v]);
            if (tp.length < best) {
                best = tp.length;
                bestPath = path;
            }
        }
        res.levels.push_back(best);
    }
    // Relaxation: simplify keeping the homotopy class, then straighten and subdivide.
    const SingIndex S = nonzero_sing(q);
    std::vector<std::size_t> keep{0, bestPath.size() - 1};
    std::vector<bool> pin(bestPath.size(), false);
    for (std::size_t i = 0; i < bestPath.size(); ++i) {
        const int si = singular_index(q, bestPath[i]);
        if (si >= 0 && q.sing[si].order > 0) {
            keep.push_back(i);
            pin[i] = true;
        }
    }
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    const std::vector<std::size_t> anchors = keep;
    for (std::size_t k = 0; k + 1 < anchors.size(); ++k) {
        const std::size_t i = anchors[k], j = anchors[k + 1];
        keep.push_back((i + j) / 2);
        simplify_rec(bestPath, i, (i + j) / 2, S, keep);
        simplify_rec(bestPath, (i + j) / 2, j, S, keep);
    }
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    std::vector<cplx> rp;
    std::vector<bool> rpin;
    for (std::size_t i : keep) {
        cplx p = bestPath[i];
        const int si = singular_index(q, p);
        if (si >= 0 && q.sing[si].order < 0 && i > 0 && i + 1 < bestPath.size()) {
            // interior path vertex on a pole is never geodesic; nudge it off
            const cplx mid = 0.5 * (bestPath[i - 1] + bestPath[i + 1]);
            p += 1e-3 * (mid - p);
        }
        rp.push_back(p);
        rpin.push_back(i == 0 || i + 1 == bestPath.size() || pin[i]);
    }
    const double moveTol = 1e-7 * sep;
    auto chord_sum = [&](const std::vector<cplx>& path, const std::vector<bool>& pins) {
        double total = 0.0;
        std::size_t s = 0;
        for (std::size_t i = 1; i < path.size(); ++i) {
            if (!pins[i] && i + 1 < path.size()) continue;
            std::vector<cplx> piece(path.begin() + s, path.begin() + i + 1);
            total += std::abs(period(q, make_contour(q, piece), 1e-14 * std::max(1.0, res.levels.front())));
            s = i;
        }
        return total;
    };
    // Pin zeros the path grazes.
    std::vector<bool> rejected(S.z.size(), false);
    auto snap = [&](std::vector<cplx>& path, std::vector<bool>& pins) {
        for (std::size_t j = 0; j < S.z.size(); ++j) {
            if (S.e[j] <= 0) continue;
            if (std::find(path.begin(), path.end(), S.z[j]) != path.end()) continue;
            for (std::size_t i = 0; i + 1 < path.size(); ++i) {
                if (!(dist_to_polyline(S.z[j], {path[i], path[i + 1]}) < 1e-6 * sep)) continue;
                const double dl = std::abs(path[i] - S.z[j]), dr = std::abs(path[i + 1] - S.z[j]);
                if (!pins[i] && i > 0 && dl < 0.25 * dr) {
                    path[i] = S.z[j];
                    pins[i] = true;
                } else if (!pins[i + 1] && i + 2 < path.size() && dr < 0.25 * dl) {
                    path[i + 1] = S.z[j];
                    pins[i + 1] = true;
                } else {
                    path.insert(path.begin() + i + 1, S.z[j]);
                    pins.insert(pins.begin() + i + 1, true);
                }
                return true;
            }
        }
        return false;
    };
    // When straightening stalls, pin a zero that keeps blocking a vertex.
    std::vector<int> blocked;
    auto snap_blocked = [&](std::vector<cplx>& path, std::vector<bool>& pins) {
        int bi = -1;
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            if (pins[i] || blocked[i] < 0 || rejected[blocked[i]]) continue;
            if (bi < 0 || std::abs(path[i] - S.z[blocked[i]]) < std::abs(path[bi] - S.z[blocked[bi]])) bi = static_cast<int>(i);
        }
        if (bi < 0) return false;
        path[bi] = S.z[blocked[bi]];
        pins[bi] = true;
        return true;
    };
    // Release pinned zeros where the path turns by less than the cone allows.
    auto unpin = [&](std::vector<cplx>& path, std::vector<bool>& pins) {
        bool changed = false;
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            if (!pins[i]) continue;
            const int si = singular_index(q, path[i]);
            if (si < 0 || q.sing[si].order <= 0) continue;
            const cplx u = path[i - 1] - path[i], v = path[i + 1] - path[i];
            double th = std::arg(v / u);
            if (th < 0) th += 2.0 * kPi;
            const double cone = 1.0 + 0.5 * q.sing[si].order;
            const double small = std::min(th, 2.0 * kPi - th);
            if (small * cone >= kPi * (1.0 - 1e-6)) continue;
            // pull off towards the bisector of the narrow side
            const double half = th <= kPi ? 0.5 * th : th + 0.5 * (2.0 * kPi - th);
            const cplx dir = (u / std::abs(u)) * std::polar(1.0, half);
            for (std::size_t j = 0; j < S.z.size(); ++j)
                if (S.z[j] == path[i]) rejected[j] = true;
            path[i] += 1e-3 * std::min(std::abs(u), std::abs(v)) * dir;
            pins[i] = false;
            changed = true;
        }
        return changed;
    };
    refine_clearance(S, rp, rpin, 1e-3 * sep);
    rp = relax_path(q, rp, rpin, 2000, moveTol, &blocked);
    while (snap(rp, rpin)) {}
    double len = polyline_length(q, rp);
    best = std::min(best, len);
    res.levels.push_back(best);
    double chord = chord_sum(rp, rpin);
    double gap = len - chord, prevGap = std::numeric_limits<double>::infinity(), prevRatio = 1.0;
    bool reached = gap < tol, stalled = false;
    for (int round = 0; round < 9 && !reached; ++round) {
        std::vector<cplx> np;
        std::vector<bool> npin;
        for (std::size_t i = 0; i < rp.size(); ++i) {
            np.push_back(rp[i]);
            npin.push_back(rpin[i]);
            if (i + 1 < rp.size()) {
                np.push_back(0.5 * (rp[i] + rp[i + 1]));
                npin.push_back(false);
            }
        }
        refine_clearance(S, np, npin, 1e-3 * sep);
        rp = relax_path(q, np, npin, 2000, moveTol, &blocked);
        rpin = npin;
        if (stalled && snap_blocked(rp, rpin)) rp = relax_path(q, rp, rpin, 2000, moveTol);
        if (unpin(rp, rpin)) rp = relax_path(q, rp, rpin, 2000, moveTol);
        while (snap(rp, rpin)) {}
        len = polyline_length(q, rp);
        best = std::min(best, len);
        res.levels.push_back(best);
        chord = chord_sum(rp, rpin);
        prevGap = gap;
        gap = len - chord;
        const double ratio = gap / prevGap;
        if (std::getenv("QDFLAT_DEBUG_METRIC"))
            std::fprintf(stderr, "round %d n=%zu len=%.15f chord=%.15f gap=%.3g\n", round, rp.size(), len, chord, gap);
        // Straightening converges at second order once the chord is realizable.
        if (gap < tol || (round >= 1 && ratio < 0.35 && prevRatio < 0.35 && gap < 1e-3 * chord)) reached = true;
        prevRatio = ratio;
        stalled = ratio > 0.6;
        if (rp.size() > 4096) break;
    }
    if (!reached)
        throw Error("flat_distance: tolerance " + std::to_string(tol) +
                    " unreachable within refinement budget (bracket " + std::to_string(gap) + ")");
    res.distance = std::min(chord, best);
    res.levels.push_back(res.distance);
    res.errorBound = std::max(gap, 0.0);
    res.path = rp;
    return res;
}

DiameterResult singular_diameter(const RationalQD& q, const std::vector<cplx>& S, double tol) {
    if (S.size() < 2) throw Error("singular_diameter: need at least 2 points");
    DiameterResult d;
    for (std::size_t i = 0; i < S.size(); ++i)
        for (std::size_t j = i + 1; j < S.size(); ++j) {
            const DistanceResult r = flat_distance(q, S[i], S[j], tol);
            if (r.distance > d.diameter) {
                d.diameter = r.distance;
                d.errorBound = r.errorBound;
                d.argI = int(i);
                d.argJ = int(j);
            }
        }
    return d;
}

BallScalingReport ball_scaling_probe(const ClusterFamily& family, const std::vector<double>& radii,
                                     double clusterFraction, double tol) {
    if (radii.size() < 4) throw Error("ball_scaling_probe: insufficient radii (< 4)");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!((radii[i] < radii[i - 1]) || (radii[i] > radii[i - 1]))) throw Error("ball_scaling_probe: radii not monotone");
    const bool dec = radii[1] < radii[0];
    for (std::size_t i = 1; i < radii.size(); ++i)
        if ((radii[i] < radii[i - 1]) != dec) throw Error("ball_scaling_probe: radii not monotone");
    BallScalingReport rep;
    rep.m = family.cluster_degree();
    rep.expected = 0.5 * (2 + rep.m);
    std::vector<std::pair<double, double>> pts;
    for (double r : radii) {
        const RationalQD q = family.at(clusterFraction * r);
        const cplx c = family.center;
        // Screen the circle with straight-segment lengths, refine by golden section.
        const int M = 128;
        auto straight = [&](double th) { return segment_flat_length(q, c, c + std::polar(r, th), 16); };
        int bi = 0;
        double bv = std::numeric_limits<double>::infinity();
        for (int k = 0; k < M; ++k) {
            const double v = straight(2 * kPi * k / M);
            if (v < bv) {
                bv = v;
                bi = k;
            }
        }
        double lo = 2 * kPi * (bi - 1) / M, hi = 2 * kPi * (bi + 1) / M;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = straight(x1), f2 = straight(x2);
        for (int it = 0; it < 40; ++it) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = straight(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = straight(x2);
            }
        }
        const double th = 0.5 * (lo + hi);
        double d = flat_distance(q, c, c + std::polar(r, th), tol * std::pow(r, rep.expected)).distance;
        d = std::min(d, bv);
        BallRow row{r, d, 0.0};
        pts.push_back({r, d});
        if (pts.size() >= 2) row.slopeRunning = fit_power_law(pts, 2).slope;
        rep.rows.push_back(row);
    }
    const PowerFit f = fit_power_law(pts, 4);
    rep.slope = f.slope;
    rep.slopeCI = f.slopeCI;
    rep.prefactor = std::exp(f.intercept);
    // f(0)/g(0): the non-cluster part evaluated at the centre.
    cplx fg = family.scale;
    for (const auto& p : family.pts)
        if (!p.cluster) fg *= ipow(family.center - p.z, p.order);
    rep.prefactorRatio = rep.prefactor / std::sqrt(std::abs(fg));
    return rep;
}

}  // namespace qdf
