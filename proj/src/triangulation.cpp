#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include <Eigen/Dense>

#include "qdflat/surfaces.hpp"

namespace qdf {

namespace {

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }
double orient(cplx a, cplx b, cplx c) { return cross(b - a, c - a); }

// Developed-coordinate change z_other = sigma z + c.
struct Chart {
    int sigma = 1;
    cplx c{};
    cplx apply(cplx z) const { return static_cast<double>(sigma) * z + c; }
    Chart then(const Chart& g) const { return {sigma * g.sigma, static_cast<double>(g.sigma) * c + g.c}; }  // g after this
    Chart inverse() const { return {sigma, -static_cast<double>(sigma) * c}; }
};

// Chart taking slot k's face coordinates to the other slot's face coordinates.
Chart across(const Triangulation& t, int e, int k) {
    const auto& E = t.edges[e];
    const Face& f0 = t.faces[E.face[k]];
    const Face& f1 = t.faces[E.face[1 - k]];
    const int s0 = E.side[k], s1 = E.side[1 - k];
    const cplx a = f0.p[s0], b = f0.p[(s0 + 1) % 3];
    const cplx a1 = f1.p[s1], b1 = f1.p[(s1 + 1) % 3];
    const cplx w0 = b - a, w1 = b1 - a1;
    const int sigma = std::abs(w1 + w0) <= std::abs(w1 - w0) ? 1 : -1;
    return {sigma, b1 - static_cast<double>(sigma) * a};
}

int slot_of(const Triangulation& t, int e, int face, int side) {
    const auto& E = t.edges[e];
    for (int k = 0; k < 2; ++k)
        if (E.face[k] == face && E.side[k] == side) return k;
    throw Error("triangulation corrupt: edge " + std::to_string(e) + " does not reference its face");
}

struct Quad {
    cplx a, b, c, d;
    bool selfAdjacent = false;
};

// Edge e seen from slot 0: a->b is the edge, c opposite in that face, d the far apex.
Quad quad_of(const Triangulation& t, int e) {
    const auto& E = t.edges[e];
    const Face& f0 = t.faces[E.face[0]];
    const Face& f1 = t.faces[E.face[1]];
    const int s0 = E.side[0], s1 = E.side[1];
    Quad q;
    q.a = f0.p[s0];
    q.b = f0.p[(s0 + 1) % 3];
    q.c = f0.p[(s0 + 2) % 3];
    q.d = across(t, e, 0).inverse().apply(f1.p[(s1 + 2) % 3]);
    q.selfAdjacent = E.face[0] == E.face[1];
    return q;
}

void set_slope_flags(Triangulation& t) {
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const cplx v = t.edge_vector(static_cast<int>(e));
        const double L = std::abs(v), tol = 1e-12 * L;
        if (std::abs(v.real()) <= tol || std::abs(v.imag()) <= tol)
            t.edges[e].slopeSign = 0;
        else
            t.edges[e].slopeSign = v.real() * v.imag() > 0 ? 1 : -1;
    }
}

void flip(Triangulation& t, int e) {
    const auto old = t.edges;
    const auto& E = old[e];
    const int f0 = E.face[0], f1 = E.face[1], s0 = E.side[0], s1 = E.side[1];
    if (f0 == f1) throw Error("edge " + std::to_string(e) + " borders one face twice; refusing to flip");
    const Face F = t.faces[f0], G = t.faces[f1];
    const Chart back = across(t, e, 0).inverse();
    const cplx a = F.p[s0], b = F.p[(s0 + 1) % 3], c = F.p[(s0 + 2) % 3];
    const cplx d = back.apply(G.p[(s1 + 2) % 3]);
    const int va = F.v[s0], vb = F.v[(s0 + 1) % 3], vc = F.v[(s0 + 2) % 3], vd = G.v[(s1 + 2) % 3];
    const int e_bc = F.e[(s0 + 1) % 3], e_ca = F.e[(s0 + 2) % 3];
    const int e_ad = G.e[(s1 + 1) % 3], e_db = G.e[(s1 + 2) % 3];

    Face T1, T2;
    T1.v = {va, vd, vc};
    T1.p = {a, d, c};
    T1.e = {e_ad, e, e_ca};
    T2.v = {vd, vb, vc};
    T2.p = {d, b, c};
    T2.e = {e_db, e_bc, e};
    t.faces[f0] = T1;
    t.faces[f1] = T2;

    struct Move {
        int edge, oldF, oldS, newF, newS;
    };
    const Move moves[4] = {{e_ad, f1, (s1 + 1) % 3, f0, 0},
                           {e_ca, f0, (s0 + 2) % 3, f0, 2},
                           {e_db, f1, (s1 + 2) % 3, f1, 0},
                           {e_bc, f0, (s0 + 1) % 3, f1, 1}};
    auto fresh = old;
    for (const Move& m : moves)
        for (int k = 0; k < 2; ++k)
            if (old[m.edge].face[k] == m.oldF && old[m.edge].side[k] == m.oldS) {
                fresh[m.edge].face[k] = m.newF;
                fresh[m.edge].side[k] = m.newS;
            }
    fresh[e].face = {f0, f1};
    fresh[e].side = {1, 2};
    t.edges = std::move(fresh);
}

std::string edge_desc(const Triangulation& t, int e) {
    const auto& E = t.edges[e];
    const Face& f = t.faces[E.face[0]];
    const cplx v = t.edge_vector(e);
    std::ostringstream o;
    o << "edge " << e << " (vertices " << f.v[E.side[0]] << "-" << f.v[(E.side[0] + 1) % 3] << ", vector "
      << v.real() << "," << v.imag() << ")";
    return o.str();
}

double incircle(cplx a, cplx b, cplx c, cplx d) {
    const cplx A = a - d, B = b - d, C = c - d;
    const double na = std::norm(A), nb = std::norm(B), nc = std::norm(C);
    return na * cross(B, C) - nb * cross(A, C) + nc * cross(A, B);
}

// Squares u = (x0, y0, s) with a, b, c on the boundary, u = u0 + tau n, tau in [lo, hi].
struct SquareFamily {
    Eigen::Vector3d u0, n;
    double lo = 0.0, hi = 0.0;
};

bool lo0_fixed(const SquareFamily& F) { return F.n.isZero(); }

std::vector<SquareFamily> circumsquares(const std::array<cplx, 3>& pts, double maxSide, double tolAbs) {
    std::vector<SquareFamily> out;
    // side 0 left (x0 = px), 1 right (x0 + s = px), 2 bottom (y0 = py), 3 top (y0 + s = py)
    for (int code = 0; code < 64; ++code) {
        const int sd[3] = {code & 3, (code >> 2) & 3, (code >> 4) & 3};
        Eigen::Matrix3d A;
        Eigen::Vector3d h;
        for (int r = 0; r < 3; ++r) {
            const cplx p = pts[r];
            switch (sd[r]) {
                case 0: A.row(r) << 1, 0, 0; h[r] = p.real(); break;
                case 1: A.row(r) << 1, 0, 1; h[r] = p.real(); break;
                case 2: A.row(r) << 0, 1, 0; h[r] = p.imag(); break;
                default: A.row(r) << 0, 1, 1; h[r] = p.imag(); break;
            }
        }
        Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
        SquareFamily F;
        if (lu.rank() == 3) {
            F.u0 = lu.solve(h);
            F.n.setZero();
        } else if (lu.rank() == 2) {
            F.u0 = A.colPivHouseholderQr().solve(h);
            if ((A * F.u0 - h).norm() > tolAbs) continue;
            const Eigen::MatrixXd K = lu.kernel();
            F.n = K.col(0).normalized();
        } else {
            continue;
        }
        // Linear constraints g . u <= k: containment of the three points, 0 < s <= maxSide.
        std::vector<std::pair<Eigen::Vector3d, double>> cons;
        for (const cplx p : pts) {
            cons.push_back({Eigen::Vector3d(1, 0, 0), p.real()});     // x0 <= px
            cons.push_back({Eigen::Vector3d(-1, 0, -1), -p.real()});  // px <= x0 + s
            cons.push_back({Eigen::Vector3d(0, 1, 0), p.imag()});
            cons.push_back({Eigen::Vector3d(0, -1, -1), -p.imag()});
        }
        cons.push_back({Eigen::Vector3d(0, 0, -1), -tolAbs});
        cons.push_back({Eigen::Vector3d(0, 0, 1), maxSide});
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        bool ok = true;
        for (const auto& [g, k] : cons) {
            const double base = g.dot(F.u0), slope = g.dot(F.n);
            if (std::abs(slope) < 1e-14) {
                if (base > k + tolAbs) ok = false;
            } else if (slope > 0) {
                hi = std::min(hi, (k + tolAbs - base) / slope);
            } else {
                lo = std::max(lo, (k + tolAbs - base) / slope);
            }
        }
        if (lo0_fixed(F)) lo = hi = 0.0;
        if (!ok || lo > hi) continue;
        if (!std::isfinite(lo) || !std::isfinite(hi)) continue;  // s is bounded, so only a degenerate n
        F.lo = lo;
        F.hi = hi;
        out.push_back(F);
    }
    return out;
}

// Open tau-interval on which point o is strictly inside the square (by more than tolAbs).
bool interior_interval(const SquareFamily& F, cplx o, double tolAbs, double& lo, double& hi) {
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    // x0 + tol < ox ; ox < x0 + s - tol ; same for y
    const std::pair<Eigen::Vector3d, double> cons[4] = {{Eigen::Vector3d(1, 0, 0), o.real() - tolAbs},
                                                        {Eigen::Vector3d(-1, 0, -1), -o.real() - tolAbs},
                                                        {Eigen::Vector3d(0, 1, 0), o.imag() - tolAbs},
                                                        {Eigen::Vector3d(0, -1, -1), -o.imag() - tolAbs}};
    for (const auto& [g, k] : cons) {  // g . u < k
        const double base = g.dot(F.u0), slope = g.dot(F.n);
        if (std::abs(slope) < 1e-14) {
            if (!(base < k)) return false;
        } else if (slope > 0) {
            hi = std::min(hi, (k - base) / slope);
        } else {
            lo = std::max(lo, (k - base) / slope);
        }
    }
    return lo < hi;
}

bool family_has_empty_member(const SquareFamily& F, const std::vector<cplx>& others, double tolAbs) {
    std::vector<std::pair<double, double>> bad;
    for (const cplx o : others) {
        double lo, hi;
        if (interior_interval(F, o, tolAbs, lo, hi)) bad.push_back({lo, hi});
    }
    std::sort(bad.begin(), bad.end());
    double t = F.lo;
    for (const auto& [lo, hi] : bad) {
        if (lo >= t) return true;  // [t, lo] is free (endpoints not excluded: open intervals)
        t = std::max(t, hi);
        if (t > F.hi) return false;
    }
    return t <= F.hi;
}

double span_of(std::initializer_list<cplx> pts) {
    double L = 0.0;
    for (const cplx a : pts)
        for (const cplx b : pts) L = std::max(L, std::abs(a - b));
    return L;
}

bool segments_touch(cplx p, cplx q, cplx a, cplx b, double tol, double* tParam) {
    // closed segments, tolerance tol (absolute)
    const cplx r = q - p, s = b - a;
    const double den = cross(r, s);
    const double len = std::max(std::abs(r), 1e-300);
    if (std::abs(den) < 1e-14 * std::abs(r) * std::abs(s)) {
        // parallel: touching only if collinear and overlapping
        if (std::abs(cross(a - p, r)) > tol * len) return false;
        const double ta = std::real((a - p) * std::conj(r)) / std::norm(r);
        const double tb = std::real((b - p) * std::conj(r)) / std::norm(r);
        const double lo = std::max(0.0, std::min(ta, tb)), hi = std::min(1.0, std::max(ta, tb));
        if (lo > hi + tol / len) return false;
        *tParam = lo;
        return true;
    }
    const double t = cross(a - p, s) / den;
    const double u = cross(a - p, r) / den;
    const double et = tol / len, eu = tol / std::max(std::abs(s), 1e-300);
    if (t < -et || t > 1 + et || u < -eu || u > 1 + eu) return false;
    *tParam = t;
    return true;
}

double seg_point_dist(cplx a, cplx b, cplx o) {
    const cplx d = b - a;
    const double L2 = std::norm(d);
    double t = L2 > 0 ? std::real((o - a) * std::conj(d)) / L2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(a + t * d - o);
}

bool seg_hits_open_box(cplx a, cplx b, double x0, double y0, double x1, double y1) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.real() - a.real(), dy = b.imag() - a.imag();
    auto clip = [&](double p, double q) {
        if (p == 0.0) return q > 0.0;
        const double r = q / p;
        if (p < 0.0) {
            if (r > t1) return false;
            t0 = std::max(t0, r);
        } else {
            if (r < t0) return false;
            t1 = std::min(t1, r);
        }
        return true;
    };
    if (!clip(-dx, a.real() - x0) || !clip(dx, x1 - a.real()) || !clip(-dy, a.imag() - y0) ||
        !clip(dy, y1 - a.imag()))
        return false;
    return t0 < t1;
}

// tau-range in [lo, hi] on which the closed segment pq meets the open square of the family.
bool segment_meets_family(const SquareFamily& F, cplx p, cplx q, double tolAbs, double lo, double hi, double& outLo,
                          double& outHi) {
    if (F.n.isZero()) {
        const Eigen::Vector3d& u = F.u0;
        if (!seg_hits_open_box(p, q, u[0] + tolAbs, u[1] + tolAbs, u[0] + u[2] - tolAbs, u[1] + u[2] - tolAbs))
            return false;
        outLo = lo;
        outHi = hi;
        return true;
    }
    // variables (lambda, tau); point = p + lambda (q - p); rows a lambda + b tau <= c
    const cplx d = q - p;
    const Eigen::Vector3d &u0 = F.u0, &n = F.n;
    std::vector<std::array<double, 3>> rows = {
        {-d.real(), n[0], p.real() - u0[0] - tolAbs},                 // x0 + tol <= x
        {d.real(), -(n[0] + n[2]), u0[0] + u0[2] - tolAbs - p.real()}, // x <= x0 + s - tol
        {-d.imag(), n[1], p.imag() - u0[1] - tolAbs},
        {d.imag(), -(n[1] + n[2]), u0[1] + u0[2] - tolAbs - p.imag()},
        {-1, 0, 0},
        {1, 0, 1},
        {0, -1, -lo},
        {0, 1, hi}};
    double best0 = std::numeric_limits<double>::infinity(), best1 = -best0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            const double det = rows[i][0] * rows[j][1] - rows[i][1] * rows[j][0];
            if (std::abs(det) < 1e-14) continue;
            const double lam = (rows[i][2] * rows[j][1] - rows[i][1] * rows[j][2]) / det;
            const double tau = (rows[i][0] * rows[j][2] - rows[i][2] * rows[j][0]) / det;
            bool ok = true;
            for (const auto& r : rows)
                if (r[0] * lam + r[1] * tau > r[2] + 1e-12 * (1 + std::abs(r[2]))) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            best0 = std::min(best0, tau);
            best1 = std::max(best1, tau);
        }
    if (best0 > best1) return false;
    outLo = best0;
    outHi = best1;
    return true;
}

// Developed copies keyed by (face, sigma, c) with tolerance; cells are 4x the tolerance
// and lookups scan the neighbouring cells so rounding never splits a copy.
class CopyIndex {
public:
    explicit CopyIndex(double tol) : tol_(tol), cell_(4 * tol) {}
    // index of an existing copy or -1
    int find(int face, int sigma, cplx c) const {
        const long long i0 = std::llround(c.real() / cell_), j0 = std::llround(c.imag() / cell_);
        for (long long i = i0 - 1; i <= i0 + 1; ++i)
            for (long long j = j0 - 1; j <= j0 + 1; ++j) {
                auto it = map_.find({face, sigma, i, j});
                if (it == map_.end()) continue;
                for (const auto& [z, id] : it->second)
                    if (std::abs(z - c) <= tol_) return id;
            }
        return -1;
    }
    void add(int face, int sigma, cplx c, int id) {
        map_[{face, sigma, std::llround(c.real() / cell_), std::llround(c.imag() / cell_)}].push_back({c, id});
    }

private:
    double tol_, cell_;
    std::map<std::tuple<int, int, long long, long long>, std::vector<std::pair<cplx, int>>> map_;
};

struct Copy {
    int face;
    Chart toDev;  // face coordinates -> developed frame
    int fromSide; // side of this face we entered through (-1 root)
};

// Unfolds faces reachable through sides accepted by `cross_ok`; dedupes copies.
template <class CrossOk>
std::vector<Copy> unfold(const Triangulation& t, int root, CrossOk cross_ok, double L, std::size_t budget,
                         bool& exhausted) {
    std::vector<Copy> out{{root, Chart{}, -1}};
    CopyIndex seen(1e-9 * L);
    seen.add(root, 1, 0.0, 0);
    exhausted = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Copy cur = out[i];
        const Face& F = t.faces[cur.face];
        for (int s = 0; s < 3; ++s) {
            if (s == cur.fromSide) continue;
            const cplx a = cur.toDev.apply(F.p[s]), b = cur.toDev.apply(F.p[(s + 1) % 3]);
            if (!cross_ok(a, b)) continue;
            const int e = F.e[s];
            const int k = slot_of(t, e, cur.face, s);
            const Chart g = across(t, e, k);  // cur -> next
            const int nf = t.edges[e].face[1 - k], ns = t.edges[e].side[1 - k];
            const Chart nd = g.inverse().then(cur.toDev);
            if (seen.find(nf, nd.sigma, nd.c) >= 0) continue;
            seen.add(nf, nd.sigma, nd.c, static_cast<int>(out.size()));
            out.push_back({nf, nd, ns});
            if (out.size() > budget) {
                exhausted = true;
                return out;
            }
        }
    }
    return out;
}

double min_angle(cplx a, cplx b, cplx c) {
    auto ang = [](cplx p, cplx q, cplx r) { return std::abs(std::arg((r - p) / (q - p))); };
    return std::min({ang(a, b, c), ang(b, c, a), ang(c, a, b)});
}

double tri_scale(const Triangulation& t) {
    double L = 0.0;
    for (std::size_t e = 0; e < t.edges.size(); ++e) L = std::max(L, t.edge_length(static_cast<int>(e)));
    return L;
}

}  // namespace

cplx Triangulation::edge_vector(int e) const {
    const auto& E = edges.at(e);
    const Face& f = faces.at(E.face[0]);
    return f.p[(E.side[0] + 1) % 3] - f.p[E.side[0]];
}

int Triangulation::euler_characteristic() const {
    return static_cast<int>(vertices.size()) - static_cast<int>(edges.size()) + static_cast<int>(faces.size());
}

std::size_t Triangulation::state_hash() const {
    std::vector<std::tuple<int, int, long long, long long>> keys;
    double L = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) L = std::max(L, edge_length(static_cast<int>(e)));
    const double q = 1e-9 * std::max(L, 1e-300);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& E = edges[e];
        const Face& f = faces[E.face[0]];
        int u = f.v[E.side[0]], w = f.v[(E.side[0] + 1) % 3];
        cplx v = edge_vector(static_cast<int>(e));
        if (v.real() < -q || (std::abs(v.real()) <= q && v.imag() < 0)) v = -v;
        if (u > w) std::swap(u, w);
        keys.emplace_back(u, w, std::llround(v.real() / q), std::llround(v.imag() / q));
    }
    std::sort(keys.begin(), keys.end());
    std::size_t h = keys.size();
    for (const auto& [u, w, x, y] : keys)
        for (long long z : {static_cast<long long>(u), static_cast<long long>(w), x, y})
            h ^= std::hash<long long>{}(z) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

Triangulation initial_triangulation(const HalfTranslationSurface& s) {
    Triangulation t;
    t.vertices = s.singularities;
    const int np = static_cast<int>(s.polygons.size());
    std::map<std::pair<int, int>, int> sideEdge;                   // (poly, side)
    std::map<std::tuple<int, int, int>, int> diagEdge;             // (poly, i, j) i < j
    auto attach = [&](int e, int face, int side) {
        auto& E = t.edges[e];
        const int k = E.face[0] < 0 ? 0 : 1;
        if (E.face[k] >= 0) throw Error("triangulation corrupt: edge used three times");
        E.face[k] = face;
        E.side[k] = side;
    };
    for (int p = 0; p < np; ++p) {
        const auto& P = s.polygons[p].v;
        const int n = static_cast<int>(P.size());
        double L = 0.0;
        for (int k = 0; k < n; ++k) L = std::max(L, std::abs(P[(k + 1) % n] - P[k]));
        const double tolA = 1e-12 * L * L;
        std::vector<int> idx(n);
        for (int k = 0; k < n; ++k) idx[k] = k;
        std::vector<std::array<int, 3>> tris;
        while (idx.size() > 3) {
            const int m = static_cast<int>(idx.size());
            // best-shaped ear first (largest minimum angle)
            int best = -1;
            double bestAngle = -1.0;
            for (int r = 0; r < m; ++r) {
                const int i = idx[(r + m - 1) % m], j = idx[r], k = idx[(r + 1) % m];
                if (orient(P[i], P[j], P[k]) <= tolA) continue;
                bool blocked = false;
                for (int o : idx) {
                    if (o == i || o == j || o == k) continue;
                    if (orient(P[i], P[j], P[o]) >= -tolA && orient(P[j], P[k], P[o]) >= -tolA &&
                        orient(P[k], P[i], P[o]) >= -tolA) {
                        blocked = true;
                        break;
                    }
                }
                if (blocked) continue;
                const double ang = min_angle(P[i], P[j], P[k]);
                if (ang > bestAngle + 1e-12) {
                    bestAngle = ang;
                    best = r;
                }
            }
            const bool clipped = best >= 0;
            if (clipped) {
                tris.push_back({idx[(best + m - 1) % m], idx[best], idx[(best + 1) % m]});
                idx.erase(idx.begin() + best);
            }
            if (!clipped) throw Error("ear clipping failed on polygon " + std::to_string(p) + " (not simple?)");
        }
        if (orient(P[idx[0]], P[idx[1]], P[idx[2]]) <= tolA)
            throw Error("ear clipping left a degenerate triangle on polygon " + std::to_string(p));
        tris.push_back({idx[0], idx[1], idx[2]});

        for (const auto& tr : tris) {
            Face F;
            const int fid = static_cast<int>(t.faces.size());
            for (int c = 0; c < 3; ++c) {
                F.v[c] = s.vertexClass[p][tr[c]];
                F.p[c] = P[tr[c]];
            }
            for (int c = 0; c < 3; ++c) {
                const int u = tr[c], w = tr[(c + 1) % 3];
                int e;
                if (w == (u + 1) % n) {
                    auto it = sideEdge.find({p, u});
                    if (it == sideEdge.end()) {
                        e = static_cast<int>(t.edges.size());
                        t.edges.emplace_back();
                        const auto& pr = s.partner[p][u];
                        sideEdge[{p, u}] = e;
                        sideEdge[{pr[0], pr[1]}] = e;
                    } else {
                        e = it->second;
                    }
                } else {
                    const auto key = std::make_tuple(p, std::min(u, w), std::max(u, w));
                    auto it = diagEdge.find(key);
                    if (it == diagEdge.end()) {
                        e = static_cast<int>(t.edges.size());
                        t.edges.emplace_back();
                        diagEdge[key] = e;
                    } else {
                        e = it->second;
                    }
                }
                F.e[c] = e;
            }
            t.faces.push_back(F);
            for (int c = 0; c < 3; ++c) attach(F.e[c], fid, c);
        }
    }
    for (std::size_t e = 0; e < t.edges.size(); ++e)
        if (t.edges[e].face[1] < 0) throw Error("triangulation corrupt: edge " + std::to_string(e) + " has one side");
    set_slope_flags(t);
    return t;
}

bool locally_delaunay(cplx a, cplx b, cplx c, cplx d, double tol) {
    const double L = span_of({a, b, c, d});
    return incircle(a, b, c, d) <= tol * L * L * L * L;
}

bool empty_circumsquare(cplx a, cplx b, cplx c, const std::vector<cplx>& others, double maxSide, double tol) {
    const double L = span_of({a, b, c});
    const double tolAbs = tol * std::max(L, 1e-300);
    for (const auto& F : circumsquares({a, b, c}, maxSide, tolAbs))
        if (family_has_empty_member(F, others, tolAbs)) return true;
    return false;
}

bool locally_linf_delaunay(cplx a, cplx b, cplx c, cplx d, double tol) {
    // Squares are capped at the L-infinity extent of the quad.
    const double ext = std::max(std::max({a.real(), b.real(), c.real(), d.real()}) -
                                    std::min({a.real(), b.real(), c.real(), d.real()}),
                                std::max({a.imag(), b.imag(), c.imag(), d.imag()}) -
                                    std::min({a.imag(), b.imag(), c.imag(), d.imag()}));
    return empty_circumsquare(a, b, c, {d}, ext * (1 + 1e-9), tol) ||
           empty_circumsquare(b, a, d, {c}, ext * (1 + 1e-9), tol);
}

namespace {

Triangulation run_flips(Triangulation t, bool linf, const FlipOptions& opt) {
    auto legal = [&](const Quad& q) {
        return linf ? locally_linf_delaunay(q.a, q.b, q.c, q.d, opt.tol) : locally_delaunay(q.a, q.b, q.c, q.d, opt.tol);
    };
    std::unordered_set<std::size_t> seen{t.state_hash()};
    t.flips = 0;
    for (;;) {
        int pick = -1, stuck = -1;
        std::string why;
        for (int e = 0; e < static_cast<int>(t.edges.size()); ++e) {
            const Quad q = quad_of(t, e);
            if (legal(q)) continue;
            const double L = span_of({q.a, q.b, q.c, q.d});
            const bool convex = orient(q.a, q.d, q.c) > opt.tol * L * L && orient(q.d, q.b, q.c) > opt.tol * L * L;
            if (q.selfAdjacent || !convex) {
                if (stuck < 0) {
                    stuck = e;
                    why = q.selfAdjacent ? "borders a single face twice" : "quad is not strictly convex";
                }
                continue;
            }
            // new diagonal d->c has apex a on its left
            if (linf && !locally_linf_delaunay(q.d, q.c, q.a, q.b, opt.tol)) {
                if (stuck < 0) {
                    stuck = e;
                    why = "neither diagonal admits an empty square";
                }
                continue;
            }
            pick = e;
            break;
        }
        if (pick < 0) {
            if (stuck >= 0) {
                const Quad q = quad_of(t, stuck);
                std::ostringstream o;
                o << edge_desc(t, stuck) << " fails the "
                  << (linf ? "empty-square test" : "empty-circumdisk test (incircle " +
                                                        std::to_string(incircle(q.a, q.b, q.c, q.d)) + ")")
                  << " and cannot be flipped: " << why;
                throw Error(o.str());
            }
            break;
        }
        flip(t, pick);
        ++t.flips;
        if (t.flips > opt.maxFlips) {
            const Quad q = quad_of(t, pick);
            throw Error("flip limit exceeded; last " + edge_desc(t, pick) +
                        (linf ? std::string() : ", incircle " + std::to_string(incircle(q.a, q.b, q.c, q.d))));
        }
        if (!seen.insert(t.state_hash()).second)
            throw Error("flip sequence revisited a triangulation at " + edge_desc(t, pick));
    }
    t.kind = linf ? TriKind::LinfDelaunay : TriKind::Delaunay;
    set_slope_flags(t);
    return t;
}

}  // namespace

Triangulation delaunay(const HalfTranslationSurface& s, const FlipOptions& opt) {
    return run_flips(initial_triangulation(s), false, opt);
}
Triangulation delaunay(Triangulation t, const FlipOptions& opt) { return run_flips(std::move(t), false, opt); }
Triangulation linf_delaunay(const HalfTranslationSurface& s, const FlipOptions& opt) {
    return run_flips(initial_triangulation(s), true, opt);
}
Triangulation linf_delaunay(Triangulation t, const FlipOptions& opt) { return run_flips(std::move(t), true, opt); }

CertificateReport certify_delaunay(const Triangulation& t, double tol) {
    CertificateReport rep;
    const double L = tri_scale(t);
    for (int f = 0; f < static_cast<int>(t.faces.size()); ++f) {
        const Face& F = t.faces[f];
        const cplx a = F.p[0], b = F.p[1], c = F.p[2];
        const cplx B = b - a, C = c - a;
        const double D = 2.0 * cross(B, C);
        const cplx o = a + cplx(C.imag() * std::norm(B) - B.imag() * std::norm(C),
                                B.real() * std::norm(C) - C.real() * std::norm(B)) / D;
        const double R = std::abs(o - a);
        bool exhausted = false;
        const auto copies = unfold(
            t, f, [&](cplx p, cplx q) { return seg_point_dist(p, q, o) < R * (1 - tol); }, L, 200000, exhausted);
        rep.developedCopies += static_cast<int>(copies.size());
        if (exhausted) {
            rep.ok = false;
            rep.failingFace = f;
            rep.detail = "unfolding budget exhausted for face " + std::to_string(f);
            return rep;
        }
        for (const auto& cp : copies)
            for (int k = 0; k < 3; ++k) {
                const cplx v = cp.toDev.apply(t.faces[cp.face].p[k]);
                if (std::abs(v - o) < R * (1 - tol)) {
                    rep.ok = false;
                    rep.failingFace = f;
                    std::ostringstream s;
                    s << "vertex " << t.faces[cp.face].v[k] << " lies inside the circumdisk of face " << f
                      << " (distance " << std::abs(v - o) << " < radius " << R << ")";
                    rep.detail = s.str();
                    return rep;
                }
            }
    }
    return rep;
}

CertificateReport certify_linf_delaunay(const Triangulation& t, double maxSide, double tol) {
    CertificateReport rep;
    const double L = tri_scale(t);
    const double q = 1e-9 * L;
    for (int f = 0; f < static_cast<int>(t.faces.size()); ++f) {
        const Face& F = t.faces[f];
        const double span = span_of({F.p[0], F.p[1], F.p[2]});
        const double tolAbs = tol * span;
        const auto fams = circumsquares(F.p, maxSide, 1e-12 * span);
        if (fams.empty()) {
            rep.ok = false;
            rep.failingFace = f;
            rep.detail = "face " + std::to_string(f) + " has no circumsquare with side <= " + std::to_string(maxSide);
            return rep;
        }
        bool found = false;
        for (const auto& Fm : fams) {
            // Unfold only along crossing chains valid for a common member tau of the family.
            struct Node {
                int face;
                Chart toDev;
                int fromSide;
                double lo, hi;
            };
            // disjoint sorted union of excluded tau-intervals (open)
            std::map<double, double> excluded;
            auto exclude = [&](double lo, double hi) {
                auto it = excluded.upper_bound(lo);
                if (it != excluded.begin() && std::prev(it)->second > lo) --it;
                while (it != excluded.end() && it->first < hi) {
                    lo = std::min(lo, it->first);
                    hi = std::max(hi, it->second);
                    it = excluded.erase(it);
                }
                excluded.emplace(lo, hi);
            };
            auto covered = [&](double lo, double hi) {
                auto it = excluded.upper_bound(lo);
                if (it == excluded.begin()) return false;
                --it;
                return it->first < lo && it->second > hi;
            };
            // components of [lo, hi] minus the excluded set
            auto pieces = [&](double lo, double hi) {
                std::vector<std::pair<double, double>> out;
                double t0 = lo;
                auto it = excluded.upper_bound(lo);
                if (it != excluded.begin()) --it;
                for (; it != excluded.end() && it->first < hi; ++it) {
                    if (it->second <= t0) continue;
                    if (it->first >= t0) out.push_back({t0, it->first});
                    t0 = std::max(t0, it->second);
                }
                if (t0 <= hi) out.push_back({t0, hi});
                return out;
            };
            std::vector<Node> nodes{{f, Chart{}, -1, Fm.lo, Fm.hi}};
            CopyIndex seen(q);
            seen.add(f, 1, 0.0, 0);
            bool exhausted = false;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const Node cur = nodes[i];
                const Face& G = t.faces[cur.face];
                // own corners inside the open square: recorded globally, and a chain
                // never continues for a tau it has just found blocked
                std::vector<std::pair<double, double>> local;
                for (int k = 0; k < 3; ++k) {
                    double lo, hi;
                    if (interior_interval(Fm, cur.toDev.apply(G.p[k]), tolAbs, lo, hi)) {
                        local.push_back({lo, hi});
                        lo = std::max(lo, cur.lo);
                        hi = std::min(hi, cur.hi);
                        if (lo < hi || (lo == hi && Fm.n.isZero())) exclude(lo, hi);
                    }
                }
                if (Fm.n.isZero() && !local.empty()) continue;
                for (const auto& [clo, chi] : pieces(cur.lo, cur.hi)) {
                    bool blocked = false;
                    for (const auto& [l, h] : local) blocked = blocked || (l < clo && chi < h);
                    if (blocked) continue;
                    for (int sd = 0; sd < 3; ++sd) {
                        if (sd == cur.fromSide) continue;
                        const cplx a = cur.toDev.apply(G.p[sd]), b = cur.toDev.apply(G.p[(sd + 1) % 3]);
                        double lo, hi;
                        if (!segment_meets_family(Fm, a, b, tolAbs, clo, chi, lo, hi)) continue;
                        const int e = G.e[sd];
                        const int k = slot_of(t, e, cur.face, sd);
                        const Chart nd = across(t, e, k).inverse().then(cur.toDev);
                        const int nf = t.edges[e].face[1 - k];
                        // a copy reached again with a wider tau-range is widened and revisited
                        if (const int id = seen.find(nf, nd.sigma, nd.c); id >= 0) {
                            Node& old = nodes[id];
                            const double slack = 1e-9 * (old.hi - old.lo + span);
                            if (lo >= old.lo - slack && hi <= old.hi + slack) continue;
                            old.lo = std::min(lo, old.lo);
                            old.hi = std::max(hi, old.hi);
                            const Node again{nf, old.toDev, -1, old.lo, old.hi};
                            nodes.push_back(again);
                        } else {
                            seen.add(nf, nd.sigma, nd.c, static_cast<int>(nodes.size()));
                            nodes.push_back({nf, nd, t.edges[e].side[1 - k], lo, hi});
                        }
                        if (nodes.size() > 200000) exhausted = true;
                    }
                }
                if (exhausted) break;
            }
            rep.developedCopies += static_cast<int>(nodes.size());
            if (exhausted) continue;
            const bool free = Fm.n.isZero() ? excluded.empty() : !covered(Fm.lo, Fm.hi);
            if (free) {
                found = true;
                break;
            }
        }
        if (!found) {
            rep.ok = false;
            rep.failingFace = f;
            rep.detail = "every circumsquare of face " + std::to_string(f) + " contains a developed vertex";
            return rep;
        }
    }
    return rep;
}

DiameterEstimate surface_diameter(const Triangulation& t, int subdivisions, int depth) {
    if (subdivisions < 1) throw Error("diameter needs at least one subdivision");
    const int n = subdivisions;
    std::vector<std::array<double, 3>> bary;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n - i; ++j) bary.push_back({double(i) / n, double(j) / n, double(n - i - j) / n});
    const int ns = static_cast<int>(bary.size());
    const int nf = static_cast<int>(t.faces.size());
    auto sample = [&](int f, int k) {
        const Face& F = t.faces[f];
        return bary[k][0] * F.p[0] + bary[k][1] * F.p[1] + bary[k][2] * F.p[2];
    };
    std::vector<std::vector<std::pair<int, double>>> adj(nf * ns);
    auto link = [&](int u, int v, double w) {
        adj[u].push_back({v, w});
        adj[v].push_back({u, w});
    };
    const double L = tri_scale(t);
    const double tol = 1e-12 * L;
    // same vertex class: zero-weight links between corner samples
    std::map<int, std::vector<int>> corners;
    for (int f = 0; f < nf; ++f)
        for (int k = 0; k < ns; ++k)
            for (int c = 0; c < 3; ++c)
                if (bary[k][c] == 1.0) corners[t.faces[f].v[c]].push_back(f * ns + k);
    for (const auto& [v, list] : corners)
        for (std::size_t i = 1; i < list.size(); ++i) link(list[0], list[i], 0.0);

    for (int f = 0; f < nf; ++f) {
        for (int a = 0; a < ns; ++a)
            for (int b = a + 1; b < ns; ++b) link(f * ns + a, f * ns + b, std::abs(sample(f, a) - sample(f, b)));
        // chains of faces by depth-limited unfolding; each chain keeps its crossed sides
        struct Node {
            int face;
            Chart toDev;
            int fromSide;
            std::vector<std::pair<cplx, cplx>> crossed;
        };
        std::vector<Node> stack{{f, Chart{}, -1, {}}};
        while (!stack.empty()) {
            Node cur = std::move(stack.back());
            stack.pop_back();
            if (!cur.crossed.empty()) {
                for (int a = 0; a < ns; ++a) {
                    const cplx p = sample(f, a);
                    for (int b = 0; b < ns; ++b) {
                        const cplx q = cur.toDev.apply(sample(cur.face, b));
                        double prev = -1.0;
                        bool ok = true;
                        for (const auto& [u, w] : cur.crossed) {
                            double tp;
                            if (!segments_touch(p, q, u, w, tol, &tp) || tp < prev - 1e-12) {
                                ok = false;
                                break;
                            }
                            prev = tp;
                        }
                        if (ok) link(f * ns + a, cur.face * ns + b, std::abs(p - q));
                    }
                }
            }
            if (static_cast<int>(cur.crossed.size()) >= depth) continue;
            const Face& F = t.faces[cur.face];
            for (int s = 0; s < 3; ++s) {
                if (s == cur.fromSide) continue;
                const int e = F.e[s];
                const int k = slot_of(t, e, cur.face, s);
                const Chart g = across(t, e, k);
                Node nx;
                nx.face = t.edges[e].face[1 - k];
                nx.fromSide = t.edges[e].side[1 - k];
                nx.toDev = g.inverse().then(cur.toDev);
                nx.crossed = cur.crossed;
                nx.crossed.push_back({cur.toDev.apply(F.p[s]), cur.toDev.apply(F.p[(s + 1) % 3])});
                stack.push_back(std::move(nx));
            }
        }
    }
    double diam = 0.0;
    const int N = nf * ns;
    std::vector<double> dist(N);
    for (int src = 0; src < N; ++src) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        using QE = std::pair<double, int>;
        std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
        dist[src] = 0.0;
        pq.push({0.0, src});
        while (!pq.empty()) {
            const auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            for (const auto& [v, w] : adj[u])
                if (d + w < dist[v]) {
                    dist[v] = d + w;
                    pq.push({dist[v], v});
                }
        }
        for (double d : dist) diam = std::max(diam, d);
    }
    return {diam, ns};
}

SubgraphWitness cluster_subgraph_connected(const Triangulation& t, const std::vector<int>& D) {
    if (D.empty()) throw Error("cluster vertex set is empty");
    std::set<int> inD(D.begin(), D.end());
    std::map<int, std::vector<int>> adj;
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
        const auto& E = t.edges[e];
        const Face& f = t.faces[E.face[0]];
        const int u = f.v[E.side[0]], w = f.v[(E.side[0] + 1) % 3];
        if (u != w && inD.count(u) && inD.count(w)) {
            adj[u].push_back(w);
            adj[w].push_back(u);
        }
    }
    SubgraphWitness W;
    std::set<int> seen{*inD.begin()};
    std::vector<int> queue{*inD.begin()};
    for (std::size_t i = 0; i < queue.size(); ++i)
        for (int w : adj[queue[i]])
            if (seen.insert(w).second) {
                queue.push_back(w);
                W.spanning.push_back({queue[i], w});
            }
    W.connected = seen.size() == inD.size();
    if (!W.connected) {
        W.spanning.clear();
        for (int v : inD) (seen.count(v) ? W.sideA : W.sideB).push_back(v);
    }
    return W;
}

}  // namespace qdf
