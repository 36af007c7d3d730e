#include "qdflat/nrrp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "qdflat/clusters.hpp"
#include "qdflat/metric.hpp"
#include "qdflat/periods.hpp"
#include "qdflat/quadrature.hpp"

namespace qdf {

namespace {

cplx nearest_sign(cplx w, cplx ref) { return std::real(w * std::conj(ref)) >= 0.0 ? w : -w; }

double dist_to_sing(const RationalQD& q, cplx z) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : q.sing) d = std::min(d, std::abs(z - s.z));
    return d;
}

const std::vector<double>& gl_nodes(std::vector<double>* weights = nullptr) {
    static std::vector<double> x, w;
    if (x.empty()) quad::gauss_legendre01(16, x, w);
    if (weights) *weights = w;
    return x;
}

// Integral of sqrt(q) over [a, b] with the root continued from ra = sqrt(q(a)).
// The segment is short against the distance to singularities. rb receives sqrt(q(b)).
cplx short_integral(const RationalQD& q, cplx a, cplx b, cplx ra, cplx& rb) {
    std::vector<double> w;
    const auto& x = gl_nodes(&w);
    cplx sum{}, prev = ra;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const cplx r = nearest_sign(psqrt(q.eval(a + x[k] * (b - a))), prev);
        sum += w[k] * r;
        prev = r;
    }
    rb = nearest_sign(psqrt(q.eval(b)), prev);
    return sum * (b - a);
}

struct Trace {
    std::vector<std::vector<cplx>> sides;
    cplx end{};
};

// Walks the developed right polygon from z0 (root r0) with the given side lengths.
Trace walk(const RationalQD& q, cplx z0, cplx r0, const std::vector<double>& len, double stepFraction) {
    Trace tr;
    cplx z = z0, r = r0, u{-1.0, 0.0};
    for (double L : len) {
        std::vector<cplx> pts{z};
        double left = L;
        const double minStep = L / 64.0;
        while (left > 1e-15 * L) {
            const double d = dist_to_sing(q, z);
            const double ds = std::min({left, stepFraction * d * std::abs(r), minStep});
            const cplx target = ds * u;
            cplx z1 = z + target / r, r1;
            for (int it = 0; it < 4; ++it) {
                const cplx I = short_integral(q, z, z1, r, r1);
                const cplx dz = (I - target) / r1;
                z1 -= dz;
                if (std::abs(dz) <= 1e-16 * std::abs(z1 - z) + 1e-300) break;
            }
            short_integral(q, z, z1, r, r1);
            z = z1;
            r = r1;
            left -= ds;
            pts.push_back(z);
        }
        tr.sides.push_back(std::move(pts));
        u *= cplx(0.0, 1.0);
    }
    tr.end = z;
    return tr;
}

int winding(const std::vector<cplx>& poly, cplx p) {
    double total = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) {
        const cplx a = poly[k] - p, b = poly[(k + 1) % poly.size()] - p;
        total += std::arg(b / a);
    }
    return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

cplx part_center(const RationalQD& q, const std::vector<int>& members) {
    int m = 0;
    for (int j : members) m += q.sing[j].order;
    if (m > 0) return cluster_center(q, members);
    cplx c{};
    for (int j : members) c += q.sing[j].z;
    return c / static_cast<double>(members.size());
}

}  // namespace

std::vector<double> NRRP::side_lengths() const {
    std::vector<double> L;
    for (const auto& s : sides) L.push_back(s.length);
    return L;
}

int NRRP::pole_count() const {
    int n = 0;
    for (const auto& s : interiorSing) n += s.order == -1;
    return n;
}

bool NRRP::has_pole_or_marked() const {
    for (const auto& s : interiorSing)
        if (s.order == -1 || s.order == 0) return true;
    return false;
}

NRRP trace_nrrp(const RationalQD& q, const std::vector<int>& members, double R, const NrrpOptions& opt) {
    if (members.empty()) throw Error("trace_nrrp: empty part");
    if (!(R > 0.0)) throw Error("trace_nrrp: radius must be positive");
    NRRP P;
    P.interior = members;
    std::sort(P.interior.begin(), P.interior.end());
    for (int j : P.interior) {
        if (j < 0 || j >= static_cast<int>(q.size())) throw Error("trace_nrrp: singularity index out of range");
        P.interiorSing.push_back(q.sing[j]);
        P.m += q.sing[j].order;
    }
    if (P.pole_count() > 1) throw Error("trace_nrrp: more than one pole in a part");
    if (P.m < -1) throw Error("trace_nrrp: part of total order below -1");
    P.R = R;
    P.center = part_center(q, P.interior);
    cplx t = q.scale;
    for (std::size_t j = 0; j < q.size(); ++j)
        if (!std::binary_search(P.interior.begin(), P.interior.end(), static_cast<int>(j)))
            t *= std::pow(P.center - q.sing[j].z, static_cast<double>(q.sing[j].order));
    P.t = t;

    const int n = 2 * (P.m + 2);
    const double mp2 = P.m + 2.0;
    const cplx st = std::sqrt(t);
    const cplx zeta0 = R * cplx(1.0, 1.0);
    // y = (z0 - c)^{1/2} on the model branch, so the model root is sqrt(t) y^m
    const cplx y = std::pow(mp2 * zeta0 / (2.0 * st), 1.0 / mp2);
    const cplx z0 = P.center + y * y;
    const cplx r0 = nearest_sign(psqrt(q.eval(z0)), st * ipow(y, P.m));

    std::vector<double> len(n, 2.0 * R);
    const double zScale = std::abs(z0 - P.center);
    // the model polygon reaches out to the corner radius; a non-member that close would be swallowed
    for (std::size_t j = 0; j < q.size(); ++j)
        if (!std::binary_search(P.interior.begin(), P.interior.end(), static_cast<int>(j)) &&
            std::abs(q.sing[j].z - P.center) < zScale)
            throw Error("no admissible NRRP: singularity " + std::to_string(j) + " lies within the model radius " +
                        std::to_string(zScale));
    Trace tr = walk(q, z0, r0, len, opt.stepFraction);
    for (int it = 0; it < opt.maxCorrections && std::abs(tr.end - z0) > opt.closureTol * zScale; ++it) {
        // least-norm Gauss-Newton on the side lengths
        Eigen::MatrixXd J(2, n);
        const double h = 1e-6 * R;
        for (int k = 0; k < n; ++k) {
            auto lp = len, lm = len;
            lp[k] += h;
            lm[k] -= h;
            const cplx d = (walk(q, z0, r0, lp, opt.stepFraction).end - walk(q, z0, r0, lm, opt.stepFraction).end) /
                           (2.0 * h);
            J(0, k) = d.real();
            J(1, k) = d.imag();
        }
        const Eigen::Vector2d res(tr.end.real() - z0.real(), tr.end.imag() - z0.imag());
        const Eigen::VectorXd dl = -J.transpose() * (J * J.transpose()).ldlt().solve(res);
        for (int k = 0; k < n; ++k) len[k] += dl[k];
        if (*std::min_element(len.begin(), len.end()) <= 0.0)
            throw Error("trace_nrrp: closure correction produced a non-positive side");
        tr = walk(q, z0, r0, len, opt.stepFraction);
    }
    P.closure = std::abs(tr.end - z0);
    if (P.closure > 1e3 * opt.closureTol * zScale)
        throw Error("trace_nrrp: boundary does not close (gap " + std::to_string(P.closure) + ")");

    cplx u{-1.0, 0.0};
    std::vector<cplx> loop;
    for (int k = 0; k < n; ++k) {
        NrrpSide s;
        s.dir = u;
        s.length = len[k];
        s.z = tr.sides[k];
        if (k == n - 1) s.z.back() = z0;
        P.corners.push_back(s.z.front());
        loop.insert(loop.end(), s.z.begin(), s.z.end() - 1);
        P.sides.push_back(std::move(s));
        u *= cplx(0.0, 1.0);
    }
    for (std::size_t j = 0; j < q.size(); ++j) {
        const bool in = std::binary_search(P.interior.begin(), P.interior.end(), static_cast<int>(j));
        const int w = winding(loop, q.sing[j].z);
        if (w != (in ? 1 : 0))
            throw Error("no admissible NRRP: singularity " + std::to_string(j) + (in ? " falls outside" : " falls inside") +
                        " the polygon of radius " + std::to_string(R));
    }
    // interior positions relative to side 0, in the traced branch
    for (int j : P.interior) {
        const Contour g = make_contour(q, {z0, q.sing[j].z});
        cplx p = period(q, g, 1e-13);
        if (std::real(conventional_root(q, g, 1e-9) * std::conj(r0)) < 0.0) p = -p;
        P.interiorRatio.push_back(p / (-len[0]));
    }
    double rad = std::numeric_limits<double>::infinity();
    const std::size_t stride = std::max<std::size_t>(1, loop.size() / 256);
    for (int j : P.interior)
        for (std::size_t k = 0; k < loop.size(); k += stride)
            rad = std::min(rad, segment_flat_length(q, loop[k], q.sing[j].z));
    P.radius = rad;
    return P;
}

NRRP rectangle_nrrp(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("rectangle_nrrp: sides must be positive");
    NRRP P;
    P.degenerate = true;
    P.R = 0.5 * std::max(a, b);
    const double L[4] = {a, b, a, b};
    cplx u{-1.0, 0.0}, z{a, b};
    for (double l : L) {
        NrrpSide s;
        s.dir = u;
        s.length = l;
        s.z = {z, z + l * u};
        P.corners.push_back(z);
        z += l * u;
        P.sides.push_back(s);
        u *= cplx(0.0, 1.0);
    }
    P.center = 0.5 * cplx(a, b);
    return P;
}

NrrpSystem nrrp_system(const RationalQD& q, double delta, const NrrpOptions& opt,
                       const std::optional<std::vector<std::vector<int>>>& parts,
                       const std::optional<std::vector<double>>& fixedR) {
    if (q.infinity_order() != 0 || q.infinityMarked)
        throw Error("nrrp_system: infinity must be a regular unmarked point (normalize first)");
    NrrpSystem S;
    const int N = static_cast<int>(q.size());
    if (parts) {
        S.parts = *parts;
    } else {
        std::vector<bool> used(N, false);
        for (const auto& c : delta_clusters(q, delta, ClusterMetric::Complex)) {
            S.parts.push_back(c);
            for (int j : c) used[j] = true;
        }
        for (int j = 0; j < N; ++j)
            if (!used[j]) S.parts.push_back({j});
        std::sort(S.parts.begin(), S.parts.end());
    }
    const int P = static_cast<int>(S.parts.size());
    std::vector<cplx> centers;
    for (const auto& p : S.parts) {
        int poles = 0;
        for (int j : p) poles += q.sing[j].order == -1;
        if (poles > 1) {
            std::vector<int> pp;
            for (int j : p)
                if (q.sing[j].order == -1) pp.push_back(j);
            throw Error("no admissible NRRP: poles " + std::to_string(pp[0]) + " and " + std::to_string(pp[1]) +
                        " share a part");
        }
        centers.push_back(part_center(q, p));
    }
    for (int a = 0; a < P; ++a) {
        double sep = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int b = 0; b < P; ++b) {
            if (b == a) continue;
            for (int i : S.parts[a])
                for (int j : S.parts[b])
                    if (std::abs(q.sing[i].z - q.sing[j].z) < sep) {
                        sep = std::abs(q.sing[i].z - q.sing[j].z);
                        bi = i;
                        bj = j;
                    }
        }
        double inner = 0.0;
        for (int i : S.parts[a]) inner = std::max(inner, std::abs(q.sing[i].z - centers[a]));
        const double r = 0.25 * sep;
        if (!fixedR && P > 1 && !(r > 3.0 * inner))
            throw Error("no admissible NRRP at delta " + std::to_string(delta) + ": singularities " + std::to_string(bi) +
                        " and " + std::to_string(bj) + " are too close for the part's size");
        double R;
        if (fixedR) {
            R = fixedR->at(a);
        } else {
            // nominal R from the model radius of the part
            int m = 0;
            for (int j : S.parts[a]) m += q.sing[j].order;
            cplx t = q.scale;
            for (int j = 0; j < N; ++j)
                if (std::find(S.parts[a].begin(), S.parts[a].end(), j) == S.parts[a].end())
                    t *= std::pow(centers[a] - q.sing[j].z, static_cast<double>(q.sing[j].order));
            R = 2.0 * std::sqrt(std::abs(t)) * std::pow(r, (m + 2) / 2.0) / ((m + 2) * std::sqrt(2.0));
        }
        S.R.push_back(R);
        S.nrrps.push_back(trace_nrrp(q, S.parts[a], R, opt));
    }
    S.separation = std::numeric_limits<double>::infinity();
    for (const auto& p : S.nrrps)
        for (double l : p.side_lengths()) S.maxSide = std::max(S.maxSide, l);
    auto samples = [](const NRRP& p) {
        std::vector<cplx> out;
        for (const auto& s : p.sides)
            for (std::size_t k = 0; k + 1 < s.z.size(); k += std::max<std::size_t>(1, s.z.size() / 8)) out.push_back(s.z[k]);
        return out;
    };
    for (int a = 0; a < P; ++a)
        for (int b = a + 1; b < P; ++b)
            for (cplx x : samples(S.nrrps[a]))
                for (cplx y : samples(S.nrrps[b])) S.separation = std::min(S.separation, segment_flat_length(q, x, y));
    S.separated = S.separation > 2.0 * S.maxSide;
    return S;
}

// ---------------------------------------------------------------------------
// doubling

namespace {

struct DoubleLayout {
    int n = 0;  // corners
    int p = 0;  // interior points
    int dim() const { return (n - 3) + 2 * p + 1; }
};

bool unpack(const DoubleLayout& L, const Eigen::VectorXd& x, std::vector<double>& c, std::vector<cplx>& w,
            double& logScale) {
    c = {0.0, 1.0};
    for (int k = 0; k < L.n - 3; ++k) c.push_back(x[k]);
    for (std::size_t k = 1; k < c.size(); ++k)
        if (!(c[k] > c[k - 1])) return false;
    w.clear();
    for (int j = 0; j < L.p; ++j) {
        w.emplace_back(x[L.n - 3 + 2 * j], x[L.n - 3 + 2 * j + 1]);
        if (!(w.back().imag() > 0.0)) return false;
    }
    logScale = x[L.dim() - 1];
    return true;
}

RationalQD build_double(const NRRP& P, const std::vector<double>& c, const std::vector<cplx>& w, double logScale) {
    RationalQD q;
    q.scale = std::exp(logScale);
    for (double x : c) q.sing.push_back({x, -1, false});
    for (std::size_t j = 0; j < w.size(); ++j) {
        const auto& s = P.interiorSing[j];
        q.sing.push_back({w[j], s.order, s.marked});
        q.sing.push_back({std::conj(w[j]), s.order, s.marked});
    }
    return q;
}

struct Eval {
    bool ok = false;
    Eigen::VectorXd r;
    double sideRes = 0.0, ratioRes = 0.0;
};

Eval evaluate(const NRRP& P, const DoubleLayout& L, const Eigen::VectorXd& x, double tol) {
    Eval E;
    std::vector<double> c;
    std::vector<cplx> w;
    double ls;
    if (!unpack(L, x, c, w, ls)) return E;
    const RationalQD q = build_double(P, c, w, ls);
    const auto lens = double_side_lengths(q, c, tol);
    E.r.resize(L.n + 2 * L.p);
    for (int k = 0; k < L.n; ++k) {
        E.r[k] = lens[k] / P.sides[k].length - 1.0;
        E.sideRes = std::max(E.sideRes, std::abs(E.r[k]));
    }
    if (L.p > 0) {
        const cplx side0 = period(q, make_contour(q, {0.0, 1.0}), tol);
        for (int j = 0; j < L.p; ++j) {
            const cplx d = period(q, make_contour(q, {0.0, w[j]}), tol) / side0 - P.interiorRatio[j];
            E.r[L.n + 2 * j] = d.real();
            E.r[L.n + 2 * j + 1] = d.imag();
            E.ratioRes = std::max(E.ratioRes, std::abs(d));
        }
    }
    E.ok = std::isfinite(E.r.norm());
    return E;
}

Eigen::VectorXd pack(const DoubleLayout& L, const DoubleGuess& g) {
    Eigen::VectorXd x(L.dim());
    if (static_cast<int>(g.corners.size()) != L.n - 3 || static_cast<int>(g.interior.size()) != L.p)
        throw Error("double_nrrp: initial guess has the wrong shape");
    for (int k = 0; k < L.n - 3; ++k) x[k] = g.corners[k];
    for (int j = 0; j < L.p; ++j) {
        x[L.n - 3 + 2 * j] = g.interior[j].real();
        x[L.n - 3 + 2 * j + 1] = g.interior[j].imag();
    }
    x[L.dim() - 1] = g.logScale;
    return x;
}

}  // namespace

std::vector<double> double_side_lengths(const RationalQD& q, const std::vector<double>& c, double tol) {
    const int n = static_cast<int>(c.size()) + 1;
    std::vector<double> out;
    for (int k = 0; k + 1 < n - 1; ++k) out.push_back(flat_length(q, make_contour(q, {c[k], c[k + 1]}), tol));
    // the two sides through infinity, seen from w = 1/(z - x0)
    const double x0 = 0.5 * (c[0] + c[1]);
    const Mobius T{0.0, 1.0, 1.0, -x0};
    const RationalQD qw = mobius_transform(q, T);
    out.push_back(flat_length(qw, make_contour(qw, {1.0 / (c[n - 2] - x0), 0.0}), tol));
    out.push_back(flat_length(qw, make_contour(qw, {0.0, 1.0 / (c[0] - x0)}), tol));
    return out;
}

DoubleGuess default_double_guess(const NRRP& P) {
    const int n = P.side_count();
    if (n < 3) throw Error("double_nrrp: a polygon with fewer than three corners has no three-point normalization");
    DoubleGuess g;
    const double L0 = P.sides[0].length;
    double acc = 0.0, sumL = 0.0;
    std::vector<double> c;
    for (int k = 0; k < n - 1; ++k) {
        c.push_back(acc / L0);
        acc += P.sides[k].length;
    }
    for (const auto& s : P.sides) sumL += s.length;
    for (int k = 2; k < n - 1; ++k) g.corners.push_back(c[k]);
    const double xbar = std::accumulate(c.begin(), c.end(), 0.0) / c.size();
    const double h = sumL / n / L0;
    double spread = 0.0;
    for (const auto& s : P.interiorSing) spread = std::max(spread, std::abs(s.z - P.center));
    for (const auto& s : P.interiorSing) {
        const cplx d = spread > 0.0 ? (s.z - P.center) / spread : cplx{};
        g.interior.push_back(cplx(xbar, h) + 0.5 * h * d);
    }
    // scale so that side 0 has the right length
    RationalQD q;
    q.scale = 1.0;
    std::vector<double> cc = {0.0, 1.0};
    cc.insert(cc.end(), g.corners.begin(), g.corners.end());
    for (double x : cc) q.sing.push_back({x, -1, false});
    for (std::size_t j = 0; j < g.interior.size(); ++j) {
        q.sing.push_back({g.interior[j], P.interiorSing[j].order, P.interiorSing[j].marked});
        q.sing.push_back({std::conj(g.interior[j]), P.interiorSing[j].order, P.interiorSing[j].marked});
    }
    const double l0 = flat_length(q, make_contour(q, {0.0, 1.0}), 1e-12);
    g.logScale = 2.0 * std::log(L0 / l0);
    return g;
}

namespace {

DoubleResult solve_double(const NRRP& P, const DoubleGuess& g0, const DoubleOptions& opt) {
    DoubleLayout L{P.side_count(), static_cast<int>(P.interiorSing.size())};
    Eigen::VectorXd x = pack(L, g0);
    Eval E = evaluate(P, L, x, opt.quadTol);
    if (!E.ok) throw Error("double_nrrp: invalid initial guess (corners must increase, interior points above R)");

    DoubleResult out;
    out.history.push_back(E.r.norm());
    auto done = [&](const Eval& e) { return e.sideRes < opt.tol && e.ratioRes < opt.tol; };
    while (!done(E) && out.iterations < opt.maxIter) {
        Eigen::MatrixXd J(E.r.size(), L.dim());
        for (int i = 0; i < L.dim(); ++i) {
            const double h = opt.fdStep * std::max(1.0, std::abs(x[i]));
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const Eval ep = evaluate(P, L, xp, opt.quadTol), em = evaluate(P, L, xm, opt.quadTol);
            if (!ep.ok || !em.ok) throw Error("double_nrrp: finite-difference step left the admissible region");
            J.col(i) = (ep.r - em.r) / (2.0 * h);
        }
        const Eigen::VectorXd dx = J.colPivHouseholderQr().solve(-E.r);
        double a = 1.0;
        bool moved = false;
        for (int k = 0; k < 40; ++k, a *= 0.5) {
            const Eigen::VectorXd xn = x + a * dx;
            const Eval en = evaluate(P, L, xn, opt.quadTol);
            if (en.ok && en.r.norm() < E.r.norm()) {
                x = xn;
                E = en;
                moved = true;
                break;
            }
        }
        if (!moved) break;
        ++out.iterations;
        out.history.push_back(E.r.norm());
    }
    out.converged = done(E);
    std::vector<double> c;
    std::vector<cplx> w;
    double ls;
    unpack(L, x, c, w, ls);
    out.q = build_double(P, c, w, ls);
    out.corners = c;
    out.interior = w;
    out.residual = E.sideRes;
    out.ratioResidual = E.ratioRes;
    // order from the last triple above the noise floor
    const auto& h = out.history;
    for (std::size_t k = h.size(); k-- > 2;) {
        if (h[k] < 1e-13 || !(h[k - 1] < h[k - 2]) || !(h[k] < h[k - 1])) continue;
        const double o = std::log(h[k] / h[k - 1]) / std::log(h[k - 1] / h[k - 2]);
        if (std::isfinite(o)) {
            out.order = o;
            break;
        }
    }
    return out;
}

}  // namespace

DoubleResult double_nrrp(const NRRP& P, const DoubleOptions& opt) {
    const int n = P.side_count();
    if (n < 3) throw Error("double_nrrp: a polygon with fewer than three corners has no three-point normalization");
    if (P.pole_count() > 1) throw Error("double_nrrp: more than one interior pole");
    if (!P.degenerate && P.interiorSing.empty()) throw Error("double_nrrp: polygon without interior singularity");
    if (static_cast<int>(P.interiorRatio.size()) != static_cast<int>(P.interiorSing.size()))
        throw Error("double_nrrp: interior positions missing");
    if (opt.guess) return solve_double(P, *opt.guess, opt);
    // the default start does not know which interior point is which; other assignments
    // of the start positions (same type only) are tried when the first one stalls
    const DoubleGuess g0 = default_double_guess(P);
    DoubleResult best = solve_double(P, g0, opt);
    const int k = static_cast<int>(g0.interior.size());
    if (best.converged || k < 2 || k > 5) return best;
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    while (std::next_permutation(perm.begin(), perm.end())) {
        bool sameType = true;
        for (int j = 0; j < k; ++j)
            sameType = sameType && P.interiorSing[j].order == P.interiorSing[perm[j]].order &&
                       P.interiorSing[j].marked == P.interiorSing[perm[j]].marked;
        if (!sameType) continue;
        DoubleGuess g = g0;
        for (int j = 0; j < k; ++j) g.interior[j] = g0.interior[perm[j]];
        DoubleResult r;
        try {
            r = solve_double(P, g, opt);
        } catch (const Error&) {
            continue;
        }
        if (r.converged) return r;
        if (r.history.back() < best.history.back()) best = std::move(r);
    }
    return best;
}

}  // namespace qdf
