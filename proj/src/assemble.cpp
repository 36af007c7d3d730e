#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "qdflat/periods.hpp"
#include "qdflat/qcmap.hpp"

namespace qdf {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}

double orient(cplx a, cplx b, cplx c) { return std::imag(std::conj(b - a) * (c - a)); }

// Bowyer-Watson; returns counter-clockwise index triples.
std::vector<std::array<int, 3>> planar_delaunay(const std::vector<cplx>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 3) throw Error("planar triangulation needs three points");
    cplx lo = pts[0], hi = pts[0];
    for (const cplx p : pts) {
        lo = {std::min(lo.real(), p.real()), std::min(lo.imag(), p.imag())};
        hi = {std::max(hi.real(), p.real()), std::max(hi.imag(), p.imag())};
    }
    const cplx mid = 0.5 * (lo + hi);
    const double span = std::max(hi.real() - lo.real(), hi.imag() - lo.imag()) + 1e-300;
    std::vector<cplx> P = pts;
    P.push_back(mid + 40.0 * span * cplx(-1.0, -1.0));
    P.push_back(mid + 40.0 * span * cplx(1.0, -1.0));
    P.push_back(mid + 40.0 * span * cplx(0.0, 1.0));
    std::vector<std::array<int, 3>> tris{{n, n + 1, n + 2}};
    auto in_circle = [&](const std::array<int, 3>& t, cplx d) {
        const cplx a = P[t[0]] - d, b = P[t[1]] - d, c = P[t[2]] - d;
        const double det = std::norm(a) * std::imag(std::conj(b) * c) - std::norm(b) * std::imag(std::conj(a) * c) +
                           std::norm(c) * std::imag(std::conj(a) * b);
        return det > 0.0;
    };
    for (int i = 0; i < n; ++i) {
        std::vector<std::array<int, 3>> keep, bad;
        for (const auto& t : tris) (in_circle(t, P[i]) ? bad : keep).push_back(t);
        std::map<std::pair<int, int>, int> edges;
        for (const auto& t : bad)
            for (int k = 0; k < 3; ++k) {
                const int a = t[k], b = t[(k + 1) % 3];
                ++edges[{std::min(a, b), std::max(a, b)}];
            }
        for (const auto& t : bad)
            for (int k = 0; k < 3; ++k) {
                const int a = t[k], b = t[(k + 1) % 3];
                if (edges[{std::min(a, b), std::max(a, b)}] == 1) keep.push_back({a, b, i});
            }
        tris = std::move(keep);
    }
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris)
        if (t[0] < n && t[1] < n && t[2] < n) out.push_back(t);
    return out;
}

bool in_closed_triangle(cplx p, const std::array<cplx, 3>& t, double tol) {
    const double s = orient(t[0], t[1], t[2]) > 0 ? 1.0 : -1.0;
    for (int k = 0; k < 3; ++k)
        if (s * orient(t[k], t[(k + 1) % 3], p) < -tol) return false;
    return true;
}

int winding(const std::vector<cplx>& loop, cplx p) {
    double total = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k) total += std::arg((loop[(k + 1) % loop.size()] - p) / (loop[k] - p));
    return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

std::vector<cplx> boundary_loop(const NRRP& P) {
    std::vector<cplx> loop;
    for (const auto& s : P.sides) loop.insert(loop.end(), s.z.begin(), s.z.end() - 1);
    return loop;
}

bool has_sing_inside(const RationalQD& q, const std::array<cplx, 3>& t) {
    const double scale = std::max({std::abs(t[1] - t[0]), std::abs(t[2] - t[1]), std::abs(t[0] - t[2])});
    for (const auto& s : q.sing)
        if (in_closed_triangle(s.z, t, 1e-9 * scale * scale)) return true;
    return false;
}

// Developed triangle: corner 0 at the origin, edges by straight-segment periods from corner 0.
std::array<cplx, 3> develop(const RationalQD& q, const std::array<cplx, 3>& t) {
    return {cplx{}, period(q, make_contour(q, {t[0], t[1]}), 1e-13), period(q, make_contour(q, {t[0], t[2]}), 1e-13)};
}

void finish(DilatationReport& rep) {
    rep.K = 1.0;
    for (const auto& r : rep.regions) rep.K = std::max(rep.K, r.K);
    rep.teichBound = 0.5 * std::log(rep.K);
}

}  // namespace

DilatationReport assemble_qc_map(const HalfTranslationSurface& s1, const HalfTranslationSurface& s2,
                                 const AssembleOptions&) {
    const Triangulation t1 = delaunay(s1), t2 = delaunay(s2);
    if (t1.faces.size() != t2.faces.size() || t1.edges.size() != t2.edges.size())
        throw Error("combinatorics mismatch: triangulations differ in size");
    for (std::size_t f = 0; f < t1.faces.size(); ++f)
        if (t1.faces[f].v != t2.faces[f].v || t1.faces[f].e != t2.faces[f].e)
            throw Error("combinatorics mismatch at face " + std::to_string(f));
    const PlDilatation pl = pl_map_dilatation(t1, t2);
    DilatationReport rep;
    for (std::size_t f = 0; f < pl.K.size(); ++f) rep.regions.push_back({"pl:" + std::to_string(f), "pl", pl.K[f], ""});
    finish(rep);
    return rep;
}

namespace {

bool same_nrrp(const NRRP& a, const NRRP& b) {
    if (a.center != b.center || a.sides.size() != b.sides.size() || a.interiorSing.size() != b.interiorSing.size())
        return false;
    for (std::size_t k = 0; k < a.sides.size(); ++k)
        if (a.sides[k].dir != b.sides[k].dir || a.sides[k].length != b.sides[k].length) return false;
    for (std::size_t j = 0; j < a.interiorSing.size(); ++j)
        if (a.interiorSing[j].z != b.interiorSing[j].z || a.interiorRatio[j] != b.interiorRatio[j]) return false;
    return true;
}

}  // namespace

DilatationReport assemble_qc_map(const RationalQD& q1, const RationalQD& q2, const AssembleOptions& opt) {
    if (q1.size() != q2.size()) throw Error("combinatorics mismatch: different singularity counts");
    for (std::size_t j = 0; j < q1.size(); ++j)
        if (q1.sing[j].order != q2.sing[j].order || q1.sing[j].marked != q2.sing[j].marked)
            throw Error("combinatorics mismatch: singularity " + std::to_string(j) + " differs in type");
    const NrrpSystem S1 = nrrp_system(q1, opt.delta, opt.nrrp);
    const NrrpSystem S2 = nrrp_system(q2, opt.delta, opt.nrrp, S1.parts, S1.R);
    DilatationReport rep;

    for (std::size_t a = 0; a < S1.nrrps.size(); ++a) {
        const NRRP& P1 = S1.nrrps[a];
        const NRRP& P2 = S2.nrrps[a];
        if (P1.side_count() != P2.side_count()) throw Error("combinatorics mismatch: NRRP " + std::to_string(a));
        const std::string id = std::to_string(a);
        if (P1.side_count() == 2) {
            // cone angle pi: the polygon is half of a rectangle; the map is affine on it
            const double u = P2.sides[0].length / P1.sides[0].length, v = P2.sides[1].length / P1.sides[1].length;
            const double K = std::max(u, v) / std::min(u, v);
            rep.regions.push_back({"nrrp:" + id, "nrrp", K, "single pole, side ratios " + fmt(u) + ", " + fmt(v)});
            continue;
        }
        const DoubleResult d1 = double_nrrp(P1, opt.dbl);
        DoubleOptions o2 = opt.dbl;
        o2.guess = DoubleGuess{std::vector<double>(d1.corners.begin() + 2, d1.corners.end()), d1.interior,
                               std::log(d1.q.scale.real())};
        // identical polygons share one double so the boundary map is exactly the identity
        const DoubleResult d2 = same_nrrp(P1, P2) ? d1 : double_nrrp(P2, o2);
        for (const auto* d : {&d1, &d2})
            if (!(d->residual < 1e-8) || !(d->ratioResidual < 1e-8))
                throw Error("NRRP " + id + ": doubling did not converge (residual " + fmt(d->residual) + ")");
        const BoundaryMap h = boundary_map_between(d1, d2, opt.samplesPerSide);
        const double W = d1.corners.back() + 1.0;
        Grid g{-0.5, W - 0.5, 0.02 * W, 0.6 * W, opt.gridN, opt.gridN};
        std::vector<cplx> excl(d1.corners.begin(), d1.corners.end());
        std::vector<double> rs = opt.rSweep.empty() ? std::vector<double>{opt.r} : opt.rSweep;
        double best = std::numeric_limits<double>::infinity(), bestR = rs[0];
        PlaneMap bestF;
        const bool identity = h.xs() == h.ys();
        for (double r : rs) {
            // identity boundary: the extension is x + i r y / 2 in closed form
            const PlaneMap f = identity ? PlaneMap([r](cplx z) { return cplx(z.real(), 0.5 * r * z.imag()); })
                                        : beurling_ahlfors(h, r);
            const double Kr = identity ? std::max(0.5 * r, 2.0 / r) : dilatation_field(f, g, opt.step * W, excl).maxK;
            if (Kr < best) {
                best = Kr;
                bestR = r;
                bestF = f;
            }
        }
        double K = best;
        std::string detail = "r = " + fmt(bestR) + ", K_BA = " + fmt(best);
        for (std::size_t j = 0; j < P1.interiorSing.size(); ++j) {
            const auto& s = P1.interiorSing[j];
            if (s.order != -1 && s.order != 0) continue;
            const Shear sh = marked_point_shear(d2.interior[j], bestF(d1.interior[j]));
            rep.regions.push_back({"shear:" + id, "shear", sh.K, "interior point " + std::to_string(P1.interior[j])});
            K *= sh.K;
            detail += ", shear " + fmt(sh.K);
        }
        rep.regions.push_back({"nrrp:" + id, "nrrp", K, detail});
    }

    // complement: PL proxy on a planar Delaunay triangulation of the corners
    std::vector<cplx> c1, c2;
    std::vector<std::vector<cplx>> loops;
    for (std::size_t a = 0; a < S1.nrrps.size(); ++a) {
        c1.insert(c1.end(), S1.nrrps[a].corners.begin(), S1.nrrps[a].corners.end());
        c2.insert(c2.end(), S2.nrrps[a].corners.begin(), S2.nrrps[a].corners.end());
        loops.push_back(boundary_loop(S1.nrrps[a]));
    }
    // triangulating the midpoints keeps the combinatorics unchanged when q1 and q2 are swapped
    std::vector<cplx> mid(c1.size());
    for (std::size_t k = 0; k < c1.size(); ++k) mid[k] = 0.5 * (c1[k] + c2[k]);
    auto tris = planar_delaunay(mid);
    for (auto& t : tris)
        if (orient(c1[t[0]], c1[t[1]], c1[t[2]]) < 0.0) std::swap(t[1], t[2]);
    std::map<std::pair<int, int>, int> edgeUse;
    for (const auto& t : tris)
        for (int k = 0; k < 3; ++k) ++edgeUse[{std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])}];
    int kept = 0, dropped = 0;
    for (const auto& t : tris) {
        const std::array<cplx, 3> z1{c1[t[0]], c1[t[1]], c1[t[2]]}, z2{c2[t[0]], c2[t[1]], c2[t[2]]};
        const cplx cen = (z1[0] + z1[1] + z1[2]) / 3.0;
        bool inside = false;
        for (const auto& L : loops) inside = inside || winding(L, cen) != 0;
        if (inside || has_sing_inside(q1, z1) || has_sing_inside(q2, z2) || orient(z2[0], z2[1], z2[2]) <= 0.0) {
            ++dropped;
            continue;
        }
        const double K = affine_between(develop(q1, z1), develop(q2, z2)).K;
        rep.regions.push_back({"pl:" + std::to_string(kept++), "pl", K, ""});
    }
    // triangles on the hull edges with infinity, developed in w = 1/(z - zc)
    cplx zc{};
    for (const cplx z : c1) zc += z;
    zc /= static_cast<double>(c1.size());
    const Mobius T{0.0, 1.0, 1.0, -zc};
    const RationalQD w1 = mobius_transform(q1, T), w2 = mobius_transform(q2, T);
    for (const auto& t : tris)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (edgeUse[{std::min(a, b), std::max(a, b)}] != 1) continue;
            // hull edge a -> b has the hull on its left; the outer triangle is (b, a, inf)
            const std::array<cplx, 3> u1{T.apply(c1[b]), T.apply(c1[a]), cplx{}}, u2{T.apply(c2[b]), T.apply(c2[a]), cplx{}};
            if (has_sing_inside(w1, u1) || has_sing_inside(w2, u2)) {
                ++dropped;
                continue;
            }
            const double K = affine_between(develop(w1, u1), develop(w2, u2)).K;
            rep.regions.push_back({"pl:" + std::to_string(kept++), "pl", K, "outer"});
        }
    rep.regions.push_back({"pl:dropped", "pl", 1.0, std::to_string(dropped) + " triangles meet an NRRP or a singularity"});
    finish(rep);
    return rep;
}

}  // namespace qdf
