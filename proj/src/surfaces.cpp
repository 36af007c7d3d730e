#include "qdflat/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace qdf {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

double signed_area(const Polygon& P) {
    double A = 0.0;
    const std::size_t n = P.v.size();
    for (std::size_t k = 0; k < n; ++k) A += cross(P.v[k], P.v[(k + 1) % n]);
    return 0.5 * A;
}

// Interior angle at corner k of a ccw polygon, in (0, 2 pi).
double corner_angle(const Polygon& P, std::size_t k) {
    const std::size_t n = P.v.size();
    const cplx out = P.v[(k + 1) % n] - P.v[k];
    const cplx in = P.v[(k + n - 1) % n] - P.v[k];
    double a = std::arg(in / out);
    if (a <= 0.0) a += 2.0 * kPi;
    return a;
}

std::string side_name(int p, int k) { return "(" + std::to_string(p) + "," + std::to_string(k) + ")"; }

}  // namespace

HalfTranslationSurface build_from_polygons(const PolygonSpec& spec) {
    const int np = static_cast<int>(spec.polygons.size());
    if (np == 0) throw Error("polygon spec has no polygons");
    double scale = 0.0;
    for (int p = 0; p < np; ++p) {
        const auto& P = spec.polygons[p];
        if (P.v.size() < 3) throw Error("polygon " + std::to_string(p) + " has fewer than 3 vertices");
        if (!(signed_area(P) > 0.0)) throw Error("polygon " + std::to_string(p) + " is not counter-clockwise");
        for (const auto& z : P.v) scale = std::max(scale, std::abs(z));
    }
    const double tol = 1e-7 * std::max(scale, 1.0);  // side congruence; angles use 1e-9 rad

    // who[p][k] = gluing index, checked for exactly-once coverage
    std::vector<std::vector<int>> who(np);
    for (int p = 0; p < np; ++p) who[p].assign(spec.polygons[p].v.size(), -1);
    auto side_vec = [&](int p, int k) {
        const auto& v = spec.polygons[p].v;
        return v[(k + 1) % v.size()] - v[k];
    };
    for (std::size_t g = 0; g < spec.gluings.size(); ++g) {
        const Gluing& G = spec.gluings[g];
        for (auto [p, k] : {std::pair{G.polyA, G.edgeA}, std::pair{G.polyB, G.edgeB}}) {
            if (p < 0 || p >= np || k < 0 || k >= static_cast<int>(spec.polygons[p].v.size()))
                throw Error("gluing refers to missing side " + side_name(p, k));
        }
        if (G.sign != 1 && G.sign != -1) throw Error("gluing sign must be +1 or -1");
        const bool self = G.polyA == G.polyB && G.edgeA == G.edgeB;
        if (self && G.sign != -1) throw Error("side " + side_name(G.polyA, G.edgeA) + " glued to itself by a translation");
        if (who[G.polyA][G.edgeA] >= 0 || (!self && who[G.polyB][G.edgeB] >= 0))
            throw Error("side glued twice: " + side_name(G.polyA, G.edgeA) + " <-> " + side_name(G.polyB, G.edgeB));
        who[G.polyA][G.edgeA] = static_cast<int>(g);
        who[G.polyB][G.edgeB] = static_cast<int>(g);
        const cplx va = side_vec(G.polyA, G.edgeA), vb = side_vec(G.polyB, G.edgeB);
        const double mis = G.sign == 1 ? std::abs(va + vb) : std::abs(va - vb);
        if (mis > tol)
            throw Error("incongruent gluing " + side_name(G.polyA, G.edgeA) + " <-> " + side_name(G.polyB, G.edgeB) +
                        " (mismatch " + std::to_string(mis) + ")");
    }
    for (int p = 0; p < np; ++p)
        for (std::size_t k = 0; k < who[p].size(); ++k)
            if (who[p][k] < 0) throw Error("unglued edge " + side_name(p, static_cast<int>(k)));

    // Split folded sides at their midpoints.
    HalfTranslationSurface S;
    std::vector<std::vector<int>> firstNew(np);  // old side -> first new side index
    for (int p = 0; p < np; ++p) {
        const auto& P = spec.polygons[p];
        Polygon Q;
        for (std::size_t k = 0; k < P.v.size(); ++k) {
            firstNew[p].push_back(static_cast<int>(Q.v.size()));
            Q.v.push_back(P.v[k]);
            const Gluing& G = spec.gluings[who[p][k]];
            if (G.polyA == G.polyB && G.edgeA == G.edgeB) Q.v.push_back(0.5 * (P.v[k] + P.v[(k + 1) % P.v.size()]));
        }
        S.polygons.push_back(std::move(Q));
    }
    S.partner.resize(np);
    for (int p = 0; p < np; ++p) S.partner[p].assign(S.polygons[p].v.size(), {-1, -1, 0});
    for (const Gluing& G : spec.gluings) {
        const int a = firstNew[G.polyA][G.edgeA], b = firstNew[G.polyB][G.edgeB];
        if (G.polyA == G.polyB && G.edgeA == G.edgeB) {
            S.partner[G.polyA][a] = {G.polyA, a + 1, -1};
            S.partner[G.polyA][a + 1] = {G.polyA, a, -1};
        } else {
            S.partner[G.polyA][a] = {G.polyB, b, G.sign};
            S.partner[G.polyB][b] = {G.polyA, a, G.sign};
        }
    }

    // Corner classes: side (p,k) glued to (p',k') identifies k ~ k'+1 and k+1 ~ k'.
    std::vector<int> base(np + 1, 0);
    for (int p = 0; p < np; ++p) base[p + 1] = base[p] + static_cast<int>(S.polygons[p].v.size());
    UnionFind uf(base[np]);
    int sides = 0;
    for (int p = 0; p < np; ++p) {
        const int n = static_cast<int>(S.polygons[p].v.size());
        for (int k = 0; k < n; ++k) {
            const auto [q, j, sg] = S.partner[p][k];
            (void)sg;
            const int m = static_cast<int>(S.polygons[q].v.size());
            uf.unite(base[p] + k, base[q] + (j + 1) % m);
            uf.unite(base[p] + (k + 1) % n, base[q] + j);
            ++sides;
        }
    }
    std::map<int, int> classOf;
    S.vertexClass.resize(np);
    for (int p = 0; p < np; ++p) {
        const int n = static_cast<int>(S.polygons[p].v.size());
        for (int k = 0; k < n; ++k) {
            const int r = uf.find(base[p] + k);
            auto it = classOf.find(r);
            if (it == classOf.end()) {
                it = classOf.emplace(r, static_cast<int>(S.singularities.size())).first;
                ConePoint c;
                c.poly = p;
                c.corner = k;
                c.position = S.polygons[p].v[k];
                S.singularities.push_back(c);
            }
            S.vertexClass[p].push_back(it->second);
            S.singularities[it->second].angle += corner_angle(S.polygons[p], k);
        }
    }
    double defect = 0.0;
    for (std::size_t c = 0; c < S.singularities.size(); ++c) {
        auto& cp = S.singularities[c];
        const double r = cp.angle / kPi;
        const long m = std::lround(r);
        if (std::abs(cp.angle - m * kPi) > 1e-9)
            throw Error("cone angle " + std::to_string(cp.angle) + " at vertex " + std::to_string(c) +
                        " is not a multiple of pi");
        cp.order = static_cast<int>(m) - 2;
        if (cp.order < -1) throw Error("cone angle below pi at vertex " + std::to_string(c));
        cp.marked = cp.order == 0;
        defect += 2.0 * kPi - cp.angle;
    }
    S.eulerCharacteristic = static_cast<int>(S.singularities.size()) - sides / 2 + np;
    if (std::abs(defect - 2.0 * kPi * S.eulerCharacteristic) > 1e-8)
        throw Error("Gauss-Bonnet check failed: angle defect " + std::to_string(defect) + " vs 2 pi chi, chi = " +
                    std::to_string(S.eulerCharacteristic));
    if ((2 - S.eulerCharacteristic) % 2 != 0) throw Error("odd Euler characteristic defect");
    S.genus = (2 - S.eulerCharacteristic) / 2;
    return S;
}

std::optional<int> vertex_at(const Triangulation& t, const HalfTranslationSurface& s, int poly, cplx z, double tol) {
    (void)t;
    if (poly < 0 || poly >= static_cast<int>(s.polygons.size())) return std::nullopt;
    const auto& v = s.polygons[poly].v;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (std::abs(v[k] - z) <= tol) return s.vertexClass[poly][k];
    return std::nullopt;
}

PolygonSpec torus_spec(cplx a, cplx b) {
    PolygonSpec s;
    s.polygons.push_back({{0.0, a, a + b, b}});
    if (!(signed_area(s.polygons[0]) > 0.0)) throw Error("torus sides must be positively oriented");
    s.gluings = {{0, 0, 0, 2, 1}, {0, 1, 0, 3, 1}};
    return s;
}

PolygonSpec pillowcase_spec(cplx a, cplx b) {
    PolygonSpec s;
    s.polygons.push_back({{0.0, a, a + b, b}});
    if (!(signed_area(s.polygons[0]) > 0.0)) throw Error("pillowcase sides must be positively oriented");
    for (int k = 0; k < 4; ++k) s.gluings.push_back({0, k, 0, k, -1});
    return s;
}

std::vector<NamedSurface> surface_corpus() {
    std::vector<NamedSurface> c;
    c.push_back({"square-torus", torus_spec(1.0, {0.0, 1.0})});
    c.push_back({"rect-2x1-torus", torus_spec(2.0, {0.0, 1.0})});
    c.push_back({"hex-torus", torus_spec(1.0, std::polar(1.0, kPi / 3))});
    c.push_back({"skew-torus", torus_spec(1.0, {0.3, 0.8})});
    c.push_back({"pillowcase", pillowcase_spec(1.0, {0.0, 1.0})});
    c.push_back({"pillowcase-2x1", pillowcase_spec(2.0, {0.0, 1.0})});
    c.push_back({"thin-pillowcase", pillowcase_spec(1.0, {0.0, 0.1})});
    c.push_back({"skew-pillowcase", pillowcase_spec(1.0, {0.4, 0.9})});
    {
        // three-square L: genus 2, one cone point of angle 6 pi
        PolygonSpec s;
        s.polygons.push_back({{{0, 0}, {1, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}, {0, 1}}});
        s.gluings = {{0, 0, 0, 5, 1}, {0, 1, 0, 3, 1}, {0, 2, 0, 7, 1}, {0, 4, 0, 6, 1}};
        c.push_back({"L-shape", s});
    }
    {
        // regular octagon, opposite sides by translation
        PolygonSpec s;
        Polygon P;
        for (int k = 0; k < 8; ++k) P.v.push_back(std::polar(1.0, kPi / 8 + k * kPi / 4));
        s.polygons.push_back(P);
        for (int k = 0; k < 4; ++k) s.gluings.push_back({0, k, 0, k + 4, 1});
        c.push_back({"octagon", s});
    }
    return c;
}

std::string triangulation_svg(const Triangulation& t) {
    const int nf = static_cast<int>(t.faces.size());
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nf)))));
    double span = 0.0;
    for (const auto& f : t.faces)
        for (int k = 0; k < 3; ++k) span = std::max(span, std::abs(f.p[k] - f.p[(k + 1) % 3]));
    const double cell = 120.0, s = 0.8 * cell / std::max(span, 1e-12);
    std::ostringstream o;
    const int rows = (nf + cols - 1) / cols;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell << "\" height=\"" << rows * cell
      << "\">\n";
    for (int i = 0; i < nf; ++i) {
        const auto& f = t.faces[i];
        const cplx ctr = (f.p[0] + f.p[1] + f.p[2]) / 3.0;
        const double ox = (i % cols + 0.5) * cell, oy = (i / cols + 0.5) * cell;
        o << "<polygon fill=\"none\" stroke=\"black\" points=\"";
        for (int k = 0; k < 3; ++k) {
            const cplx w = (f.p[k] - ctr) * s;
            o << ox + w.real() << "," << oy - w.imag() << (k < 2 ? " " : "");
        }
        o << "\"/>\n";
        for (int k = 0; k < 3; ++k) {
            const cplx m = (0.5 * (f.p[k] + f.p[(k + 1) % 3]) - ctr) * s * 0.8;
            o << "<text font-size=\"9\" x=\"" << ox + m.real() << "\" y=\"" << oy - m.imag() << "\">e" << f.e[k]
              << "</text>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace qdf
