#pragma once

#include <array>
#include <optional>

#include "qdflat/common.hpp"

namespace qdf {

// Counter-clockwise vertex list; edge k runs from v[k] to v[k+1].
struct Polygon {
    std::vector<cplx> v;
};

// (polyA, edgeA) <-> (polyB, edgeB). sign +1: translation (edge vectors opposite),
// sign -1: half-turn z -> -z + c (edge vectors equal). A side glued to itself with
// sign -1 is folded at its midpoint.
struct Gluing {
    int polyA = 0, edgeA = 0, polyB = 0, edgeB = 0;
    int sign = 1;
};

struct PolygonSpec {
    std::vector<Polygon> polygons;
    std::vector<Gluing> gluings;
};

struct ConePoint {
    double angle = 0.0;  // total cone angle
    int order = 0;       // angle / pi - 2
    bool marked = false; // regular point kept as a vertex
    int poly = 0;        // one representative corner
    int corner = 0;
    cplx position{};     // representative position in that polygon
};

struct HalfTranslationSurface {
    // Polygons after self-glued sides were split at their midpoints.
    std::vector<Polygon> polygons;
    // partner[p][k] = (poly, edge, sign) glued to side k of polygon p.
    std::vector<std::vector<std::array<int, 3>>> partner;
    std::vector<std::vector<int>> vertexClass;  // class of each polygon corner
    std::vector<ConePoint> singularities;
    int eulerCharacteristic = 0;
    int genus = 0;
};

HalfTranslationSurface build_from_polygons(const PolygonSpec& spec);

// Triangles with developed coordinates; corner k of a face sits at p[k] and is
// vertex v[k]; side k joins corner k to corner k+1 and is edge e[k].
struct Face {
    std::array<int, 3> v{};
    std::array<cplx, 3> p{};
    std::array<int, 3> e{};
};

struct EdgeRec {
    std::array<int, 2> face{-1, -1};
    std::array<int, 2> side{-1, -1};
    int slopeSign = 0;  // +1 non-negative slope, -1 non-positive, 0 axis-aligned (both)
};

enum class TriKind { Initial, Delaunay, LinfDelaunay };

struct Triangulation {
    std::vector<ConePoint> vertices;
    std::vector<Face> faces;
    std::vector<EdgeRec> edges;
    TriKind kind = TriKind::Initial;
    int flips = 0;

    cplx edge_vector(int e) const;  // up to sign
    double edge_length(int e) const { return std::abs(edge_vector(e)); }
    int euler_characteristic() const;
    std::size_t state_hash() const;
};

// Ear clipping of every polygon; polygon sides and diagonals become edges.
Triangulation initial_triangulation(const HalfTranslationSurface& s);

struct FlipOptions {
    int maxFlips = 10000;
    double tol = 1e-12;  // relative tolerance of the local predicates
};

Triangulation delaunay(const HalfTranslationSurface& s, const FlipOptions& opt = {});
Triangulation delaunay(Triangulation t, const FlipOptions& opt = {});
Triangulation linf_delaunay(const HalfTranslationSurface& s, const FlipOptions& opt = {});
Triangulation linf_delaunay(Triangulation t, const FlipOptions& opt = {});

// Local predicates on a developed quad: edge ab with c, d opposite (c on the left of a->b).
bool locally_delaunay(cplx a, cplx b, cplx c, cplx d, double tol = 1e-12);
bool locally_linf_delaunay(cplx a, cplx b, cplx c, cplx d, double tol = 1e-12);

// Exists an axis-parallel square with a, b, c on its boundary, side <= maxSide,
// and none of `others` in its open interior.
bool empty_circumsquare(cplx a, cplx b, cplx c, const std::vector<cplx>& others, double maxSide,
                        double tol = 1e-12);

struct CertificateReport {
    bool ok = true;
    int failingFace = -1;
    std::string detail;
    int developedCopies = 0;  // faces unfolded while checking
};

// Brute force: each face's circumdisk (or some circumsquare) is unfolded across edges
// and checked empty of developed vertices.
CertificateReport certify_delaunay(const Triangulation& t, double tol = 1e-9);
CertificateReport certify_linf_delaunay(const Triangulation& t, double maxSide, double tol = 1e-9);

struct DiameterEstimate {
    double diameter = 0.0;
    int samplesPerFace = 0;
};

// Max eccentricity of a sample graph whose edges are straight segments through
// chains of at most `depth` unfolded faces.
DiameterEstimate surface_diameter(const Triangulation& t, int subdivisions = 6, int depth = 3);

struct SubgraphWitness {
    bool connected = true;
    std::vector<std::pair<int, int>> spanning;  // tree edges (vertex pairs) when connected
    std::vector<int> sideA, sideB;              // cut when disconnected
};

SubgraphWitness cluster_subgraph_connected(const Triangulation& t, const std::vector<int>& D);

// Vertex whose representative lies at z in polygon `poly` (coordinates after splitting).
std::optional<int> vertex_at(const Triangulation& t, const HalfTranslationSurface& s, int poly, cplx z,
                             double tol = 1e-9);

// Simple SVG of the developed faces laid out one per cell.
std::string triangulation_svg(const Triangulation& t);

// Small named corpus: square, 2x1, hexagonal tori, pillowcases, L-shape, octagon ...
struct NamedSurface {
    std::string name;
    PolygonSpec spec;
};
std::vector<NamedSurface> surface_corpus();

PolygonSpec torus_spec(cplx a, cplx b);            // parallelogram with sides a, b
PolygonSpec pillowcase_spec(cplx a, cplx b);       // parallelogram, every side folded

}  // namespace qdf
