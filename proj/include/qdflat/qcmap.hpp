#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "qdflat/nrrp.hpp"
#include "qdflat/surfaces.hpp"

namespace qdf {

// Strictly increasing samples of a homeomorphism of R, monotone cubic (pchip) in between.
class BoundaryMap {
public:
    BoundaryMap() = default;
    BoundaryMap(std::vector<double> x, std::vector<double> y);
    // Samples f at n points spread over [a, b] plus the integers inside it.
    static BoundaryMap from_function(const std::function<double(double)>& f, double a, double b, int n = 4096);

    double operator()(double t) const;  // throws outside [lo, hi]
    double lo() const { return x_.front(); }
    double hi() const { return x_.back(); }
    const std::vector<double>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }
    bool fixes_zero_and_one(double tol = 1e-12) const;

private:
    std::vector<double> x_, y_;
    std::shared_ptr<const std::function<double(double)>> interp_;
};

struct SamplePlan {
    std::vector<double> x;  // base points
    std::vector<double> t;  // offsets, t > 0
    static SamplePlan grid(double a, double b, int nx, double tMin, double tMax, int nt);
};

struct QuasisymmetryEstimate {
    double rho = 1.0;  // lower bound for the true constant
    double argX = 0.0, argT = 0.0;
    int samples = 0;   // (x, t) pairs inside the sampled range
};

QuasisymmetryEstimate quasisymmetry_constant(const BoundaryMap& h, const SamplePlan& plan);

using PlaneMap = std::function<cplx(cplx)>;

// f_r(x+iy) = 1/2 int_0^1 [h(x+yt) + h(x-yt)] dt + i r/2 int_0^1 [h(x+yt) - h(x-yt)] dt
PlaneMap beurling_ahlfors(const BoundaryMap& h, double r, double tol = 1e-13);

struct Grid {
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    int nx = 10, ny = 10;
    std::vector<cplx> points() const;
};

struct DilatationField {
    std::vector<cplx> points;
    std::vector<double> K;
    double maxK = 1.0;
    cplx argMax{};
    int excluded = 0;
};

// Central differences with the given step; points within `eps` of an excluded point are
// skipped (eps <= 0 selects 2 * step).
DilatationField dilatation_field(const PlaneMap& f, const Grid& grid, double step,
                                 const std::vector<cplx>& exclude = {}, double eps = 0.0);

// K of the real-linear map a z + b conj(z); throws on orientation failure.
double dilatation_of(cplx a, cplx b);

// Affine map sending triangle s to triangle d (corner k to corner k).
struct AffineTri {
    cplx a{}, b{}, c{};  // z -> a z + b conj(z) + c
    double K = 1.0;
};
AffineTri affine_between(const std::array<cplx, 3>& s, const std::array<cplx, 3>& d);

struct PlDilatation {
    std::vector<double> K;
    double maxK = 1.0;
    int argMax = -1;
};

PlDilatation pl_map_dilatation(const std::vector<std::array<cplx, 3>>& src,
                               const std::vector<std::array<cplx, 3>>& dst);
// Face f of t1 goes to face correspondence[f] of t2 (identity when empty), corners in order.
PlDilatation pl_map_dilatation(const Triangulation& t1, const Triangulation& t2,
                               const std::vector<int>& correspondence = {});

// The real-linear map fixing R pointwise with source -> target.
struct Shear {
    cplx a{1.0}, b{0.0};  // z -> a z + b conj(z)
    double K = 1.0;
    cplx apply(cplx z) const { return a * z + b * std::conj(z); }
};
Shear marked_point_shear(cplx target, cplx source);

// Arc-length correspondence between the real lines of two doubles, side by side.
// Sides through infinity are sampled out to |x| ~ 1e4.
BoundaryMap boundary_map_between(const DoubleResult& d1, const DoubleResult& d2, int samplesPerSide = 256,
                                 double tol = 1e-13);

struct RegionK {
    std::string id;
    std::string kind;  // "pl", "nrrp", "shear"
    double K = 1.0;
    std::string detail;
};

struct DilatationReport {
    double K = 1.0;
    double teichBound = 0.0;  // (1/2) log K
    std::vector<RegionK> regions;
};

struct AssembleOptions {
    double delta = 0.1;
    double r = 2.0;
    std::vector<double> rSweep;  // when nonempty, each NRRP keeps the best r from this list
    int gridN = 24;              // dilatation grid per NRRP (gridN x gridN)
    double step = 1e-4;          // finite-difference step, relative to the NRRP window
    int samplesPerSide = 256;
    NrrpOptions nrrp;
    DoubleOptions dbl;
};

// Polygon surfaces: PL map between the Delaunay triangulations (matched combinatorics).
DilatationReport assemble_qc_map(const HalfTranslationSurface& s1, const HalfTranslationSurface& s2,
                                 const AssembleOptions& opt = {});
// Sphere differentials: NRRP system of q1 (same parts and R for q2), Beurling-Ahlfors on
// each doubled NRRP, shear for a pole or marked point, PL proxy on the complement.
DilatationReport assemble_qc_map(const RationalQD& q1, const RationalQD& q2, const AssembleOptions& opt = {});

}  // namespace qdf
