#pragma once

#include <optional>

#include "qdflat/qdiff.hpp"

namespace qdf {

// One boundary side: straight in the flat metric, direction u (a power of i).
struct NrrpSide {
    cplx dir{};
    double length = 0.0;
    std::vector<cplx> z;  // z-plane samples, first = start corner, last = end corner
};

// Right polygon around a part of the singularities; corners turn left by pi/2.
struct NRRP {
    std::vector<NrrpSide> sides;
    std::vector<cplx> corners;                 // z-plane, corners[k] starts side k
    std::vector<int> interior;                 // indices into source.sing
    std::vector<SingularityRecord> interiorSing;
    // (zeta(z_j) - zeta(corner 0)) / period of side 0, same branch
    std::vector<cplx> interiorRatio;
    cplx center{};
    cplx t{};
    int m = 0;         // total order of the part
    double R = 0.0;    // nominal half side
    double radius = 0.0;  // min flat distance boundary -> interior singularity (segment estimate)
    double closure = 0.0; // |z_end - z_start| after correction
    bool degenerate = false;  // no interior singularity (solver harness only)

    int side_count() const { return static_cast<int>(sides.size()); }
    std::vector<double> side_lengths() const;
    int pole_count() const;
    bool has_pole_or_marked() const;
};

struct NrrpOptions {
    double closureTol = 1e-12;  // relative to R
    int maxCorrections = 30;
    double stepFraction = 0.05;  // z-step <= fraction * distance to nearest singularity
};

// Traces the polygon around `members` with nominal half side R.
NRRP trace_nrrp(const RationalQD& q, const std::vector<int>& members, double R, const NrrpOptions& opt = {});

// Rectangle with sides a, b, a, b and nothing inside.
NRRP rectangle_nrrp(double a, double b);

struct NrrpSystem {
    std::vector<std::vector<int>> parts;
    std::vector<NRRP> nrrps;
    double separation = 0.0;  // min flat segment length between different boundaries
    double maxSide = 0.0;
    bool separated = false;   // separation > 2 * maxSide on the configuration at hand
    std::vector<double> R;    // nominal half side per part
};

// Parts are the maximal delta-clusters plus singletons. Each part gets z-radius a quarter
// of its distance to the nearest other part; `parts` and `R` override the partition and
// the nominal half sides (used to match a second differential to a first).
NrrpSystem nrrp_system(const RationalQD& q, double delta, const NrrpOptions& opt = {},
                       const std::optional<std::vector<std::vector<int>>>& parts = std::nullopt,
                       const std::optional<std::vector<double>>& R = std::nullopt);

// Real-symmetric sphere differential whose upper half is the polygon: corners go to
// simple poles c_0 = 0 < c_1 = 1 < ... < c_{n-2} on R and c_{n-1} = infinity.
struct DoubleGuess {
    std::vector<double> corners;   // c_2 .. c_{n-2}
    std::vector<cplx> interior;    // upper half-plane
    double logScale = 0.0;         // log lambda
};

struct DoubleResult {
    RationalQD q;
    std::vector<double> corners;   // c_0 .. c_{n-2}
    std::vector<cplx> interior;
    double residual = 0.0;         // max relative side-length residual
    double ratioResidual = 0.0;    // max interior-position residual
    std::vector<double> history;   // residual norm per iterate (initial first)
    int iterations = 0;
    double order = 0.0;            // observed convergence order (0 when not measurable)
    bool converged = false;
};

struct DoubleOptions {
    int maxIter = 40;
    double tol = 1e-12;
    double quadTol = 1e-14;
    double fdStep = 1e-7;
    std::optional<DoubleGuess> guess;
};

DoubleResult double_nrrp(const NRRP& P, const DoubleOptions& opt = {});

// Side lengths (flat) of a real-symmetric double between consecutive corners.
std::vector<double> double_side_lengths(const RationalQD& q, const std::vector<double>& corners, double tol = 1e-14);

// Default starting point: corners by cumulative side length, interior points above.
DoubleGuess default_double_guess(const NRRP& P);

}  // namespace qdf
