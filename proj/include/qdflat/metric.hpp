#pragma once

#include "qdflat/qdiff.hpp"

namespace qdf {

struct Window {
    cplx center{};
    double half = 1.0;  // square [cx - half, cx + half] x [cy - half, cy + half]
    bool contains(cplx z) const;
};

// Grid plus special nodes, edges weighted by the flat length of straight segments.
struct MetricMesh {
    Window window;
    std::vector<cplx> nodes;
    std::vector<bool> special;       // singularities and query points
    std::vector<bool> onBoundary;    // grid nodes on the outer rim
    std::vector<int> offsets;        // CSR row starts
    std::vector<int> targets;
    std::vector<double> weights;
    double spacing = 0.0;
    int refinementLevel = 0;
};

// Uniform grid of the window with n cells per side.
MetricMesh build_mesh(const RationalQD& q, const Window& w, int n, const std::vector<cplx>& extra);

struct MeshPath {
    double length = 0.0;
    std::vector<int> nodes;
};

MeshPath shortest_path(const MetricMesh& mesh, int src, int dst);

// Flat length of a straight segment, fixed Gauss-Legendre with endpoint substitution.
double segment_flat_length(const RationalQD& q, cplx a, cplx b, int gl = 8);

struct DistanceResult {
    double distance = 0.0;
    double errorBound = 0.0;
    std::vector<double> levels;   // running minimum per refinement stage
    std::vector<cplx> path;
    int windowEnlargements = 0;
};

DistanceResult flat_distance(const RationalQD& q, cplx a, cplx b, double tol = 1e-6);

struct DiameterResult {
    double diameter = 0.0;
    double errorBound = 0.0;
    int argI = -1, argJ = -1;
};

DiameterResult singular_diameter(const RationalQD& q, const std::vector<cplx>& S, double tol = 1e-6);

struct BallRow {
    double r = 0.0;
    double distance = 0.0;
    double slopeRunning = 0.0;  // slope through the rows so far (0 for the first)
};

struct BallScalingReport {
    std::vector<BallRow> rows;
    int m = 0;
    double expected = 0.0;  // (2 + m) / 2
    double slope = 0.0;
    double slopeCI = 0.0;
    double prefactor = 0.0;       // exp(intercept)
    double prefactorRatio = 0.0;  // prefactor / |f(0)/g(0)|^{1/2}
};

// Cluster points of the family sit at center + (clusterFraction * r) * z for radius r.
// d_q(center, boundary of B_r) via circle screening and mesh refinement at the best angle.
BallScalingReport ball_scaling_probe(const ClusterFamily& family, const std::vector<double>& radii,
                                     double clusterFraction = 0.25, double tol = 1e-7);

}  // namespace qdf
