#pragma once

#include <optional>

#include "qdflat/qdiff.hpp"

namespace qdf {

enum class ClusterMetric { Complex, Flat };

// Maximal subsets (>= 2 points, not the whole set) whose pairwise distances are at most
// delta times every distance from the subset to the rest. dist is symmetric n x n, row-major.
std::vector<std::vector<int>> delta_clusters(const std::vector<double>& dist, int n, double delta);
std::vector<std::vector<int>> delta_clusters(const std::vector<cplx>& pts, double delta);
std::vector<std::vector<int>> delta_clusters(const RationalQD& q, double delta, ClusterMetric metric);

// Pairwise distance matrix between the finite singularities of q.
std::vector<double> singularity_distances(const RationalQD& q, ClusterMetric metric, double tol = 1e-6);

struct ClusterNode {
    std::vector<int> members;  // indices into q.sing, sorted
    int parent = -1;
    std::vector<int> children;
    double diamC = 0.0;
    double diamQ = 0.0;
    int totalOrder = 0;  // m_l
    int markedCount = 0;
};

struct ClusterTree {
    double delta = 0.1;
    ClusterMetric metric = ClusterMetric::Complex;
    std::vector<ClusterNode> nodes;  // nodes[0] is the root (all singularities)
};

ClusterTree cluster_tree(const RationalQD& q, double delta = 0.1, ClusterMetric metric = ClusterMetric::Complex,
                         bool annotateFlat = true);

// Order-weighted mean; requires positive total order.
cplx cluster_center(const std::vector<std::pair<cplx, int>>& cluster);
cplx cluster_center(const RationalQD& q, const std::vector<int>& members);

// Minimal total displacement over type-preserving bijections plus |lambda1 - lambda2|.
double d_sym(const RationalQD& q1, const RationalQD& q2);

struct ClusterProjection {
    ClusterDifferential alpha;
    cplx center{};  // cluster center in the z-plane
    cplx t{};       // lambda * prod_{j outside} (c - z_j)^{e_j}
    cplx root{};    // chosen t^{1/(m+2)}; w = root * (z - center)
    std::vector<int> members;  // q index of each alpha root, in order
    int m = 0;
};

// Model cluster differential of the members. rootHint selects the (m+2)-th root nearest
// to it (continuation along a family); the principal root otherwise.
ClusterProjection project_to_cluster_differential(const RationalQD& q, const std::vector<int>& members,
                                                  std::optional<cplx> rootHint = std::nullopt);

// max over the alpha spanning-tree chart of |P_q - s P_alpha| with one global sign s,
// the q contour being the pullback of the alpha contour.
double projection_defect(const RationalQD& q, const ClusterProjection& proj, double tol = 1e-13);

struct HolderRow {
    double eps = 0.0;
    double dSym = 0.0;
    double dPeriods = 0.0;  // d_euclidean_chart(q(eps), q(compareFactor * eps))
};

struct HolderReport {
    std::vector<HolderRow> rows;
    int k = 0;
    double expected = 0.0;  // (2 + k) / 2 for k >= 2, 1 for k = 1
    double slope = 0.0;
    double slopeCI = 0.0;
    std::vector<double> residuals;
};

// Period difference against d_Sym for the pair (eps, compareFactor * eps).
HolderReport holder_exponent_probe(const ClusterFamily& family, const std::vector<double>& eps,
                                   double tol = 1e-13);

}  // namespace qdf
