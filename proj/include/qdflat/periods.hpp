#pragma once

#include <Eigen/Dense>

#include "qdflat/qdiff.hpp"

namespace qdf {

// Piecewise-linear path. An endpoint may sit on a singularity only when flagged.
struct Contour {
    std::vector<cplx> vertices;
    std::array<bool, 2> endpointSingular{false, false};
    std::array<int, 2> endpointIndex{-1, -1};  // singularity index at each end, -1 if none
};

// Builds a contour and flags/snaps endpoints that coincide with singularities of q.
Contour make_contour(const RationalQD& q, std::vector<cplx> vertices);
// Straight segment between singularities i and j.
Contour segment_contour(const RationalQD& q, int i, int j);

struct PeriodValue {
    cplx value{};
    double error = 0.0;
};

// Integral of sqrt(q) along the contour with the branch continued from the start.
// Branch convention at the start: sqrt(z0 - z_j) principal for each factor, or
// sqrt(v1 - v0) for the factor sitting at a singular start.
PeriodValue period_detail(const RationalQD& q, const Contour& g, double tol = 1e-12);
cplx period(const RationalQD& q, const Contour& g, double tol = 1e-12);
cplx period(const ClusterDifferential& q, const Contour& g, double tol = 1e-12);

// The conventional root continued to v0 + s (v1 - v0), 0 < s <= 1, on the first segment.
cplx conventional_root(const RationalQD& q, const Contour& g, double s);

// Integral of |sqrt(q)| |dz|.
double flat_length(const RationalQD& q, const Contour& g, double tol = 1e-10);

// Same integrand machinery with modified exponents (orders[j] replaces e_j).
PeriodValue integrate_branch(cplx scale, const std::vector<cplx>& z, const std::vector<int>& orders,
                             const Contour& g, double tol);

struct PeriodChart {
    std::vector<Contour> contours;
    std::vector<std::pair<int, int>> edges;  // singularity indices (start, end)
    std::vector<int> branchChoices;          // sign applied to the conventional branch
    std::vector<cplx> values;
    std::vector<double> flatLengths;
};

// Kruskal tree on straight saddle-segment candidates; lengthBound <= 0 selects
// 4x the largest pairwise straight flat length.
PeriodChart spanning_tree_chart(const RationalQD& q, double lengthBound = 0.0, double tol = 1e-12);

// Same contour geometry re-anchored on the singularities of another differential.
Contour chart_contour(const RationalQD& q, const PeriodChart& chart, std::size_t k);

struct PeriodJacobian {
    Eigen::MatrixXcd matrix;       // (contour i, singularity j)
    std::vector<bool> finiteDiff;  // per entry (row-major) whether the endpoint family was used
};

PeriodJacobian period_jacobian(const RationalQD& q, const PeriodChart& chart, double tol = 1e-12);

struct PersistenceReport {
    bool persists = true;
    int contour = -1;    // pinched contour
    double tau = 0.0;    // homotopy parameter where it happened
    std::vector<int> signs;  // continued-branch sign of each contour at q2 relative to convention
    int scaleSign = 1;
};

PersistenceReport chart_persistence(const RationalQD& q1, const RationalQD& q2,
                                    const PeriodChart& chart, int samples = 257);

// max_k |P2_k - s P1_k| over the chart, s = +-1 minimizing (quotient convention).
double d_euclidean_chart(const RationalQD& q1, const RationalQD& q2, const PeriodChart& chart,
                         double tol = 1e-13);

struct ClusterLimitRow {
    double eps = 0.0;
    double diamC = 0.0;
    double internalRowNorm = 0.0;       // max over internal contours of the row 2-norm
    double scaledInternalNorm = 0.0;    // internalRowNorm / |t|^{1/2}
    double proportionalityDefect = 0.0; // max |e_j M_ik - e_k M_ij| over colliding j, k
    double onesRatio = 0.0;             // |M 1| / |M|
};

struct ClusterLimitReport {
    std::vector<ClusterLimitRow> rows;
    int m = 0;
    double expectedExponent = 0.0;  // m / 2
    double fittedExponent = 0.0;
    double fitCI = 0.0;
    bool defectMonotone = false;
};

ClusterLimitReport jacobian_cluster_limit_probe(const ClusterFamily& family,
                                                const std::vector<double>& eps,
                                                double tol = 1e-13);

}  // namespace qdf
