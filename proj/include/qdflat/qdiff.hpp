#pragma once

#include <array>
#include <utility>

#include "qdflat/common.hpp"

namespace qdf {

struct SingularityRecord {
    cplx z{};
    int order = 0;     // -1 simple pole, 0 marked regular point, k >= 1 zero
    bool marked = false;

    double cone_angle() const { return (order + 2) * kPi; }
};

// lambda * prod (z - z_j)^{e_j} dz^2 on the sphere.
struct RationalQD {
    cplx scale{1.0, 0.0};
    std::vector<SingularityRecord> sing;
    bool infinityMarked = false;  // only meaningful when infinity_order() == 0

    int finite_order_sum() const;
    int infinity_order() const { return -4 - finite_order_sum(); }
    std::size_t size() const { return sing.size(); }
    cplx eval(cplx z) const;  // coefficient q(z)
    std::vector<cplx> locations() const;
};

struct ValidityReport {
    bool ok = true;
    std::vector<std::string> issues;
    int infinityOrder = 0;
};

ValidityReport validate(const RationalQD& q);

// Polynomial p(z) dz^2 (monic, centred) or p(z)/z dz^2 with 0 marked.
struct ClusterDifferential {
    std::vector<std::pair<cplx, int>> roots;  // (location, order >= 1)
    bool markedAtZero = false;
    bool poleAtZero = false;

    int degree() const;  // m: sum of orders, counting the pole at 0 as -1
    RationalQD to_rational() const;
};

ValidityReport validate(const ClusterDifferential& q);

struct ScaledCluster {
    ClusterDifferential q;
    double factor = 1.0;  // predicted period factor t^{(m+2)/2}
};

ScaledCluster scale_singularities(const ClusterDifferential& q, double t);

// w = (a z + b) / (c z + d)
struct Mobius {
    cplx a{1.0}, b{0.0}, c{0.0}, d{1.0};
    cplx apply(cplx z) const;  // returns inf as {inf, 0}
    bool sends_to_infinity(cplx z) const;
};

// Image of q under w = T(z), i.e. the differential q' with T^* q' = q.
RationalQD mobius_transform(const RationalQD& q, const Mobius& T);

struct NormalizeResult {
    RationalQD q;
    Mobius map;
};

// Indices into q.sing; the value q.size() denotes the point at infinity.
// Sends fix[0] -> 0, fix[1] -> 1, fix[2] -> infinity.
NormalizeResult mobius_normalize(const RationalQD& q, std::array<int, 3> fix);

cplx double_cover_map(cplx w);  // (w^2 - 1) / (2w)
bool conjugation_invariant(const RationalQD& q, double tol = 1e-12);
RationalQD double_cover_pullback(const RationalQD& q);

// One-parameter family: points flagged `cluster` sit at center + eps * z.
struct FamilyPoint {
    cplx z{};
    int order = 1;
    bool marked = false;
    bool cluster = false;
};

struct ClusterFamily {
    cplx scale{1.0, 0.0};
    cplx center{0.0, 0.0};
    std::vector<FamilyPoint> pts;
    double compareFactor = 2.0;  // pairs (eps, compareFactor * eps) in comparisons

    RationalQD at(double eps) const;
    std::vector<int> colliding() const;
    int cluster_degree() const;  // sum of orders over the cluster
};

}  // namespace qdf
