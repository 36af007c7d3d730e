#include "qdflat/qdiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qdf {

namespace {

bool same_point(cplx a, cplx b) {
    const double s = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) <= 1e-14 * s;
}

}  // namespace

int RationalQD::finite_order_sum() const {
    int s = 0;
    for (const auto& r : sing) s += r.order;
    return s;
}

cplx RationalQD::eval(cplx z) const {
    cplx v = scale;
    for (const auto& r : sing) v *= ipow(z - r.z, r.order);
    return v;
}

std::vector<cplx> RationalQD::locations() const {
    std::vector<cplx> out;
    out.reserve(sing.size());
    for (const auto& r : sing) out.push_back(r.z);
    return out;
}

ValidityReport validate(const RationalQD& q) {
    ValidityReport rep;
    rep.infinityOrder = q.infinity_order();
    if (q.scale == cplx{0.0, 0.0}) rep.issues.push_back("scale is zero");
    for (std::size_t i = 0; i < q.sing.size(); ++i) {
        const auto& r = q.sing[i];
        if (!std::isfinite(r.z.real()) || !std::isfinite(r.z.imag()))
            rep.issues.push_back("record " + std::to_string(i) + ": non-finite location");
        if (r.order < -1)
            rep.issues.push_back("record " + std::to_string(i) + ": order < -1");
        if (r.order == -1 && !r.marked)
            rep.issues.push_back("record " + std::to_string(i) + ": unmarked finite simple pole");
        for (std::size_t j = i + 1; j < q.sing.size(); ++j)
            if (same_point(r.z, q.sing[j].z))
                rep.issues.push_back("duplicate location: records " + std::to_string(i) + " and " +
                                     std::to_string(j));
    }
    rep.ok = rep.issues.empty();
    return rep;
}

int ClusterDifferential::degree() const {
    int m = 0;
    for (const auto& r : roots) m += r.second;
    return poleAtZero ? m - 1 : m;
}

RationalQD ClusterDifferential::to_rational() const {
    RationalQD q;
    bool zeroPresent = false;
    for (const auto& r : roots) {
        const bool atZero = r.first == cplx{0.0, 0.0};
        zeroPresent = zeroPresent || atZero;
        q.sing.push_back({r.first, r.second, atZero && markedAtZero});
    }
    if (poleAtZero)
        q.sing.push_back({{0.0, 0.0}, -1, true});
    else if (markedAtZero && !zeroPresent)
        q.sing.push_back({{0.0, 0.0}, 0, true});
    return q;
}

ValidityReport validate(const ClusterDifferential& q) {
    ValidityReport rep = validate(q.to_rational());
    int deg = 0;
    cplx wsum{0.0, 0.0};
    double mag = 0.0;
    for (const auto& r : q.roots) {
        if (r.second < 1) rep.issues.push_back("root order < 1");
        if (q.poleAtZero && r.first == cplx{0.0, 0.0})
            rep.issues.push_back("root at 0 cancels the pole at 0");
        deg += r.second;
        wsum += static_cast<double>(r.second) * r.first;
        mag += r.second * std::abs(r.first);
    }
    if (!q.poleAtZero) {
        if (deg < 2) rep.issues.push_back("polynomial degree < 2");
        if (std::abs(wsum) > 1e-12 * (1.0 + mag)) rep.issues.push_back("weighted root sum is not 0");
    }
    rep.ok = rep.issues.empty();
    return rep;
}

ScaledCluster scale_singularities(const ClusterDifferential& q, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error("scale_singularities: t must be > 0");
    ScaledCluster out;
    out.q = q;
    for (auto& r : out.q.roots) r.first *= t;
    out.factor = std::pow(t, (q.degree() + 2) / 2.0);
    return out;
}

cplx Mobius::apply(cplx z) const {
    const cplx den = c * z + d;
    if (den == cplx{0.0, 0.0}) return {std::numeric_limits<double>::infinity(), 0.0};
    return (a * z + b) / den;
}

bool Mobius::sends_to_infinity(cplx z) const {
    const cplx den = c * z + d;
    const double s = std::abs(c) * std::abs(z) + std::abs(d);
    return std::abs(den) <= 1e-14 * s;
}

RationalQD mobius_transform(const RationalQD& q, const Mobius& T) {
    const cplx det = T.a * T.d - T.b * T.c;
    if (std::abs(det) == 0.0) throw Error("mobius_transform: degenerate map");
    RationalQD out;
    out.infinityMarked = false;
    const bool affine = T.c == cplx{0.0, 0.0};
    for (const auto& r : q.sing) {
        if (!affine && T.sends_to_infinity(r.z)) {
            out.infinityMarked = r.marked || r.order == -1;
            continue;
        }
        out.sing.push_back({T.apply(r.z), r.order, r.marked});
    }
    const int infOrd = q.infinity_order();
    if (affine) {
        out.infinityMarked = q.infinityMarked;
        // q = lambda prod((w - w_j)/A)^{e} (dw/A)^2 with A = a/d
        const cplx A = T.a / T.d;
        out.scale = q.scale * ipow(A, -(q.finite_order_sum() + 2));
        return out;
    }
    const cplx wInf = T.a / T.c;
    if (infOrd < -1) throw Error("normalization moves a higher-order pole at infinity to a finite point");
    if (infOrd != 0 || q.infinityMarked) out.sing.push_back({wInf, infOrd, infOrd == -1 || q.infinityMarked});

    // lambda' from q'(w0) = q(z(w0)) z'(w0)^2 at a well separated sample point.
    double R = 1.0;
    for (const auto& r : out.sing) R = std::max(R, std::abs(r.z));
    cplx best{};
    double bestSep = -1.0;
    for (int k = 0; k < 24; ++k) {
        const double ang = 0.37 + 2.0 * kPi * k / 24.0;
        const cplx w0 = (0.5 + 0.5 * (k % 3)) * R * cplx{std::cos(ang), std::sin(ang)};
        const cplx den = -T.c * w0 + T.a;
        if (std::abs(den) < 1e-300) continue;
        const cplx z0 = (T.d * w0 - T.b) / den;
        double sep = std::abs(den) / (std::abs(T.c) * R + std::abs(T.a));
        for (const auto& r : out.sing) sep = std::min(sep, std::abs(w0 - r.z) / R);
        for (const auto& r : q.sing) sep = std::min(sep, std::abs(z0 - r.z) / (1.0 + std::abs(r.z)));
        if (sep > bestSep) { bestSep = sep; best = w0; }
    }
    const cplx den = -T.c * best + T.a;
    const cplx z0 = (T.d * best - T.b) / den;
    const cplx dz = det / (den * den);
    cplx val = q.eval(z0) * dz * dz;
    for (const auto& r : out.sing) val /= ipow(best - r.z, r.order);
    out.scale = val;
    return out;
}

NormalizeResult mobius_normalize(const RationalQD& q, std::array<int, 3> fix) {
    const int n = static_cast<int>(q.size());
    for (int k = 0; k < 3; ++k)
        if (fix[k] < 0 || fix[k] > n) throw Error("mobius_normalize: index out of range");
    if (fix[0] == fix[1] || fix[0] == fix[2] || fix[1] == fix[2])
        throw Error("mobius_normalize: chosen points are not distinct");
    for (int k = 0; k < 3; ++k)
        if (fix[k] == n && q.infinity_order() == 0 && !q.infinityMarked)
            throw Error("mobius_normalize: infinity is not a singularity of q");
    const auto P = [&](int k) { return q.sing[fix[k]].z; };
    Mobius T;
    if (fix[2] == n) {
        const cplx s = P(1) - P(0);
        T = {cplx{1.0} / s, -P(0) / s, 0.0, 1.0};
    } else if (fix[0] == n) {
        T = {0.0, P(1) - P(2), 1.0, -P(2)};
    } else if (fix[1] == n) {
        T = {1.0, -P(0), 1.0, -P(2)};
    } else {
        T = {P(1) - P(2), -P(0) * (P(1) - P(2)), P(1) - P(0), -P(2) * (P(1) - P(0))};
    }
    NormalizeResult res;
    res.map = T;
    if (T.c == cplx{0.0, 0.0} && T.a == cplx{1.0} && T.b == cplx{0.0} && T.d == cplx{1.0}) {
        res.q = q;
        return res;
    }
    if (fix[2] != n && q.infinity_order() < -1)
        throw Error("normalization moves a higher-order pole at infinity to a finite point");
    res.q = mobius_transform(q, T);
    return res;
}

cplx double_cover_map(cplx w) { return (w * w - 1.0) / (2.0 * w); }

bool conjugation_invariant(const RationalQD& q, double tol) {
    if (std::abs(q.scale.imag()) > tol * std::max(1.0, std::abs(q.scale))) return false;
    for (const auto& r : q.sing) {
        bool found = false;
        for (const auto& s : q.sing)
            if (s.order == r.order && s.marked == r.marked &&
                std::abs(s.z - std::conj(r.z)) <= tol * std::max(1.0, std::abs(r.z))) {
                found = true;
                break;
            }
        if (!found) return false;
    }
    return true;
}

RationalQD double_cover_pullback(const RationalQD& q) {
    const cplx I{0.0, 1.0};
    bool hasI = false, hasMinusI = false;
    for (const auto& r : q.sing) {
        if (r.order == -1 && std::abs(r.z - I) < 1e-12) hasI = true;
        if (r.order == -1 && std::abs(r.z + I) < 1e-12) hasMinusI = true;
    }
    if (!hasI || !hasMinusI) throw Error("double_cover_pullback: q lacks simple poles at +-i");
    if (!conjugation_invariant(q)) throw Error("double_cover_pullback: q is not conjugation invariant");

    const int E = q.finite_order_sum();
    RationalQD out;
    out.scale = q.scale * std::pow(2.0, -E - 2);
    out.infinityMarked = q.infinityMarked;
    for (const auto& r : q.sing) {
        if (std::abs(r.z - I) < 1e-12 || std::abs(r.z + I) < 1e-12) {
            out.sing.push_back({std::abs(r.z - I) < 1e-12 ? I : -I, 0, true});
            continue;
        }
        cplx s = psqrt(r.z * r.z + 1.0);
        if ((std::conj(r.z) * s).real() < 0.0) s = -s;
        const cplx w1 = r.z + s;
        const cplx w2 = -1.0 / w1;
        out.sing.push_back({w1, r.order, r.marked});
        out.sing.push_back({w2, r.order, r.marked});
    }
    const int infOrd = q.infinity_order();
    if (infOrd != 0 || q.infinityMarked)
        out.sing.push_back({{0.0, 0.0}, infOrd, infOrd == -1 || q.infinityMarked});
    return out;
}

RationalQD ClusterFamily::at(double eps) const {
    RationalQD q;
    q.scale = scale;
    for (const auto& p : pts)
        q.sing.push_back({p.cluster ? center + eps * p.z : p.z, p.order, p.marked});
    return q;
}

std::vector<int> ClusterFamily::colliding() const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (pts[i].cluster) idx.push_back(static_cast<int>(i));
    return idx;
}

int ClusterFamily::cluster_degree() const {
    int m = 0;
    for (const auto& p : pts)
        if (p.cluster) m += p.order;
    return m;
}

}  // namespace qdf
