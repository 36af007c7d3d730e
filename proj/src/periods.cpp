#include "qdflat/periods.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qdflat/fit.hpp"
#include "qdflat/kernels.hpp"
#include "qdflat/quadrature.hpp"

namespace qdf {

namespace {

constexpr double kHalfRoot = 0.70710678118654752440;

bool same_point(cplx a, cplx b) {
    const double s = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) <= 1e-14 * s;
}

double point_segment_distance(cplx p, cplx a, cplx b) {
    const cplx h = b - a;
    const double L2 = std::norm(h);
    if (L2 == 0.0) return std::abs(p - a);
    double t = ((p - a) * std::conj(h)).real() / L2;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(p - (a + t * h));
}

enum class PieceKind { Plain, StartSub, EndSub };

// One integration piece of one segment; d is the offset from the piece base.
quad::Piece make_branch_piece(PieceKind kind, kernels::FactorSet fs, cplx h, cplx coef, double lo,
                              double hi) {
    quad::Piece p;
    p.a = lo;
    p.b = hi;
    p.f = [kind, fs = std::move(fs), h, coef](const double* x, std::size_t n, cplx* out) {
        double dr[16] = {}, di[16] = {}, gr[16], gi[16];
        for (std::size_t k = 0; k < n; ++k) {
            double s = x[k];
            if (kind == PieceKind::StartSub) s = x[k] * x[k];
            if (kind == PieceKind::EndSub) s = -x[k] * x[k];
            const cplx d = s * h;
            dr[k] = d.real();
            di[k] = d.imag();
        }
        kernels::branch_product(fs, dr, di, n, gr, gi);
        for (std::size_t k = 0; k < n; ++k) {
            const double w = kind == PieceKind::Plain ? 1.0 : 2.0 * x[k];
            out[k] = coef * cplx{gr[k], gi[k]} * w;
        }
    };
    return p;
}

quad::Piece make_abs_piece(PieceKind kind, kernels::FactorSet fs, cplx h, double coef, double lo,
                           double hi) {
    quad::Piece p;
    p.a = lo;
    p.b = hi;
    p.f = [kind, fs = std::move(fs), h, coef](const double* x, std::size_t n, cplx* out) {
        double dr[16] = {}, di[16] = {}, g[16];
        for (std::size_t k = 0; k < n; ++k) {
            double s = x[k];
            if (kind == PieceKind::StartSub) s = x[k] * x[k];
            if (kind == PieceKind::EndSub) s = -x[k] * x[k];
            const cplx d = s * h;
            dr[k] = d.real();
            di[k] = d.imag();
        }
        kernels::abs_product(fs, dr, di, n, g);
        for (std::size_t k = 0; k < n; ++k) {
            const double w = kind == PieceKind::Plain ? 1.0 : 2.0 * x[k];
            out[k] = cplx{coef * g[k] * w, 0.0};
        }
    };
    return p;
}

void check_interior(const std::vector<cplx>& z, const std::vector<int>& orders, const Contour& g) {
    const std::size_t nseg = g.vertices.size() - 1;
    for (std::size_t s = 0; s < nseg; ++s) {
        const cplx a = g.vertices[s], b = g.vertices[s + 1];
        const double scale = std::abs(a) + std::abs(b) + std::abs(b - a);
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (orders[j] == 0) continue;
            const bool isStart = s == 0 && g.endpointSingular[0] && g.endpointIndex[0] == int(j);
            const bool isEnd = s + 1 == nseg && g.endpointSingular[1] && g.endpointIndex[1] == int(j);
            if (isStart || isEnd) continue;
            if (point_segment_distance(z[j], a, b) <= 1e-14 * scale) {
                std::ostringstream os;
                os << "contour passes through singularity " << j << " on segment " << s;
                throw Error(os.str());
            }
        }
    }
}

}  // namespace

Contour make_contour(const RationalQD& q, std::vector<cplx> vertices) {
    if (vertices.size() < 2) throw Error("contour needs at least two vertices");
    Contour c;
    c.vertices = std::move(vertices);
    for (int end = 0; end < 2; ++end) {
        cplx& v = end == 0 ? c.vertices.front() : c.vertices.back();
        for (std::size_t j = 0; j < q.sing.size(); ++j) {
            if (same_point(v, q.sing[j].z)) {
                v = q.sing[j].z;
                c.endpointSingular[end] = true;
                c.endpointIndex[end] = static_cast<int>(j);
                break;
            }
        }
    }
    return c;
}

Contour segment_contour(const RationalQD& q, int i, int j) {
    Contour c;
    c.vertices = {q.sing.at(i).z, q.sing.at(j).z};
    c.endpointSingular = {true, true};
    c.endpointIndex = {i, j};
    return c;
}

PeriodValue integrate_branch(cplx scale, const std::vector<cplx>& z, const std::vector<int>& orders,
                             const Contour& g, double tol) {
    if (g.vertices.size() < 2) throw Error("contour needs at least two vertices");
    if (!(tol > 0.0)) throw Error("tolerance must be positive");
    check_interior(z, orders, g);
    const std::size_t n = z.size(), nseg = g.vertices.size() - 1;
    const int sIdx = g.endpointSingular[0] ? g.endpointIndex[0] : -1;
    const int eIdx = g.endpointSingular[1] ? g.endpointIndex[1] : -1;

    // Continued square roots S_j of (a - z_j) at the current segment start.
    std::vector<cplx> S(n);
    const cplx v0 = g.vertices[0];
    for (std::size_t j = 0; j < n; ++j) {
        if (int(j) == sIdx) {
            std::size_t k = 1;
            while (k + 1 < g.vertices.size() && g.vertices[k] == v0) ++k;
            S[j] = psqrt(g.vertices[k] - v0);
        } else {
            S[j] = psqrt(v0 - z[j]);
        }
    }
    const cplx rootScale = psqrt(scale);
    std::vector<quad::Piece> pieces;
    for (std::size_t s = 0; s < nseg; ++s) {
        const cplx a = g.vertices[s], b = g.vertices[s + 1];
        const cplx h = b - a;
        if (h == cplx{0.0, 0.0}) continue;
        const bool startSing = s == 0 && sIdx >= 0;
        const bool endSing = s + 1 == nseg && eIdx >= 0;
        cplx C = rootScale;
        kernels::FactorSet fa, fb;
        for (std::size_t j = 0; j < n; ++j) {
            if (orders[j] == 0) continue;
            const cplx ref = S[j] * S[j];
            const cplx inv = 1.0 / ref;
            C *= ipow(S[j], orders[j]);
            const cplx ca = (startSing && int(j) == sIdx) ? cplx{0.0, 0.0} : a - z[j];
            const cplx cb = (endSing && int(j) == eIdx) ? cplx{0.0, 0.0} : b - z[j];
            fa.push(ca.real(), ca.imag(), inv.real(), inv.imag(), orders[j]);
            fb.push(cb.real(), cb.imag(), inv.real(), inv.imag(), orders[j]);
        }
        const cplx coef = C * h;
        if (startSing && endSing) {
            pieces.push_back(make_branch_piece(PieceKind::StartSub, fa, h, coef, 0.0, kHalfRoot));
            pieces.push_back(make_branch_piece(PieceKind::EndSub, fb, h, coef, 0.0, kHalfRoot));
        } else if (startSing) {
            pieces.push_back(make_branch_piece(PieceKind::StartSub, fa, h, coef, 0.0, kHalfRoot));
            pieces.push_back(make_branch_piece(PieceKind::Plain, fa, h, coef, 0.5, 1.0));
        } else if (endSing) {
            pieces.push_back(make_branch_piece(PieceKind::Plain, fa, h, coef, 0.0, 0.5));
            pieces.push_back(make_branch_piece(PieceKind::EndSub, fb, h, coef, 0.0, kHalfRoot));
        } else {
            pieces.push_back(make_branch_piece(PieceKind::Plain, fa, h, coef, 0.0, 1.0));
        }
        if (!endSing || s + 1 < nseg) {
            for (std::size_t j = 0; j < n; ++j) {
                if (startSing && int(j) == sIdx) continue;  // (b - a)/(b - a) = 1
                S[j] *= psqrt((b - z[j]) / (S[j] * S[j]));
            }
        }
    }
    const quad::Result r = quad::integrate(pieces, tol, 20000);
    if (!r.converged && r.error > 1e3 * std::max(tol, 1e-14 * r.absIntegral))
        throw Error("period quadrature did not converge (error estimate " + std::to_string(r.error) + ")");
    return {r.value, r.error};
}

PeriodValue period_detail(const RationalQD& q, const Contour& g, double tol) {
    std::vector<int> orders;
    for (const auto& s : q.sing) orders.push_back(s.order);
    return integrate_branch(q.scale, q.locations(), orders, g, tol);
}

cplx period(const RationalQD& q, const Contour& g, double tol) { return period_detail(q, g, tol).value; }

cplx period(const ClusterDifferential& q, const Contour& g, double tol) {
    const RationalQD r = q.to_rational();
    Contour c = g;
    // Re-resolve endpoint indices against the rational form.
    c = make_contour(r, g.vertices);
    return period(r, c, tol);
}

double flat_length(const RationalQD& q, const Contour& g, double tol) {
    if (g.vertices.size() < 2) throw Error("contour needs at least two vertices");
    std::vector<int> orders;
    for (const auto& s : q.sing) orders.push_back(s.order);
    const std::vector<cplx> z = q.locations();
    check_interior(z, orders, g);
    const std::size_t nseg = g.vertices.size() - 1;
    const int sIdx = g.endpointSingular[0] ? g.endpointIndex[0] : -1;
    const int eIdx = g.endpointSingular[1] ? g.endpointIndex[1] : -1;
    const double rootScale = std::sqrt(std::abs(q.scale));
    std::vector<quad::Piece> pieces;
    for (std::size_t s = 0; s < nseg; ++s) {
        const cplx a = g.vertices[s], b = g.vertices[s + 1];
        const cplx h = b - a;
        if (h == cplx{0.0, 0.0}) continue;
        const bool startSing = s == 0 && sIdx >= 0;
        const bool endSing = s + 1 == nseg && eIdx >= 0;
        kernels::FactorSet fa, fb;
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (orders[j] == 0) continue;
            const cplx ca = (startSing && int(j) == sIdx) ? cplx{0.0, 0.0} : a - z[j];
            const cplx cb = (endSing && int(j) == eIdx) ? cplx{0.0, 0.0} : b - z[j];
            fa.push(ca.real(), ca.imag(), 1.0, 0.0, orders[j]);
            fb.push(cb.real(), cb.imag(), 1.0, 0.0, orders[j]);
        }
        const double coef = rootScale * std::abs(h);
        if (startSing && endSing) {
            pieces.push_back(make_abs_piece(PieceKind::StartSub, fa, h, coef, 0.0, kHalfRoot));
            pieces.push_back(make_abs_piece(PieceKind::EndSub, fb, h, coef, 0.0, kHalfRoot));
        } else if (startSing) {
            pieces.push_back(make_abs_piece(PieceKind::StartSub, fa, h, coef, 0.0, kHalfRoot));
            pieces.push_back(make_abs_piece(PieceKind::Plain, fa, h, coef, 0.5, 1.0));
        } else if (endSing) {
            pieces.push_back(make_abs_piece(PieceKind::Plain, fa, h, coef, 0.0, 0.5));
            pieces.push_back(make_abs_piece(PieceKind::EndSub, fb, h, coef, 0.0, kHalfRoot));
        } else {
            pieces.push_back(make_abs_piece(PieceKind::Plain, fa, h, coef, 0.0, 1.0));
        }
    }
    return quad::integrate(pieces, tol, 20000).value.real();
}

namespace {

struct DSU {
    std::vector<int> p;
    explicit DSU(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        p[a] = b;
        return true;
    }
};

struct Candidate {
    double len;
    int i, j;
    bool operator<(const Candidate& o) const {
        if (len != o.len) return len < o.len;
        if (i != o.i) return i < o.i;
        return j < o.j;
    }
};

}  // namespace

PeriodChart spanning_tree_chart(const RationalQD& q, double lengthBound, double tol) {
    const std::size_t n = q.size();
    if (n < 2) throw Error("fewer than 2 singularities");
    const ValidityReport rep = validate(q);
    if (!rep.ok) throw Error("invalid differential: " + rep.issues.front());
    std::vector<Candidate> cands;
    double maxLen = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx a = q.sing[i].z, b = q.sing[j].z;
            bool blocked = false;
            for (std::size_t k = 0; k < n && !blocked; ++k)
                if (k != i && k != j && point_segment_distance(q.sing[k].z, a, b) <= 1e-9 * std::abs(b - a))
                    blocked = true;
            if (blocked) continue;
            const double L = flat_length(q, segment_contour(q, int(i), int(j)), 1e-10 * std::abs(b - a));
            maxLen = std::max(maxLen, L);
            cands.push_back({L, int(i), int(j)});
        }
    }
    std::sort(cands.begin(), cands.end());
    if (!(lengthBound > 0.0)) lengthBound = 4.0 * maxLen;
    DSU dsu(n);
    PeriodChart chart;
    std::size_t used = 0;
    for (const auto& c : cands) {
        if (c.len > lengthBound) break;
        if (!dsu.unite(c.i, c.j)) continue;
        chart.edges.push_back({c.i, c.j});
        chart.flatLengths.push_back(c.len);
        ++used;
    }
    if (used + 1 != n) {
        DSU full(n);
        double need = 0.0;
        int ni = -1, nj = -1;
        for (const auto& c : cands)
            if (full.unite(c.i, c.j) && c.len > need) {
                need = c.len;
                ni = c.i;
                nj = c.j;
            }
        std::ostringstream os;
        os << "no spanning tree within lengthBound " << lengthBound;
        if (ni >= 0) os << "; longest needed edge " << ni << "-" << nj << " has flat length " << need;
        else os << "; straight candidate graph is disconnected";
        throw Error(os.str());
    }
    for (const auto& e : chart.edges) {
        chart.contours.push_back(segment_contour(q, e.first, e.second));
        chart.branchChoices.push_back(1);
        chart.values.push_back(period(q, chart.contours.back(), tol));
    }
    return chart;
}

Contour chart_contour(const RationalQD& q, const PeriodChart& chart, std::size_t k) {
    Contour c = chart.contours.at(k);
    for (int end = 0; end < 2; ++end) {
        const int idx = c.endpointIndex[end];
        if (!c.endpointSingular[end] || idx < 0) continue;
        if (idx >= int(q.size())) throw Error("chart refers to a missing singularity");
        (end == 0 ? c.vertices.front() : c.vertices.back()) = q.sing[idx].z;
    }
    return c;
}

PeriodJacobian period_jacobian(const RationalQD& q, const PeriodChart& chart, double tol) {
    const std::size_t rows = chart.contours.size(), n = q.size();
    PeriodJacobian J;
    J.matrix = Eigen::MatrixXcd::Zero(rows, n);
    J.finiteDiff.assign(rows * n, false);
    std::vector<int> orders;
    for (const auto& s : q.sing) orders.push_back(s.order);
    const std::vector<cplx> z = q.locations();
    for (std::size_t i = 0; i < rows; ++i) {
        const Contour C = chart_contour(q, chart, i);
        const double sign = chart.branchChoices.empty() ? 1.0 : chart.branchChoices[i];
        const cplx P = period(q, C, tol);
        for (std::size_t j = 0; j < n; ++j) {
            const int e = orders[j];
            const bool isStart = C.endpointSingular[0] && C.endpointIndex[0] == int(j);
            const bool isEnd = C.endpointSingular[1] && C.endpointIndex[1] == int(j);
            if (e == 0 && !isStart && !isEnd) continue;
            if ((isStart || isEnd) && e <= 0) {
                double local = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < n; ++k)
                    if (k != j) local = std::min(local, std::abs(z[k] - z[j]));
                const double h = 1e-6 * local;
                cplx Ppm[2];
                for (int sgn = 0; sgn < 2; ++sgn) {
                    RationalQD qp = q;
                    const double step = sgn == 0 ? h : -h;
                    qp.sing[j].z += step;
                    Contour Cp = C;
                    if (isStart) Cp.vertices.front() += step;
                    if (isEnd) Cp.vertices.back() += step;
                    cplx v = period(qp, Cp, tol * 1e-3);
                    if (std::abs(v - P) > std::abs(v + P)) v = -v;
                    Ppm[sgn] = v;
                }
                J.matrix(i, j) = sign * (Ppm[0] - Ppm[1]) / (2.0 * h);
                J.finiteDiff[i * n + j] = true;
                continue;
            }
            std::vector<int> mod = orders;
            mod[j] = e - 2;
            const PeriodValue v = integrate_branch(q.scale, z, mod, C, tol);
            J.matrix(i, j) = sign * (-0.5 * e) * v.value;
        }
    }
    return J;
}

PersistenceReport chart_persistence(const RationalQD& q1, const RationalQD& q2, const PeriodChart& chart,
                                    int samples) {
    if (q1.size() != q2.size()) throw Error("differentials have different numbers of singularities");
    for (std::size_t j = 0; j < q1.size(); ++j)
        if (q1.sing[j].order != q2.sing[j].order || q1.sing[j].marked != q2.sing[j].marked)
            throw Error("differentials lie in different strata");
    samples = std::max(samples, 2);
    const std::size_t n = q1.size(), nc = chart.contours.size();
    PersistenceReport rep;
    rep.signs.assign(nc, 1);
    // Continued start-point roots per contour and factor.
    std::vector<std::vector<cplx>> cont(nc, std::vector<cplx>(n));
    cplx contScale = psqrt(q1.scale);
    auto conv_roots = [&](const RationalQD& q, const Contour& C, std::vector<cplx>& out) {
        const cplx v0 = C.vertices.front();
        for (std::size_t j = 0; j < n; ++j) {
            if (C.endpointSingular[0] && C.endpointIndex[0] == int(j)) {
                std::size_t k = 1;
                while (k + 1 < C.vertices.size() && C.vertices[k] == v0) ++k;
                out[j] = psqrt(C.vertices[k] - v0);
            } else {
                out[j] = psqrt(v0 - q.sing[j].z);
            }
        }
    };
    std::vector<cplx> tmp(n);
    RationalQD qt = q1;
    for (int s = 0; s < samples; ++s) {
        const double tau = double(s) / (samples - 1);
        for (std::size_t j = 0; j < n; ++j) qt.sing[j].z = (1.0 - tau) * q1.sing[j].z + tau * q2.sing[j].z;
        qt.scale = (1.0 - tau) * q1.scale + tau * q2.scale;
        if (qt.scale == cplx{0.0, 0.0}) {
            rep.persists = false;
            rep.tau = tau;
            return rep;
        }
        for (std::size_t a = 0; a < n && rep.persists; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (std::abs(qt.sing[a].z - qt.sing[b].z) <=
                    1e-12 * std::max(1.0, std::abs(qt.sing[a].z) + std::abs(qt.sing[b].z))) {
                    rep.persists = false;
                    rep.tau = tau;
                    return rep;
                }
        const cplx cs = psqrt(qt.scale);
        contScale = (s == 0 || std::abs(cs - contScale) <= std::abs(cs + contScale)) ? cs : -cs;
        for (std::size_t k = 0; k < nc; ++k) {
            const Contour C = chart_contour(qt, chart, k);
            const std::size_t nseg = C.vertices.size() - 1;
            for (std::size_t sg = 0; sg < nseg; ++sg) {
                const cplx a = C.vertices[sg], b = C.vertices[sg + 1];
                const double len = std::abs(b - a);
                for (std::size_t j = 0; j < n; ++j) {
                    const bool own = (sg == 0 && C.endpointIndex[0] == int(j)) ||
                                     (sg + 1 == nseg && C.endpointIndex[1] == int(j));
                    if (own) continue;
                    if (point_segment_distance(qt.sing[j].z, a, b) < 1e-9 * len) {
                        rep.persists = false;
                        rep.contour = int(k);
                        rep.tau = tau;
                        return rep;
                    }
                }
            }
            conv_roots(qt, C, tmp);
            for (std::size_t j = 0; j < n; ++j) {
                if (s == 0) cont[k][j] = tmp[j];
                else cont[k][j] = std::abs(tmp[j] - cont[k][j]) <= std::abs(tmp[j] + cont[k][j]) ? tmp[j] : -tmp[j];
            }
        }
    }
    // Relative sign of the continued branch against the convention at q2.
    rep.scaleSign = std::abs(contScale - psqrt(q2.scale)) <= std::abs(contScale + psqrt(q2.scale)) ? 1 : -1;
    for (std::size_t k = 0; k < nc; ++k) {
        const Contour C = chart_contour(q2, chart, k);
        conv_roots(q2, C, tmp);
        int sg = rep.scaleSign;
        for (std::size_t j = 0; j < n; ++j) {
            const int e = q2.sing[j].order;
            if (e % 2 == 0) continue;
            const int flip = std::abs(tmp[j] - cont[k][j]) <= std::abs(tmp[j] + cont[k][j]) ? 1 : -1;
            sg *= flip;
        }
        rep.signs[k] = sg;
    }
    return rep;
}

cplx conventional_root(const RationalQD& q, const Contour& g, double s) {
    if (g.vertices.size() < 2) throw Error("contour needs at least two vertices");
    const cplx v0 = g.vertices[0], d = g.vertices[1] - v0;
    cplx r = psqrt(q.scale);
    for (std::size_t j = 0; j < q.sing.size(); ++j) {
        const int e = q.sing[j].order;
        if (e == 0) continue;
        if (g.endpointSingular[0] && static_cast<int>(j) == g.endpointIndex[0])
            r *= ipow(std::sqrt(s) * psqrt(d), e);
        else
            r *= ipow(psqrt(v0 - q.sing[j].z) * psqrt(1.0 + s * d / (v0 - q.sing[j].z)), e);
    }
    return r;
}

double d_euclidean_chart(const RationalQD& q1, const RationalQD& q2, const PeriodChart& chart, double tol) {
    const PersistenceReport pr = chart_persistence(q1, q2, chart);
    if (!pr.persists) {
        std::ostringstream os;
        os << "chart does not persist along the root homotopy";
        if (pr.contour >= 0) os << ": contour " << pr.contour << " pinched";
        os << " at tau = " << pr.tau;
        throw Error(os.str());
    }
    double dPlus = 0.0, dMinus = 0.0;
    for (std::size_t k = 0; k < chart.contours.size(); ++k) {
        const double b = chart.branchChoices.empty() ? 1.0 : chart.branchChoices[k];
        const cplx P1 = b * period(q1, chart_contour(q1, chart, k), tol);
        const cplx P2 = b * double(pr.signs[k]) * period(q2, chart_contour(q2, chart, k), tol);
        dPlus = std::max(dPlus, std::abs(P2 - P1));
        dMinus = std::max(dMinus, std::abs(P2 + P1));
    }
    return std::min(dPlus, dMinus);
}

ClusterLimitReport jacobian_cluster_limit_probe(const ClusterFamily& family, const std::vector<double>& eps,
                                                double tol) {
    if (eps.size() < 4) throw Error("cluster limit probe needs at least 4 eps values");
    for (std::size_t i = 1; i < eps.size(); ++i)
        if (!(eps[i] < eps[i - 1])) throw Error("eps schedule must be strictly decreasing");
    const std::vector<int> S = family.colliding();
    if (S.size() < 2) throw Error("family needs at least two colliding singularities");
    for (int j : S)
        if (family.pts[j].order < 0) throw Error("colliding set contains a pole");
    ClusterLimitReport rep;
    rep.m = family.cluster_degree();
    rep.expectedExponent = 0.5 * rep.m;
    std::vector<bool> inS(family.pts.size(), false);
    for (int j : S) inS[j] = true;
    std::vector<std::pair<double, double>> pairs;
    for (double e : eps) {
        const RationalQD q = family.at(e);
        const ValidityReport v = validate(q);
        if (!v.ok) throw Error("family leaves the stratum at eps = " + std::to_string(e) + ": " + v.issues.front());
        const PeriodChart chart = spanning_tree_chart(q, 0.0, tol);
        const PeriodJacobian J = period_jacobian(q, chart, tol);
        ClusterLimitRow row;
        row.eps = e;
        for (int a : S)
            for (int b : S) row.diamC = std::max(row.diamC, std::abs(q.sing[a].z - q.sing[b].z));
        cplx t = q.scale;
        for (std::size_t j = 0; j < q.size(); ++j)
            if (!inS[j]) t *= ipow(family.center - q.sing[j].z, q.sing[j].order);
        bool anyInternal = false;
        for (std::size_t i = 0; i < chart.edges.size(); ++i) {
            const auto [a, b] = chart.edges[i];
            if (inS[a] && inS[b]) {
                anyInternal = true;
                row.internalRowNorm = std::max(row.internalRowNorm, J.matrix.row(i).norm());
            }
            for (int j : S)
                for (int k : S) {
                    if (j >= k) continue;
                    const double d = std::abs(double(q.sing[j].order) * J.matrix(i, k) -
                                              double(q.sing[k].order) * J.matrix(i, j));
                    row.proportionalityDefect = std::max(row.proportionalityDefect, d);
                }
        }
        if (!anyInternal) throw Error("chart has no internal contour at eps = " + std::to_string(e));
        row.scaledInternalNorm = row.internalRowNorm / std::sqrt(std::abs(t));
        const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(q.size());
        row.onesRatio = (J.matrix * ones).norm() / J.matrix.norm();
        rep.rows.push_back(row);
        pairs.push_back({row.diamC, row.scaledInternalNorm});
    }
    const PowerFit f = fit_power_law(pairs, 4);
    rep.fittedExponent = f.slope;
    rep.fitCI = f.slopeCI;
    rep.defectMonotone = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (!(rep.rows[i].proportionalityDefect < rep.rows[i - 1].proportionalityDefect)) rep.defectMonotone = false;
    return rep;
}

}  // namespace qdf
