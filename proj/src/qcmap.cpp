#include "qdflat/qcmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

// pchip.hpp in 1.74 calls isnan unqualified
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include "qdflat/periods.hpp"
#include "qdflat/quadrature.hpp"

namespace qdf {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void check_increasing(const std::vector<double>& v, const char* what) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1]))
            throw Error(std::string("nonmonotone boundary samples (") + what + " at index " + std::to_string(k) + ")");
}

}  // namespace

BoundaryMap::BoundaryMap(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size()) throw Error("boundary map: sample arrays differ in length");
    if (x_.size() < 4) throw Error("boundary map: at least four samples are needed");
    check_increasing(x_, "x");
    check_increasing(y_, "h(x)");
    auto xs = x_, ys = y_;
    auto p = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(xs), std::move(ys));
    interp_ = std::make_shared<const std::function<double(double)>>([p](double t) { return (*p)(t); });
}

BoundaryMap BoundaryMap::from_function(const std::function<double(double)>& f, double a, double b, int n) {
    if (!(b > a) || n < 4) throw Error("boundary map: bad sampling range");
    std::vector<double> x;
    for (int k = 0; k < n; ++k) x.push_back(a + (b - a) * k / (n - 1));
    for (double k = std::ceil(a); k <= b; k += 1.0) x.push_back(k);
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end(), [](double u, double v) { return std::abs(u - v) < 1e-12 * (1 + std::abs(u)); }),
            x.end());
    std::vector<double> y;
    for (double t : x) y.push_back(f(t));
    return BoundaryMap(std::move(x), std::move(y));
}

double BoundaryMap::operator()(double t) const {
    if (!interp_) throw Error("boundary map is empty");
    if (t < x_.front() || t > x_.back())
        throw Error("evaluation outside sampled boundary range: " + fmt(t) + " not in [" + fmt(x_.front()) + ", " +
                    fmt(x_.back()) + "]");
    return (*interp_)(t);
}

bool BoundaryMap::fixes_zero_and_one(double tol) const {
    if (lo() > 0.0 || hi() < 1.0) return false;
    return std::abs((*this)(0.0)) <= tol && std::abs((*this)(1.0) - 1.0) <= tol;
}

SamplePlan SamplePlan::grid(double a, double b, int nx, double tMin, double tMax, int nt) {
    SamplePlan p;
    for (int i = 0; i < nx; ++i) p.x.push_back(nx == 1 ? 0.5 * (a + b) : a + (b - a) * i / (nx - 1));
    for (int j = 0; j < nt; ++j)
        p.t.push_back(nt == 1 ? tMin : tMin * std::pow(tMax / tMin, static_cast<double>(j) / (nt - 1)));
    return p;
}

QuasisymmetryEstimate quasisymmetry_constant(const BoundaryMap& h, const SamplePlan& plan) {
    QuasisymmetryEstimate est;
    for (double x : plan.x)
        for (double t : plan.t) {
            if (!(t > 0.0) || x - t < h.lo() || x + t > h.hi()) continue;
            const double up = h(x + t) - h(x), down = h(x) - h(x - t);
            if (!(up > 0.0) || !(down > 0.0))
                throw Error("nonmonotone samples at x = " + fmt(x) + ", t = " + fmt(t));
            const double ratio = std::max(up / down, down / up);
            ++est.samples;
            if (ratio > est.rho) {
                est.rho = ratio;
                est.argX = x;
                est.argT = t;
            }
        }
    return est;
}

PlaneMap beurling_ahlfors(const BoundaryMap& h, double r, double tol) {
    if (!(r > 0.0)) throw Error("beurling_ahlfors: r must be positive");
    return [h, r, tol](cplx z) -> cplx {
        const double x = z.real(), y = z.imag();
        if (!(y > 0.0)) throw Error("beurling_ahlfors: point not in the upper half-plane");
        if (x - y < h.lo() || x + y > h.hi())
            throw Error("evaluation outside sampled boundary range at " + fmt(x) + " + " + fmt(y) + "i");
        const quad::BatchFn f = [&](const double* t, std::size_t n, cplx* out) {
            for (std::size_t k = 0; k < n; ++k) {
                const double p = h(x + y * t[k]), m = h(x - y * t[k]);
                out[k] = cplx(0.5 * (p + m), 0.5 * r * (p - m));
            }
        };
        const auto res = quad::integrate(f, 0.0, 1.0, tol * (1.0 + std::abs(x) + y));
        return res.value;
    };
}

std::vector<cplx> Grid::points() const {
    std::vector<cplx> out;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double x = nx == 1 ? 0.5 * (x0 + x1) : x0 + (x1 - x0) * i / (nx - 1);
            const double y = ny == 1 ? 0.5 * (y0 + y1) : y0 + (y1 - y0) * j / (ny - 1);
            out.emplace_back(x, y);
        }
    return out;
}

double dilatation_of(cplx a, cplx b) {
    const double p = std::abs(a), m = std::abs(b);
    if (!(p > m)) throw Error("orientation failure: |f_z| <= |f_zbar|");
    return (p + m) / (p - m);
}

DilatationField dilatation_field(const PlaneMap& f, const Grid& grid, double step, const std::vector<cplx>& exclude,
                                 double eps) {
    if (!(step > 0.0)) throw Error("dilatation_field: step must be positive");
    if (eps <= 0.0) eps = 2.0 * step;
    DilatationField F;
    F.maxK = 1.0;
    for (const cplx z : grid.points()) {
        bool skip = false;
        for (const cplx e : exclude) skip = skip || std::abs(z - e) < eps;
        if (skip) {
            ++F.excluded;
            continue;
        }
        const cplx fx = (f(z + step) - f(z - step)) / (2.0 * step);
        const cplx fy = (f(z + cplx(0.0, step)) - f(z - cplx(0.0, step))) / (2.0 * step);
        const cplx fz = 0.5 * (fx - cplx(0.0, 1.0) * fy), fzb = 0.5 * (fx + cplx(0.0, 1.0) * fy);
        if (!(std::abs(fz) > std::abs(fzb)))
            throw Error("orientation failure at (" + fmt(z.real()) + ", " + fmt(z.imag()) + ")");
        const double K = dilatation_of(fz, fzb);
        F.points.push_back(z);
        F.K.push_back(K);
        if (K > F.maxK) {
            F.maxK = K;
            F.argMax = z;
        }
    }
    return F;
}

AffineTri affine_between(const std::array<cplx, 3>& s, const std::array<cplx, 3>& d) {
    const cplx e1 = s[1] - s[0], e2 = s[2] - s[0];
    const cplx d1 = d[1] - d[0], d2 = d[2] - d[0];
    const cplx det = e1 * std::conj(e2) - e2 * std::conj(e1);
    if (std::abs(det) == 0.0) throw Error("degenerate triangle (zero area)");
    if (std::abs(std::imag(std::conj(d1) * d2)) == 0.0) throw Error("degenerate triangle (zero area)");
    AffineTri A;
    A.a = (d1 * std::conj(e2) - d2 * std::conj(e1)) / det;
    A.b = (e1 * d2 - e2 * d1) / det;
    A.c = d[0] - A.a * s[0] - A.b * std::conj(s[0]);
    A.K = dilatation_of(A.a, A.b);
    return A;
}

PlDilatation pl_map_dilatation(const std::vector<std::array<cplx, 3>>& src, const std::vector<std::array<cplx, 3>>& dst) {
    if (src.size() != dst.size()) throw Error("pl_map_dilatation: triangle lists differ in length");
    PlDilatation P;
    for (std::size_t k = 0; k < src.size(); ++k) {
        const double K = affine_between(src[k], dst[k]).K;
        P.K.push_back(K);
        if (P.argMax < 0 || K > P.maxK) {
            P.maxK = K;
            P.argMax = static_cast<int>(k);
        }
    }
    return P;
}

PlDilatation pl_map_dilatation(const Triangulation& t1, const Triangulation& t2, const std::vector<int>& corr) {
    if (corr.empty() && t1.faces.size() != t2.faces.size())
        throw Error("pl_map_dilatation: triangulations have different face counts");
    std::vector<std::array<cplx, 3>> a, b;
    for (std::size_t f = 0; f < t1.faces.size(); ++f) {
        const int g = corr.empty() ? static_cast<int>(f) : corr.at(f);
        a.push_back(t1.faces[f].p);
        b.push_back(t2.faces.at(g).p);
    }
    return pl_map_dilatation(a, b);
}

Shear marked_point_shear(cplx target, cplx source) {
    if (!(source.imag() > 0.0) || !(target.imag() > 0.0))
        throw Error("marked_point_shear: source and target must lie in the open upper half-plane");
    // f(x + iy) = x + y w with w = f(i)
    const cplx w = (target - source.real()) / source.imag();
    Shear S;
    S.a = 0.5 * (1.0 - cplx(0.0, 1.0) * w);
    S.b = 0.5 * (1.0 + cplx(0.0, 1.0) * w);
    S.K = dilatation_of(S.a, S.b);
    return S;
}

// ---------------------------------------------------------------------------

namespace {

struct SideSamples {
    std::vector<double> x;     // z-plane positions (infinity excluded)
    std::vector<double> frac;  // normalized arc length from the side's start corner
    std::vector<bool> atInf;
    std::vector<double> param;  // x on finite sides, w = 1/(x - x0) on the sides through infinity
    bool inW = false;
};

// n+1 nodes clustered at both ends of [a, b] (a may exceed b).
std::vector<double> cos_nodes(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i <= n; ++i) v.push_back(a + (b - a) * 0.5 * (1.0 - std::cos(kPi * i / n)));
    v.front() = a;
    v.back() = b;
    return v;
}

SideSamples sample_side(const RationalQD& q, const RationalQD& qw, double x0, const std::vector<double>& c, int k,
                        int N, double tol) {
    const int n = static_cast<int>(c.size()) + 1;
    SideSamples S;
    std::vector<double> nodes;
    bool inW = false;
    if (k <= n - 3) {
        nodes = cos_nodes(c[k], c[k + 1], N);
    } else if (k == n - 2) {
        nodes = cos_nodes(1.0 / (c[n - 2] - x0), 0.0, N);
        inW = true;
    } else {
        nodes = cos_nodes(0.0, 1.0 / (c[0] - x0), N);
        inW = true;
    }
    const RationalQD& g = inW ? qw : q;
    std::vector<double> cum{0.0};
    for (int i = 1; i <= N; ++i) cum.push_back(cum.back() + flat_length(g, make_contour(g, {nodes[i - 1], nodes[i]}), tol));
    S.param = nodes;
    S.inW = inW;
    for (int i = 0; i <= N; ++i) {
        const bool inf = inW && nodes[i] == 0.0;
        S.atInf.push_back(inf);
        S.x.push_back(inf ? 0.0 : (inW ? x0 + 1.0 / nodes[i] : nodes[i]));
        S.frac.push_back(cum[i] / cum.back());
    }
    return S;
}

}  // namespace

BoundaryMap boundary_map_between(const DoubleResult& d1, const DoubleResult& d2, int N, double tol) {
    if (d1.corners.size() != d2.corners.size()) throw Error("boundary map: doubles have different corner counts");
    if (N < 8) throw Error("boundary map: too few samples per side");
    const int n = static_cast<int>(d1.corners.size()) + 1;
    const double x0 = 0.5;  // between c_0 = 0 and c_1 = 1 in both
    const Mobius T{0.0, 1.0, 1.0, -x0};
    const RationalQD w1 = mobius_transform(d1.q, T), w2 = mobius_transform(d2.q, T);
    std::vector<std::pair<double, double>> xy;
    for (int k = 0; k < n; ++k) {
        const SideSamples A = sample_side(d1.q, w1, x0, d1.corners, k, N, tol);
        const SideSamples B = sample_side(d2.q, w2, x0, d2.corners, k, N, tol);
        // inverse of B's arc length, in B's side parameter
        auto fb = B.frac, pb = B.param;
        boost::math::interpolators::pchip<std::vector<double>> inv(std::move(fb), std::move(pb));
        for (std::size_t i = 0; i < A.x.size(); ++i) {
            if (A.atInf[i]) continue;
            const double p = inv(A.frac[i]);
            double y;
            if (B.inW) {
                if (p == 0.0) continue;
                y = x0 + 1.0 / p;
            } else {
                y = p;
            }
            xy.push_back({A.x[i], y});
        }
    }
    std::sort(xy.begin(), xy.end());
    std::vector<double> x, y;
    for (const auto& [a, b] : xy) {
        if (!x.empty() && std::abs(a - x.back()) <= 1e-13 * (1.0 + std::abs(a))) continue;
        x.push_back(a);
        y.push_back(b);
    }
    return BoundaryMap(std::move(x), std::move(y));
}

}  // namespace qdf
