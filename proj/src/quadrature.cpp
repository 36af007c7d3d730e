#include "qdflat/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>

namespace qdf::quad {

namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Cell {
    double a, b;
    cplx val;
    double err, absv;
    int piece;
    bool operator<(const Cell& o) const { return err < o.err; }
};

Cell eval_cell(const BatchFn& f, double a, double b, int piece) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    std::array<double, 15> x;
    for (int i = 0; i < 7; ++i) {
        x[2 * i] = c - h * kXgk[i];
        x[2 * i + 1] = c + h * kXgk[i];
    }
    x[14] = c;
    std::array<cplx, 15> y;
    f(x.data(), 15, y.data());
    cplx k15 = kWgk[7] * y[14], g7 = kWg[3] * y[14];
    double absk = kWgk[7] * std::abs(y[14]);
    for (int i = 0; i < 7; ++i) {
        const cplx s = y[2 * i] + y[2 * i + 1];
        k15 += kWgk[i] * s;
        absk += kWgk[i] * (std::abs(y[2 * i]) + std::abs(y[2 * i + 1]));
        if (i % 2 == 1) g7 += kWg[i / 2] * s;
    }
    Cell cell{a, b, k15 * h, std::abs((k15 - g7) * h), absk * std::abs(h), piece};
    if (!std::isfinite(cell.err)) cell.err = std::numeric_limits<double>::max();
    return cell;
}

}  // namespace

Result integrate(const std::vector<Piece>& pieces, double tol, int maxIntervals, double relFloor) {
    std::priority_queue<Cell> heap;
    Result res;
    double err = 0.0, absv = 0.0;
    cplx val{};
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        if (pieces[p].a == pieces[p].b) continue;
        Cell c = eval_cell(pieces[p].f, pieces[p].a, pieces[p].b, static_cast<int>(p));
        val += c.val;
        err += c.err;
        absv += c.absv;
        heap.push(c);
    }
    int count = static_cast<int>(heap.size());
    while (!heap.empty()) {
        const double target = std::max(tol, relFloor * absv);
        if (err <= target) break;
        if (count >= maxIntervals) {
            res.converged = false;
            break;
        }
        Cell c = heap.top();
        const double mid = 0.5 * (c.a + c.b);
        if (!(mid > std::min(c.a, c.b) && mid < std::max(c.a, c.b))) {
            res.converged = false;
            break;
        }
        heap.pop();
        Cell l = eval_cell(pieces[c.piece].f, c.a, mid, c.piece);
        Cell r = eval_cell(pieces[c.piece].f, mid, c.b, c.piece);
        val += l.val + r.val - c.val;
        err += l.err + r.err - c.err;
        absv += l.absv + r.absv - c.absv;
        heap.push(l);
        heap.push(r);
        ++count;
    }
    // Re-sum to avoid drift from incremental updates.
    val = {};
    err = 0.0;
    absv = 0.0;
    std::vector<Cell> cells;
    while (!heap.empty()) {
        cells.push_back(heap.top());
        heap.pop();
    }
    for (auto it = cells.rbegin(); it != cells.rend(); ++it) {
        val += it->val;
        err += it->err;
        absv += it->absv;
    }
    res.value = val;
    res.error = err;
    res.absIntegral = absv;
    res.intervals = count;
    return res;
}

Result integrate(const BatchFn& f, double a, double b, double tol, int maxIntervals) {
    return integrate(std::vector<Piece>{{f, a, b}}, tol, maxIntervals);
}

void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
    static std::mutex mu;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<double> xs(n), ws(n);
        for (int i = 0; i < n; ++i) {
            double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                const double dz = p1 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            xs[i] = 0.5 * (1.0 - z);
            ws[i] = 1.0 / ((1.0 - z * z) * pp * pp);
        }
        it = cache.emplace(n, std::make_pair(xs, ws)).first;
    }
    x = it->second.first;
    w = it->second.second;
}

}  // namespace qdf::quad
