#include "qdflat/assignment.hpp"

#include <cmath>
#include <limits>

#include "qdflat/common.hpp"

namespace qdf {

// Shortest augmenting path form of the Hungarian method with potentials, O(n^3).
Assignment solve_assignment(const std::vector<double>& cost, int n) {
    if (n < 0 || cost.size() != static_cast<std::size_t>(n) * n) throw Error("assignment: cost matrix size mismatch");
    for (double c : cost)
        if (!std::isfinite(c)) throw Error("assignment: non-finite cost");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);  // p[col] = row matched to col, 1-based
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) minv[j] = cur, way[j] = j0;
                if (minv[j] < delta) delta = minv[j], j1 = j;
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment a;
    a.rowToCol.assign(n, -1);
    for (int j = 1; j <= n; ++j) a.rowToCol[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i) a.cost += cost[i * n + a.rowToCol[i]];
    return a;
}

}  // namespace qdf
