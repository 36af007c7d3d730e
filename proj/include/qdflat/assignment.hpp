#pragma once

#include <vector>

namespace qdf {

struct Assignment {
    std::vector<int> rowToCol;
    double cost = 0.0;
};

// Minimum-cost perfect matching on a square cost matrix given row-major (n x n).
Assignment solve_assignment(const std::vector<double>& cost, int n);

}  // namespace qdf
