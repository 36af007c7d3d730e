#pragma once

#include <utility>
#include <vector>

namespace qdf {

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;  // log-space: log y = intercept + slope * log x
    double slopeCI = 0.0;    // 95% half-width
    double interceptCI = 0.0;
    std::vector<double> residuals;  // log-space
    std::size_t n = 0;
};

PowerFit fit_power_law(const std::vector<std::pair<double, double>>& pairs, std::size_t minPoints = 4);

}  // namespace qdf
