#include "qdflat/fit.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "qdflat/common.hpp"

namespace qdf {

PowerFit fit_power_law(const std::vector<std::pair<double, double>>& pairs, std::size_t minPoints) {
    if (pairs.size() < std::max<std::size_t>(minPoints, 2))
        throw Error("fit_power_law: need at least " + std::to_string(std::max<std::size_t>(minPoints, 2)) +
                    " points, got " + std::to_string(pairs.size()));
    const std::size_t n = pairs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x, y] = pairs[i];
        if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
            throw Error("fit_power_law: nonpositive data at point " + std::to_string(i));
        lx[i] = std::log(x);
        ly[i] = std::log(y);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw Error("fit_power_law: all x values equal");
    PowerFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        f.residuals.push_back(r);
        sse += r * r;
    }
    if (n > 2) {
        const double s2 = sse / (n - 2);
        boost::math::students_t dist(static_cast<double>(n - 2));
        const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
        f.slopeCI = tq * std::sqrt(s2 / sxx);
        f.interceptCI = tq * std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    } else {
        f.slopeCI = std::numeric_limits<double>::infinity();
        f.interceptCI = std::numeric_limits<double>::infinity();
    }
    return f;
}

}  // namespace qdf
