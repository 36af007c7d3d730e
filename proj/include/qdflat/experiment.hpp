#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "qdflat/fit.hpp"
#include "qdflat/qdiff.hpp"

namespace qdf {

enum class ExperimentKind {
    BallScaling,    // d_q(center, boundary of B_r) against r, expected (2 + m) / 2
    Holder,         // chart period difference against d_Sym, expected (2 + k) / 2
    JacobianLimit,  // internal Jacobian rows against diam, expected m / 2
    Pipeline,       // assembled teichBound against chart distance, expected 2 / (2 + k)
    SyntheticFit,   // y = 3 x^1.5 with 1% multiplicative noise from the seed
};

ExperimentKind parse_experiment_kind(const std::string& s);
const char* experiment_kind_name(ExperimentKind k);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Holder;
    std::optional<ClusterFamily> family;  // required except for SyntheticFit
    std::vector<double> eps;              // strictly decreasing, >= 4 entries (radii for BallScaling)
    double delta = 0.1;
    double tol = 1e-13;
    std::uint64_t seed = 1;
    std::optional<double> passTol;        // relative slope tolerance; per-kind default
    double clusterFraction = 0.25;        // BallScaling
    double r = 2.0;                       // Pipeline
    std::string outDir;                   // empty: nothing written
    std::string stem = "experiment";
    bool svg = false;
    int threads = 0;                      // 0: hardware concurrency
};

// Throws qdf::Error naming the first problem.
void validate(const ExperimentConfig& cfg);

struct ExperimentResult {
    std::string csv;
    std::string json;
    std::string svg;  // empty unless requested
    std::vector<std::string> files;
    PowerFit fit;
    double expected = 0.0;
    double tolerance = 0.0;  // absolute, on the slope
    bool pass = false;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Minimal log-log scatter with the fitted line.
std::string loglog_svg(const std::vector<std::pair<double, double>>& pts, const PowerFit& fit,
                       const std::string& title);

}  // namespace qdf
