#include "qdflat/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "qdflat/clusters.hpp"
#include "qdflat/io.hpp"
#include "qdflat/metric.hpp"
#include "qdflat/periods.hpp"
#include "qdflat/qcmap.hpp"

namespace qdf {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string csv() const {
        std::string s;
        for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
        s += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + g17(r[i]);
            s += '\n';
        }
        return s;
    }
};

double default_tol(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::BallScaling:
        case ExperimentKind::Holder: return 0.05;
        case ExperimentKind::JacobianLimit: return 0.10;
        case ExperimentKind::Pipeline: return 0.20;
        case ExperimentKind::SyntheticFit: return 0.05 / 1.5;
    }
    return 0.05;
}

// rows computed independently, stored by index so the output order never depends on timing
template <class F>
void parallel_rows(std::size_t n, int threads, F&& f) {
    const int T = std::max(1, std::min<int>(threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()),
                                            static_cast<int>(n)));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errs(n);
    auto work = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                f(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < T; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (const auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& s) {
    if (s == "ball-scaling") return ExperimentKind::BallScaling;
    if (s == "holder") return ExperimentKind::Holder;
    if (s == "jacobian-limit") return ExperimentKind::JacobianLimit;
    if (s == "pipeline") return ExperimentKind::Pipeline;
    if (s == "synthetic-fit") return ExperimentKind::SyntheticFit;
    throw Error("unknown experiment kind '" + s + "' (ball-scaling, holder, jacobian-limit, pipeline, synthetic-fit)");
}

const char* experiment_kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::BallScaling: return "ball-scaling";
        case ExperimentKind::Holder: return "holder";
        case ExperimentKind::JacobianLimit: return "jacobian-limit";
        case ExperimentKind::Pipeline: return "pipeline";
        case ExperimentKind::SyntheticFit: return "synthetic-fit";
    }
    return "?";
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.eps.empty()) throw Error("experiment config: empty eps schedule");
    if (cfg.eps.size() < 4) throw Error("experiment config: eps schedule needs at least 4 values for a fit");
    for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
        if (!(cfg.eps[i] > 0.0)) throw Error("experiment config: eps values must be positive");
        if (i && !(cfg.eps[i] < cfg.eps[i - 1])) throw Error("experiment config: eps schedule must be strictly decreasing");
    }
    if (cfg.kind != ExperimentKind::SyntheticFit && !cfg.family)
        throw Error(std::string("experiment config: kind ") + experiment_kind_name(cfg.kind) + " needs a family");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw Error("experiment config: delta must lie in (0, 1)");
    if (!(cfg.tol > 0.0)) throw Error("experiment config: tol must be positive");
    if (cfg.passTol && !(*cfg.passTol > 0.0)) throw Error("experiment config: pass tolerance must be positive");
    if (!(cfg.r > 0.0)) throw Error("experiment config: r must be positive");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    ExperimentResult out;
    Table tab;
    std::vector<std::pair<double, double>> pts;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
    const double rel = cfg.passTol.value_or(default_tol(cfg.kind));

    switch (cfg.kind) {
        case ExperimentKind::BallScaling: {
            const auto rep = ball_scaling_probe(*cfg.family, cfg.eps, cfg.clusterFraction, std::max(cfg.tol, 1e-9));
            tab.header = {"r", "distance", "slope_running"};
            for (const auto& r : rep.rows) {
                tab.rows.push_back({r.r, r.distance, r.slopeRunning});
                pts.emplace_back(r.r, r.distance);
            }
            out.expected = rep.expected;
            extra["prefactor_ratio"] = {{"value", rep.prefactorRatio}, {"tolerance", 0.05}};
            break;
        }
        case ExperimentKind::Holder: {
            const auto rep = holder_exponent_probe(*cfg.family, cfg.eps, cfg.tol);
            tab.header = {"eps", "d_sym", "d_periods"};
            for (const auto& r : rep.rows) {
                tab.rows.push_back({r.eps, r.dSym, r.dPeriods});
                pts.emplace_back(r.dSym, r.dPeriods);
            }
            out.expected = rep.expected;
            extra["k"] = rep.k;
            break;
        }
        case ExperimentKind::JacobianLimit: {
            const auto rep = jacobian_cluster_limit_probe(*cfg.family, cfg.eps, cfg.tol);
            tab.header = {"eps", "diam_c", "internal_row_norm", "scaled_internal_norm", "proportionality_defect",
                          "ones_ratio"};
            for (const auto& r : rep.rows) {
                tab.rows.push_back({r.eps, r.diamC, r.internalRowNorm, r.scaledInternalNorm, r.proportionalityDefect,
                                    r.onesRatio});
                pts.emplace_back(r.diamC, r.scaledInternalNorm);
            }
            out.expected = rep.expectedExponent;
            extra["defect_monotone"] = rep.defectMonotone;
            break;
        }
        case ExperimentKind::Pipeline: {
            const ClusterFamily& F = *cfg.family;
            const int k = F.cluster_degree();
            out.expected = 2.0 / (2.0 + k);
            tab.header = {"eps", "d_chart", "K", "teich_bound"};
            tab.rows.assign(cfg.eps.size(), {});
            AssembleOptions opt;
            opt.delta = cfg.delta;
            opt.r = cfg.r;
            parallel_rows(cfg.eps.size(), cfg.threads, [&](std::size_t i) {
                const double e = cfg.eps[i];
                try {
                    const RationalQD q1 = F.at(e), q2 = F.at(F.compareFactor * e);
                    const PeriodChart chart = spanning_tree_chart(q1);
                    const double dc = d_euclidean_chart(q1, q2, chart, cfg.tol);
                    const DilatationReport rep = assemble_qc_map(q1, q2, opt);
                    tab.rows[i] = {e, dc, rep.K, rep.teichBound};
                } catch (const Error& err) {
                    throw Error("pipeline at eps = " + g17(e) + ": " + err.what());
                }
            });
            for (const auto& r : tab.rows) pts.emplace_back(r[1], r[3]);
            extra["k"] = k;
            break;
        }
        case ExperimentKind::SyntheticFit: {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> noise(0.0, 0.01);
            tab.header = {"x", "y"};
            for (const double x : cfg.eps) {
                const double y = 3.0 * std::pow(x, 1.5) * (1.0 + noise(rng));
                tab.rows.push_back({x, y});
                pts.emplace_back(x, y);
            }
            out.expected = 1.5;
            break;
        }
    }

    out.fit = fit_power_law(pts, 4);
    out.tolerance = rel * out.expected;
    out.pass = std::abs(out.fit.slope - out.expected) <= out.tolerance;
    out.csv = tab.csv();

    nlohmann::ordered_json j;
    j["schema"] = "qdflat.experiment/1";
    j["kind"] = experiment_kind_name(cfg.kind);
    j["seed"] = cfg.seed;
    j["eps"] = cfg.eps;
    j["delta"] = cfg.delta;
    j["tol"] = cfg.tol;
    j["rows"] = tab.rows.size();
    j["slope"] = {{"value", out.fit.slope}, {"ci95", out.fit.slopeCI}};
    j["intercept"] = {{"value", out.fit.intercept}, {"ci95", out.fit.interceptCI}};
    j["expected"] = {{"value", out.expected}, {"tolerance", out.tolerance}};
    j["residuals_log"] = out.fit.residuals;
    j["pass"] = out.pass;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    out.json = j.dump(2) + "\n";
    if (cfg.svg) out.svg = loglog_svg(pts, out.fit, std::string(experiment_kind_name(cfg.kind)) + " (seed " +
                                                        std::to_string(cfg.seed) + ")");

    if (!cfg.outDir.empty()) {
        std::filesystem::create_directories(cfg.outDir);
        const std::filesystem::path base = std::filesystem::path(cfg.outDir) / cfg.stem;
        auto emit = [&](const std::string& ext, const std::string& text) {
            const std::string p = base.string() + ext;
            io::write_text(p, text);
            out.files.push_back(p);
        };
        emit(".csv", out.csv);
        emit(".json", out.json);
        if (cfg.svg) emit(".svg", out.svg);
    }
    return out;
}

std::string loglog_svg(const std::vector<std::pair<double, double>>& pts, const PowerFit& fit,
                       const std::string& title) {
    const double W = 480, H = 360, m = 40;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& [x, y] : pts) {
        x0 = std::min(x0, std::log10(x));
        x1 = std::max(x1, std::log10(x));
        y0 = std::min(y0, std::log10(y));
        y1 = std::max(y1, std::log10(y));
    }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    auto X = [&](double lx) { return m + (lx - x0) / (x1 - x0) * (W - 2 * m); };
    auto Y = [&](double ly) { return H - m - (ly - y0) / (y1 - y0) * (H - 2 * m); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    std::string esc;
    for (char c : title) {
        if (c == '<') esc += "&lt;";
        else if (c == '>') esc += "&gt;";
        else if (c == '&') esc += "&amp;";
        else esc += c;
    }
    s << "<text x=\"" << m << "\" y=\"20\" font-size=\"13\">" << esc << ", slope " << g17(fit.slope) << "</text>\n";
    s << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << W - 2 * m << "\" height=\"" << H - 2 * m
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
    const double ln10 = std::log(10.0);
    const double fy0 = (fit.intercept + fit.slope * x0 * ln10) / ln10, fy1 = (fit.intercept + fit.slope * x1 * ln10) / ln10;
    s << "<line x1=\"" << X(x0) << "\" y1=\"" << Y(fy0) << "\" x2=\"" << X(x1) << "\" y2=\"" << Y(fy1)
      << "\" stroke=\"#c33\"/>\n";
    for (const auto& [x, y] : pts)
        s << "<circle cx=\"" << X(std::log10(x)) << "\" cy=\"" << Y(std::log10(y)) << "\" r=\"3\"/>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace qdf
