#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qdflat/clusters.hpp"
#include "qdflat/experiment.hpp"
#include "qdflat/io.hpp"
#include "qdflat/kernels.hpp"
#include "qdflat/metric.hpp"
#include "qdflat/nrrp.hpp"
#include "qdflat/periods.hpp"
#include "qdflat/qcmap.hpp"
#include "qdflat/surfaces.hpp"

using json = nlohmann::ordered_json;
using namespace qdf;

namespace {

constexpr int kExitPass = 0, kExitError = 1, kExitFail = 2;
constexpr const char* kOutEnv = "QDFLAT_OUT";

struct Global {
    double tol = 1e-12;
    std::uint64_t seed = 1;
    std::string out;
    std::string backend = "auto";
};

std::string resolve(const Global& g, const std::string& file) {
    if (file.empty() || file == "-") return file;
    std::filesystem::path p(file);
    if (!p.is_absolute() && !g.out.empty()) p = std::filesystem::path(g.out) / p;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p.string();
}

void emit(const Global& g, const std::string& file, const std::string& text) {
    if (file.empty()) return;
    if (file == "-") {
        std::cout << text;
        return;
    }
    io::write_text(resolve(g, file), text);
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

cplx parse_point(const std::string& s) {
    const auto c = s.find(',');
    try {
        if (c == std::string::npos) return {std::stod(s), 0.0};
        return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
    } catch (const std::exception&) {
        throw Error("cannot read point '" + s + "' (expected re,im)");
    }
}

bool looks_like_polygons(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open '" + path + "'");
    for (std::string line; std::getline(f, line);) {
        std::istringstream ss(line.substr(0, line.find('#')));
        std::string t;
        if (ss >> t) return t == "polygon";
    }
    return false;
}

json sing_json(const SingularityRecord& s) {
    return {{"z", cjson(s.z)}, {"order", s.order}, {"marked", s.marked}};
}

json diff_json(const RationalQD& q) {
    json a = json::array();
    for (const auto& s : q.sing) a.push_back(sing_json(s));
    return {{"scale", cjson(q.scale)}, {"singularities", a}, {"infinity_order", q.infinity_order()}};
}

json report_json(const DilatationReport& r) {
    json regs = json::array();
    for (const auto& x : r.regions) regs.push_back({{"id", x.id}, {"kind", x.kind}, {"K", x.K}, {"detail", x.detail}});
    return {{"K_total", r.K}, {"teich_bound", r.teichBound}, {"regions", regs}};
}

std::string jacobian_csv(const PeriodJacobian& J) {
    std::ostringstream os;
    os.precision(17);
    os << "i,j,re,im\n";
    for (Eigen::Index i = 0; i < J.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < J.matrix.cols(); ++j)
            os << i << ',' << j << ',' << J.matrix(i, j).real() << ',' << J.matrix(i, j).imag() << '\n';
    return os.str();
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flat geometry of quadratic differentials: periods, metrics, clusters, Delaunay, NRRPs, qc maps"};
    app.require_subcommand(1);
    Global g;
    if (const char* env = std::getenv(kOutEnv)) g.out = env;
    app.add_option("--tol", g.tol, "quadrature / solver tolerance")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "RNG seed, recorded in every artifact");
    app.add_option("--out", g.out, std::string("output directory for relative file names (default $") + kOutEnv + ")");
    app.add_option("--backend", g.backend, "integrand kernel: auto, scalar, avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
        ->each([](const std::string& b) {
            if (b == "scalar") kernels::set_backend(kernels::Backend::Scalar);
            if (b == "avx2") kernels::set_backend(kernels::Backend::AVX2);
        });
    app.fallthrough();

    int code = kExitPass;

    // qdiff
    auto* qd = app.add_subcommand("qdiff", "sphere differentials");
    qd->require_subcommand(1);
    std::string qfile, qfile2;
    auto* qdv = qd->add_subcommand("validate", "check the invariants of a differential file");
    qdv->add_option("qfile", qfile)->required();
    qdv->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const ValidityReport v = validate(q);
        print({{"ok", v.ok}, {"issues", v.issues}, {"infinity_order", v.infinityOrder}, {"differential", diff_json(q)}});
        if (!v.ok) code = kExitFail;
    });
    std::vector<int> fix;
    std::string nout;
    auto* qdn = qd->add_subcommand("normalize", "Mobius normalization sending three singularities to 0, 1, inf");
    qdn->add_option("qfile", qfile)->required();
    qdn->add_option("--fix", fix, "three indices (q.size() means infinity)")->expected(3)->delimiter(',')->required();
    qdn->add_option("--write", nout, "normalized differential file");
    qdn->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const NormalizeResult r = mobius_normalize(q, {fix[0], fix[1], fix[2]});
        emit(g, nout, io::format_differential(r.q));
        print({{"map", {{"a", cjson(r.map.a)}, {"b", cjson(r.map.b)}, {"c", cjson(r.map.c)}, {"d", cjson(r.map.d)}}},
               {"differential", diff_json(r.q)}});
    });
    auto* qdp = qd->add_subcommand("pullback", "pull back through the double cover branched at +-i");
    qdp->add_option("qfile", qfile)->required();
    qdp->add_option("--write", nout, "pulled-back differential file");
    qdp->callback([&] {
        const RationalQD r = double_cover_pullback(io::read_differential(qfile));
        emit(g, nout, io::format_differential(r));
        print({{"differential", diff_json(r)}});
    });

    // periods
    auto* pe = app.add_subcommand("periods", "contour integrals of sqrt(q)");
    pe->require_subcommand(1);
    std::string cfile, csv;
    auto* pev = pe->add_subcommand("eval", "period along a polyline contour");
    pev->add_option("qfile", qfile)->required();
    pev->add_option("contour", cfile)->required();
    pev->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const Contour c = make_contour(q, io::read_contour(cfile));
        const PeriodValue v = period_detail(q, c, g.tol);
        print({{"period", cjson(v.value)}, {"error", v.error}, {"flat_length", flat_length(q, c, std::max(g.tol, 1e-10))}});
    });
    std::string chartMode = "auto";
    auto* pej = pe->add_subcommand("jacobian", "Jacobian of a spanning-tree period chart");
    pej->add_option("qfile", qfile)->required();
    pej->add_option("--chart", chartMode)->check(CLI::IsMember({"auto"}));
    pej->add_option("--csv", csv, "CSV i,j,re,im ('-' for stdout)");
    pej->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const PeriodChart chart = spanning_tree_chart(q, 0.0, g.tol);
        const PeriodJacobian J = period_jacobian(q, chart, g.tol);
        emit(g, csv, jacobian_csv(J));
        json edges = json::array();
        for (std::size_t k = 0; k < chart.edges.size(); ++k)
            edges.push_back({{"from", chart.edges[k].first}, {"to", chart.edges[k].second},
                             {"period", cjson(chart.values[k])}});
        if (csv != "-") print({{"chart", edges}, {"rows", J.matrix.rows()}, {"cols", J.matrix.cols()}});
    });

    // metric
    auto* me = app.add_subcommand("metric", "flat distances");
    me->require_subcommand(1);
    std::string pa, pb;
    auto* med = me->add_subcommand("dist", "flat distance between two points (re,im)");
    med->add_option("qfile", qfile)->required();
    med->add_option("a", pa)->required();
    med->add_option("b", pb)->required();
    med->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const DistanceResult d = flat_distance(q, parse_point(pa), parse_point(pb), std::max(g.tol, 1e-9));
        print({{"distance", d.distance}, {"error_bound", d.errorBound}, {"levels", d.levels}});
    });
    std::string ffile;
    std::vector<double> radii;
    double fraction = 0.25;
    auto* meb = me->add_subcommand("probe-balls", "d_q(center, boundary of B_r) against r");
    meb->add_option("familyfile", ffile)->required();
    meb->add_option("--radii", radii)->delimiter(',')->required();
    meb->add_option("--cluster-fraction", fraction);
    meb->add_option("--csv", csv, "CSV r,distance,slope_running");
    meb->callback([&] {
        const BallScalingReport r = ball_scaling_probe(io::read_family(ffile), radii, fraction, std::max(g.tol, 1e-9));
        std::ostringstream os;
        os.precision(17);
        os << "r,distance,slope_running\n";
        for (const auto& row : r.rows) os << row.r << ',' << row.distance << ',' << row.slopeRunning << '\n';
        emit(g, csv, os.str());
        if (csv != "-")
            print({{"slope", {{"value", r.slope}, {"ci95", r.slopeCI}}}, {"expected", r.expected}, {"m", r.m},
                   {"prefactor_ratio", r.prefactorRatio}});
    });

    // clusters
    auto* cl = app.add_subcommand("clusters", "delta-clusters, d_Sym, Holder probe");
    cl->require_subcommand(1);
    double delta = 0.1;
    std::string metricName = "c", jout;
    auto* clt = cl->add_subcommand("tree", "nested delta-cluster tree");
    clt->add_option("qfile", qfile)->required();
    clt->add_option("--delta", delta)->check(CLI::Range(0.0, 1.0));
    clt->add_option("--metric", metricName)->check(CLI::IsMember({"q", "c"}));
    clt->add_option("--json", jout, "write the tree as JSON");
    clt->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const ClusterTree t = cluster_tree(q, delta, metricName == "q" ? ClusterMetric::Flat : ClusterMetric::Complex);
        json nodes = json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"members", n.members}, {"parent", n.parent}, {"children", n.children},
                             {"diam_c", n.diamC}, {"diam_q", n.diamQ}, {"m", n.totalOrder}, {"marked", n.markedCount}});
        const json j = {{"delta", t.delta}, {"metric", metricName}, {"nodes", nodes}};
        emit(g, jout, j.dump(2) + "\n");
        print(j);
    });
    auto* cld = cl->add_subcommand("dsym", "d_Sym between two differentials");
    cld->add_option("q1", qfile)->required();
    cld->add_option("q2", qfile2)->required();
    cld->callback([&] {
        print({{"d_sym", d_sym(io::read_differential(qfile), io::read_differential(qfile2))}});
    });
    std::vector<double> eps;
    auto* clh = cl->add_subcommand("holder", "chart period difference against d_Sym");
    clh->add_option("familyfile", ffile)->required();
    clh->add_option("--eps", eps)->delimiter(',')->required();
    clh->add_option("--csv", csv, "CSV eps,d_sym,d_periods");
    clh->callback([&] {
        const HolderReport r = holder_exponent_probe(io::read_family(ffile), eps, std::max(g.tol, 1e-14));
        std::ostringstream os;
        os.precision(17);
        os << "eps,d_sym,d_periods\n";
        for (const auto& row : r.rows) os << row.eps << ',' << row.dSym << ',' << row.dPeriods << '\n';
        emit(g, csv, os.str());
        if (csv != "-")
            print({{"k", r.k}, {"slope", {{"value", r.slope}, {"ci95", r.slopeCI}}}, {"expected", r.expected}});
    });

    // surfaces
    auto* su = app.add_subcommand("surfaces", "polygon surfaces, Delaunay, NRRPs");
    su->require_subcommand(1);
    std::string sfile, svg;
    bool linf = false;
    auto* sud = su->add_subcommand("delaunay", "Delaunay (or L-infinity Delaunay) triangulation with certificate");
    sud->add_option("spec", sfile)->required();
    sud->add_flag("--linf", linf);
    sud->add_option("--svg", svg);
    sud->callback([&] {
        const HalfTranslationSurface s = build_from_polygons(io::read_polygons(sfile));
        const Triangulation t = linf ? linf_delaunay(s) : delaunay(s);
        const DiameterEstimate D = surface_diameter(t);
        const CertificateReport c =
            linf ? certify_linf_delaunay(t, 2.0 * D.diameter * 1.01) : certify_delaunay(t);
        double maxEdge = 0.0;
        for (std::size_t e = 0; e < t.edges.size(); ++e) maxEdge = std::max(maxEdge, t.edge_length(static_cast<int>(e)));
        emit(g, svg, triangulation_svg(t));
        json sing = json::array();
        for (const auto& v : s.singularities) sing.push_back({{"angle", v.angle}, {"order", v.order}, {"marked", v.marked}});
        print({{"genus", s.genus}, {"singularities", sing}, {"faces", t.faces.size()}, {"edges", t.edges.size()},
               {"flips", t.flips}, {"certificate", {{"ok", c.ok}, {"detail", c.detail}}}, {"max_edge", maxEdge},
               {"diameter_estimate", D.diameter}});
        if (!c.ok) code = kExitFail;
    });
    std::string nrrpDir;
    auto* sun = su->add_subcommand("nrrp", "NRRP system of a sphere differential");
    sun->add_option("qfile", qfile)->required();
    sun->add_option("--delta", delta)->check(CLI::Range(0.0, 1.0));
    sun->add_option("--write-dir", nrrpDir, "write nrrp_<k>.txt files here (relative to --out)");
    sun->callback([&] {
        const RationalQD q = io::read_differential(qfile);
        const NrrpSystem S = nrrp_system(q, delta);
        json list = json::array();
        for (std::size_t k = 0; k < S.nrrps.size(); ++k) {
            const NRRP& P = S.nrrps[k];
            list.push_back({{"members", S.parts[k]}, {"sides", P.side_count()}, {"side_lengths", P.side_lengths()},
                            {"R", P.R}, {"closure", P.closure}, {"radius", P.radius}});
            if (!nrrpDir.empty())
                emit(g, (std::filesystem::path(nrrpDir) / ("nrrp_" + std::to_string(k) + ".txt")).string(),
                     io::format_nrrp(P));
        }
        print({{"nrrps", list}, {"separation", S.separation}, {"max_side", S.maxSide}, {"separated", S.separated}});
    });
    auto* sudb = su->add_subcommand("double", "real-symmetric double of an NRRP file");
    sudb->add_option("nrrpfile", sfile)->required();
    sudb->add_option("--write", nout, "doubled differential file");
    sudb->callback([&] {
        DoubleOptions o;
        o.tol = std::max(g.tol, 1e-13);
        const DoubleResult d = double_nrrp(io::read_nrrp(sfile), o);
        emit(g, nout, io::format_differential(d.q));
        json w = json::array();
        for (const cplx z : d.interior) w.push_back(cjson(z));
        print({{"corners", d.corners}, {"interior", w}, {"scale", d.q.scale.real()}, {"residual", d.residual},
               {"ratio_residual", d.ratioResidual}, {"iterations", d.iterations}, {"order", d.order},
               {"history", d.history}, {"converged", d.converged}});
        if (!d.converged) code = kExitFail;
    });

    // qcmap
    auto* qc = app.add_subcommand("qcmap", "quasiconformal maps and Teichmuller bounds");
    qc->require_subcommand(1);
    double r = 2.0;
    std::vector<double> rSweep;
    std::string report;
    auto* qca = qc->add_subcommand("assemble", "assembled qc map between two differentials or two polygon surfaces");
    qca->add_option("spec1", qfile)->required();
    qca->add_option("spec2", qfile2)->required();
    qca->add_option("--delta", delta)->check(CLI::Range(0.0, 1.0));
    qca->add_option("--r", r)->check(CLI::PositiveNumber);
    qca->add_option("--r-sweep", rSweep, "keep the best r per NRRP")->delimiter(',');
    qca->add_option("--report", report, "report JSON");
    qca->callback([&] {
        AssembleOptions o;
        o.delta = delta;
        o.r = r;
        o.rSweep = rSweep;
        const bool poly1 = looks_like_polygons(qfile), poly2 = looks_like_polygons(qfile2);
        if (poly1 != poly2) throw Error("qcmap assemble: both inputs must be polygon specs or both differentials");
        const DilatationReport rep =
            poly1 ? assemble_qc_map(build_from_polygons(io::read_polygons(qfile)),
                                    build_from_polygons(io::read_polygons(qfile2)), o)
                  : assemble_qc_map(io::read_differential(qfile), io::read_differential(qfile2), o);
        const json j = report_json(rep);
        emit(g, report, j.dump(2) + "\n");
        print(j);
    });

    // experiment
    auto* ex = app.add_subcommand("experiment", "exponent experiments with CSV/JSON artifacts");
    std::string kind, stem = "experiment";
    bool wantSvg = false;
    std::optional<double> passTol;
    int threads = 0;
    ex->add_option("kind", kind, "ball-scaling, holder, jacobian-limit, pipeline, synthetic-fit")->required();
    ex->add_option("--family", ffile, "family file");
    ex->add_option("--eps", eps, "strictly decreasing schedule (radii for ball-scaling)")->delimiter(',');
    ex->add_option("--delta", delta)->check(CLI::Range(0.0, 1.0));
    ex->add_option("--r", r)->check(CLI::PositiveNumber);
    ex->add_option("--cluster-fraction", fraction);
    ex->add_option("--pass-tol", passTol, "relative slope tolerance");
    ex->add_option("--stem", stem, "artifact file stem");
    ex->add_option("--threads", threads);
    ex->add_flag("--svg", wantSvg);
    ex->callback([&] {
        ExperimentConfig c;
        c.kind = parse_experiment_kind(kind);
        if (!ffile.empty()) c.family = io::read_family(ffile);
        c.eps = eps;
        c.delta = delta;
        c.tol = g.tol;
        c.seed = g.seed;
        c.passTol = passTol;
        c.clusterFraction = fraction;
        c.r = r;
        c.outDir = g.out.empty() ? "." : g.out;
        c.stem = stem;
        c.svg = wantSvg;
        c.threads = threads;
        const ExperimentResult res = run_experiment(c);
        std::cout << res.json;
        if (!res.pass) code = kExitFail;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return code;
}
