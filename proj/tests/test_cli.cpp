#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "qdflat/experiment.hpp"
#include "qdflat/fit.hpp"
#include "qdflat/io.hpp"

using namespace qdf;

namespace {

std::string error_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("differential files") {
    std::istringstream in("# three poles\nscale 2 -1\n0 0 -1 1\n\n1.5 0.25 2 0  # a double zero\ninfinity 1\n");
    const RationalQD q = io::parse_differential(in, "t.qd");
    CHECK(q.scale == cplx(2.0, -1.0));
    REQUIRE(q.size() == 2);
    CHECK(q.sing[1].z == cplx(1.5, 0.25));
    CHECK(q.sing[1].order == 2);
    CHECK_FALSE(q.sing[1].marked);
    CHECK(q.infinityMarked);

    std::istringstream again(io::format_differential(q));
    const RationalQD r = io::parse_differential(again);
    CHECK(io::format_differential(r) == io::format_differential(q));
    CHECK(r.sing[0].marked);

    auto err = [](const std::string& text) {
        return error_of([&] {
            std::istringstream s(text);
            io::parse_differential(s, "x.qd");
        });
    };
    CHECK(err("scale 1 0\n0 0 1\n") == "x.qd:2: expected re im order marked (4 fields), got 3");
    CHECK(err("0 0 1 0\n") == "x.qd:1: missing 'scale re im' header before the first record");
    CHECK(err("scale 1 0\n\n0 zz 1 0\n") == "x.qd:3: not a number: 'zz'");
    CHECK(err("scale 1 0\n0 0 -2 0\n") == "x.qd:2: order must be >= -1");
    CHECK(err("scale 1 0\n0 0 1 2\n") == "x.qd:2: flag must be 0 or 1, got '2'");
    CHECK(err("scale 0 0\n") == "x.qd:1: scale must be nonzero");
    CHECK(err("# nothing\n") == "x.qd: missing 'scale re im' header");
    CHECK_THROWS_WITH(io::read_differential("/nonexistent/q.qd"), "cannot open '/nonexistent/q.qd'");
}

TEST_CASE("family files") {
    std::istringstream in("scale 1 0\ncenter 0.5 0\ncompare 3\n0.6 0 1 0 1\n0.4 0 1 0 1\n4 0 -1 1 0\n");
    const ClusterFamily f = io::parse_family(in);
    CHECK(f.center == cplx(0.5, 0.0));
    CHECK(f.compareFactor == 3.0);
    CHECK(f.colliding() == std::vector<int>{0, 1});
    CHECK(f.cluster_degree() == 2);

    std::istringstream bad("compare 1\n0 0 1 0 1\n");
    CHECK_THROWS_WITH(io::parse_family(bad, "f"), "f:1: compare factor must be positive and != 1");
    std::istringstream none("1 0 -1 1 0\n");
    CHECK_THROWS_WITH(io::parse_family(none, "f"), "f: family has no cluster points");
}

TEST_CASE("contour and polygon files") {
    std::istringstream c("-1 0\n0 1\n1 0\n");
    CHECK(io::parse_contour(c).size() == 3);
    std::istringstream one("0 0\n");
    CHECK_THROWS_AS(io::parse_contour(one), Error);

    std::istringstream p("polygon\n0 0\n1 0\n1 1\n0 1\nend\n(0,0) <-> (0,2) 1\n(0, 1) <-> (0, 3) -1\n");
    const PolygonSpec s = io::parse_polygons(p);
    REQUIRE(s.polygons.size() == 1);
    CHECK(s.polygons[0].v.size() == 4);
    REQUIRE(s.gluings.size() == 2);
    CHECK(s.gluings[1].edgeA == 1);
    CHECK(s.gluings[1].edgeB == 3);
    CHECK(s.gluings[1].sign == -1);

    auto err = [](const std::string& text) {
        return error_of([&] {
            std::istringstream s(text);
            io::parse_polygons(s, "p");
        });
    };
    CHECK(err("polygon\n0 0\n1 0\nend\n") == "p:4: polygon with fewer than three vertices");
    CHECK(err("polygon\n0 0\n1 0\n0 1\nend\n(0,0) <-> (1,0) 1\n") == "p:6: gluing names an unknown polygon");
    CHECK(err("polygon\n0 0\n1 0\n0 1\nend\n(0,0) <-> (0,3) 1\n") == "p:6: gluing names an unknown edge");
    CHECK(err("polygon\n0 0\n1 0\n0 1\nend\n(0,0) <-> (0,1) 2\n") == "p:6: gluing sign must be +1 or -1");
    CHECK(err("polygon\n0 0\n") == "p: unterminated polygon");
    CHECK(err("end\n") == "p:1: 'end' without 'polygon'");
}

TEST_CASE("nrrp files round-trip") {
    NRRP P;
    P.center = {0.25, -0.5};
    for (int k = 0; k < 6; ++k) {
        NrrpSide s;
        s.dir = ipow(cplx(0, 1), k);
        s.length = 0.1 + 0.01 * k;
        P.sides.push_back(s);
    }
    P.interior = {0};
    P.interiorSing = {{{0.25, -0.5}, 1, false}};
    P.interiorRatio = {{0.3, 0.1}};
    P.m = 1;
    std::istringstream in(io::format_nrrp(P));
    const NRRP Q = io::parse_nrrp(in);
    CHECK(io::format_nrrp(Q) == io::format_nrrp(P));
    CHECK(Q.m == 1);
    CHECK(Q.side_count() == 6);
    CHECK_FALSE(Q.degenerate);

    std::istringstream bad("side 1 0 -1\n");
    CHECK_THROWS_WITH(io::parse_nrrp(bad, "n"), "n:1: side length must be positive");
    std::istringstream unk("corner 0 0\n");
    CHECK_THROWS_WITH(io::parse_nrrp(unk, "n"), "n:1: unknown record 'corner'");
}

TEST_CASE("power-law fits") {
    std::vector<std::pair<double, double>> sq;
    for (double x : {0.5, 0.25, 0.125, 0.0625, 0.03125}) sq.emplace_back(x, x * x);
    const PowerFit f = fit_power_law(sq);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(f.intercept) < 1e-12);
    CHECK(f.slopeCI < 1e-10);
    CHECK(f.n == 5);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < 12; ++k) {
        const double x = std::pow(2.0, -k);
        pts.emplace_back(x, 3.0 * std::pow(x, 1.5) * std::exp(noise(rng)));
    }
    const PowerFit g = fit_power_law(pts);
    CHECK(g.slope >= 1.45);
    CHECK(g.slope <= 1.55);
    CHECK(std::exp(g.intercept) == doctest::Approx(3.0).epsilon(0.05));
    CHECK(g.slopeCI > 0.0);
    CHECK(std::abs(g.slope - 1.5) < 3 * g.slopeCI + 1e-3);

    CHECK_THROWS_AS(fit_power_law({{1.0, 1.0}, {0.5, 0.25}}), Error);
    CHECK_THROWS_AS(fit_power_law({{1.0, 1.0}, {0.5, 0.0}, {0.25, 1.0}, {0.1, 1.0}}), Error);
}

TEST_CASE("experiment configuration") {
    ExperimentConfig c;
    c.kind = ExperimentKind::SyntheticFit;
    CHECK_THROWS_WITH(validate(c), "experiment config: empty eps schedule");
    c.eps = {0.1, 0.05, 0.025};
    CHECK_THROWS_AS(validate(c), Error);
    c.eps = {0.1, 0.05, 0.06, 0.01};
    CHECK_THROWS_AS(validate(c), Error);
    c.eps = {0.1, 0.05, 0.025, 0.0125};
    CHECK_NOTHROW(validate(c));
    c.kind = ExperimentKind::Holder;
    CHECK_THROWS_AS(validate(c), Error);  // family required

    for (auto k : {ExperimentKind::BallScaling, ExperimentKind::Holder, ExperimentKind::JacobianLimit,
                   ExperimentKind::Pipeline, ExperimentKind::SyntheticFit})
        CHECK(parse_experiment_kind(experiment_kind_name(k)) == k);
    CHECK_THROWS_AS(parse_experiment_kind("nope"), Error);
}

TEST_CASE("synthetic experiment is deterministic and passes") {
    ExperimentConfig c;
    c.kind = ExperimentKind::SyntheticFit;
    c.eps = {0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625};
    c.seed = 42;
    const ExperimentResult a = run_experiment(c);
    const ExperimentResult b = run_experiment(c);
    CHECK(a.csv == b.csv);
    CHECK(a.json == b.json);
    CHECK(a.pass);
    CHECK(a.expected == 1.5);
    CHECK(std::abs(a.fit.slope - 1.5) <= a.tolerance);
    CHECK(a.json.find("\"qdflat.experiment/1\"") != std::string::npos);
    CHECK(a.files.empty());
    c.seed = 43;
    CHECK(run_experiment(c).csv != a.csv);
}

TEST_CASE("holder experiment on a triple zero") {
    // three simple zeros collapsing: chart difference scales with d_Sym^{(2 + 3) / 2}
    ClusterFamily f;
    for (int k = 0; k < 3; ++k) f.pts.push_back({std::polar(1.0, 2 * kPi * k / 3), 1, false, true});
    // generic outside; a rotation-symmetric ring of poles kills the leading term
    f.pts.push_back({{1.0, 1.0}, 1, false, false});
    f.pts.push_back({{-1.5, 0.5}, -1, true, false});
    ExperimentConfig c;
    c.kind = ExperimentKind::Holder;
    c.family = f;
    c.eps = {0.08, 0.04, 0.02, 0.01, 0.005};
    c.tol = 1e-12;
    const ExperimentResult r = run_experiment(c);
    CHECK(r.expected == 2.5);
    CHECK(r.fit.slope == doctest::Approx(2.5).epsilon(0.05));
    CHECK(r.fit.n == 5);
}

TEST_CASE("log-log svg") {
    const PowerFit f = fit_power_law({{1.0, 1.0}, {0.5, 0.25}, {0.25, 0.0625}, {0.125, 1.0 / 64}});
    const std::string s = loglog_svg({{1.0, 1.0}, {0.5, 0.25}, {0.25, 0.0625}, {0.125, 1.0 / 64}}, f, "a<b");
    CHECK(s.rfind("<svg", 0) == 0);
    CHECK(s.find("a&lt;b") != std::string::npos);
    CHECK(s.find("</svg>") != std::string::npos);
}
