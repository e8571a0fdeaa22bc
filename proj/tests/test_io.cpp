#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "slmc/io.hpp"

using namespace slmc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("slmc_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("points csv round trip, with and without oracle coordinates") {
    TempDir tmp;
    std::vector<Point2> pts{{1.25, 2.5}, {3.0, 4.0}, {5.5, 6.125}};
    CoarseningFlags flags;
    flags.observed = {1, 0, 1};
    flags.region = {0, 3, 2};

    io::write_points_csv(tmp.file("pts.csv"), pts, flags, true);
    const io::PointsFile a = io::read_points_csv(tmp.file("pts.csv"));
    REQUIRE(a.points.size() == 3);
    CHECK(a.points[1].x == doctest::Approx(3.0));
    CHECK(a.flags.observed[1] == 0);
    CHECK(a.flags.region[1] == 3);

    io::write_points_csv(tmp.file("pub.csv"), pts, flags, false);
    const io::PointsFile b = io::read_points_csv(tmp.file("pub.csv"));
    CHECK(b.flags.observed[1] == 0);  // coarsened row present, no coordinates
}

TEST_CASE("malformed csv errors carry line numbers") {
    TempDir tmp;
    {
        std::ofstream os(tmp.file("bad.csv"));
        os << "id,x,y,observed,region\n0,1.0,2.0,1,0\n1,oops,2.0,1,0\n";
    }
    try {
        io::read_points_csv(tmp.file("bad.csv"));
        FAIL("expected IoError");
    } catch (const io::IoError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("dataset csv round trip and header validation") {
    TempDir tmp;
    Eigen::VectorXd y(2);
    y << 1.5, -2.25;
    Eigen::MatrixXd x(2, 3);
    x << 1, 0.5, -1, 1, 2.5, 0.25;
    io::write_dataset_csv(tmp.file("d.csv"), y, x);
    const io::DatasetFile d = io::read_dataset_csv(tmp.file("d.csv"));
    CHECK(d.y[1] == doctest::Approx(-2.25));
    CHECK(d.x(1, 1) == doctest::Approx(2.5));

    {
        std::ofstream os(tmp.file("badhdr.csv"));
        os << "y,z0\n1,2\n";
    }
    CHECK_THROWS_AS(io::read_dataset_csv(tmp.file("badhdr.csv")), io::IoError);
}

TEST_CASE("partition json round trip rebuilds the identical partition") {
    TempDir tmp;
    const Partition part = build_hex_partition(Window::default_window(), 1.5);
    io::write_partition_json(tmp.file("part.json"), part);
    const Partition back = io::read_partition_json(tmp.file("part.json"));
    REQUIRE(back.size() == part.size());
    for (int r = 0; r < part.size(); ++r) {
        CHECK(back.centroid(r).x == doctest::Approx(part.centroid(r).x).epsilon(1e-12));
        CHECK(back.region_area(r) == doctest::Approx(part.region_area(r)).epsilon(1e-12));
    }
}

TEST_CASE("field json round trip") {
    TempDir tmp;
    IntensityField f;
    f.nx = 2;
    f.ny = 2;
    f.x0 = 0;
    f.y0 = 0;
    f.dx = 0.5;
    f.dy = 0.5;
    f.value = {1.0, 2.0, 3.0, 4.0};
    f.inside = {1, 1, 0, 1};
    io::write_field_json(tmp.file("f.json"), f);
    const IntensityField g = io::read_field_json(tmp.file("f.json"));
    CHECK(g.value == f.value);
    CHECK(g.inside == f.inside);
    CHECK(g.integral() == doctest::Approx(f.integral()));

    io::write_field_csv(tmp.file("f.csv"), f);
    std::ifstream is(tmp.file("f.csv"));
    std::string header;
    std::getline(is, header);
    CHECK(header == "x,y,value");
}

TEST_CASE("estimates csv has the documented schema") {
    TempDir tmp;
    io::EstimateRow row;
    row.result.method = "SREM";
    row.result.params = {0.4, Eigen::Vector3d(1.0, 2.0, -1.0), 0.9};
    row.result.converged = true;
    row.result.iterations = 12;
    row.result.seconds = 0.125;
    row.impacts_beta1 = {2.0, 1.1, 0.9};
    row.has_impacts = true;
    io::write_estimates_csv(tmp.file("est.csv"), {row});
    std::ifstream is(tmp.file("est.csv"));
    std::string header, line;
    std::getline(is, header);
    CHECK(header ==
          "method,rho,beta0,beta1,beta2,sigma2,D_beta1,M_beta1,T_beta1,converged,iterations,"
          "seconds");
    std::getline(is, line);
    CHECK(line.substr(0, 5) == "SREM,");
}

TEST_CASE("metrics csv layout mirrors the table") {
    TempDir tmp;
    MetricsTable t;
    t.scenario = "A";
    t.methods = {"NCM"};
    t.quantities = {"rho", "beta0"};
    t.cells = {{{4.78, -0.40}, {10.4, -0.7}}};
    t.used = {50};
    t.skipped = {0};
    t.replications = 50;
    io::write_metrics_csv(tmp.file("m.csv"), t);
    std::ifstream is(tmp.file("m.csv"));
    std::string header, line;
    std::getline(is, header);
    CHECK(header == "method,rho_rrmse,rho_rbias,beta0_rrmse,beta0_rbias,used,skipped");
    std::getline(is, line);
    CHECK(line == "NCM,4.78,-0.4,10.4,-0.7,50,0");
}

TEST_CASE("unknown config keys are rejected") {
    const nlohmann::json j = nlohmann::json::parse(R"({"population": 10, "typo_key": 1})");
    CHECK_THROWS_AS(io::dme_from_json(j, DmeConfig{}), io::IoError);

    const nlohmann::json ok = nlohmann::json::parse(
        R"({"population": 10, "draws": 4, "elite_fraction": 0.2})");
    const DmeConfig cfg = io::dme_from_json(ok, DmeConfig{});
    CHECK(cfg.population == 10);
    CHECK(cfg.draws_per_eval == 4);
    CHECK(cfg.elite_fraction == 0.2);
}

TEST_CASE("scenario overrides parse and validate") {
    ScenarioConfig base = scenario_by_id("A");
    const nlohmann::json j = nlohmann::json::parse(R"({
        "n": 100, "rho": 0.25, "replications": 7, "seed": 17,
        "coarsening": {"kind": "intensity", "range": [0.1, 0.5], "mean": 0.3},
        "dme": {"population": 30}
    })");
    const ScenarioConfig cfg = io::scenario_from_json(j, base);
    CHECK(cfg.n == 100);
    CHECK(cfg.rho == 0.25);
    CHECK(cfg.replications == 7);
    CHECK(cfg.base_seed == 17);
    CHECK(cfg.coarsening.kind == CoarseningKind::IntensityLinked);
    CHECK(cfg.coarsening.range_hi == 0.5);
    CHECK(cfg.dme.population == 30);

    const nlohmann::json bad = nlohmann::json::parse(R"({"rho": 0.2, "bogus": true})");
    CHECK_THROWS_AS(io::scenario_from_json(bad, base), io::IoError);
}

TEST_CASE("fmt prints six significant digits") {
    CHECK(io::fmt(1.0) == "1");
    CHECK(io::fmt(-0.4) == "-0.4");
    CHECK(io::fmt(3.14159265) == "3.14159");
    CHECK(io::fmt(123456.789) == "123457");
}

TEST_CASE("weight matrix exports as a coordinate list") {
    TempDir tmp;
    std::vector<Point2> pts{{0.0, 0.0}, {0.3, 0.0}, {0.6, 0.0}};
    const WeightMatrix w = build_weight_matrix(pts, KappaSpec::threshold(0.5), true);
    io::write_weights_csv(tmp.file("w.csv"), w);
    std::ifstream is(tmp.file("w.csv"));
    std::string header;
    std::getline(is, header);
    CHECK(header == "i,j,w");
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == static_cast<int>(w.w.nonZeros()));
}
