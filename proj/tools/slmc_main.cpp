// Command-line front end: dataset simulation, estimation, impact
// computation, scenario benchmarking and report emission.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "slmc/io.hpp"
#include "slmc/parallel.hpp"

namespace fs = std::filesystem;
using namespace slmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitQuality = 3;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void check_methods(const std::vector<std::string>& methods) {
    for (const auto& m : methods) {
        if (m != "NCM" && m != "DME" && m != "SREM" && m != "CIP" && m != "REM")
            throw io::IoError("unknown method name: " + m);
    }
    if (methods.empty()) throw io::IoError("no methods requested");
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct CommonArgs {
    std::string out_dir = ".";
    std::string config_file;
    std::uint64_t seed = 1;
    std::string scale = "desk";
    int workers = 0;  // 0: auto
};

ScenarioConfig resolve_scenario(const std::string& id, const CommonArgs& args,
                                int replications_override) {
    ScenarioConfig cfg = scenario_by_id(id);
    cfg = apply_scale(cfg, args.scale == "paper" ? Scale::Paper : Scale::Desk);
    if (!args.config_file.empty())
        cfg = io::scenario_from_json(io::load_json(args.config_file), cfg);
    cfg.base_seed = args.seed;
    if (replications_override > 0) cfg.replications = replications_override;
    return cfg;
}

int effective_workers(const CommonArgs& args) {
    return args.workers > 0 ? args.workers : default_workers();
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& scenario_id, const CommonArgs& args) {
    const ScenarioConfig cfg = resolve_scenario(scenario_id, args, -1);
    fs::create_directories(args.out_dir);

    const Window window = cfg.make_window();
    const Partition partition = build_hex_partition(window, cfg.hex_side);
    const IntensityFunction intensity = cfg.make_intensity();
    const KappaSpec kappa = KappaSpec::threshold(cfg.kappa_threshold);
    const Rng base(cfg.base_seed);

    Rng pattern_rng = base.derive(0xA001);
    const PointPattern pattern = simulate_fixed_n(intensity, window, cfg.n, pattern_rng);
    Eigen::MatrixXd x(cfg.n, cfg.beta.size());
    {
        Rng x_rng = base.derive(0xA002);
        for (int i = 0; i < cfg.n; ++i) {
            x(i, 0) = 1.0;
            for (int j = 1; j < cfg.beta.size(); ++j) x(i, j) = x_rng.normal();
        }
    }
    const WeightMatrix w = build_weight_matrix(pattern.points, kappa, true);
    const SlmParams truth{cfg.rho, cfg.beta, cfg.sigma2};
    Rng rep_rng = base.derive(0xB000);
    const Eigen::VectorXd y = simulate_slm(w, x, truth, rep_rng);

    std::vector<double> lam(cfg.n);
    for (int i = 0; i < cfg.n; ++i) lam[i] = intensity(pattern.points[i]);
    const std::vector<double> coarse = cfg.coarsening.coarsening_probabilities(lam);
    std::vector<double> phi(cfg.n);
    for (int i = 0; i < cfg.n; ++i) phi[i] = 1.0 - coarse[i];
    const CoarseningFlags flags = apply_coarsening(pattern, phi, partition, rep_rng);

    // true intensity surface on the estimation grid
    IntensityField field;
    field.nx = cfg.dme.grid_nx;
    field.ny = cfg.dme.grid_ny;
    field.x0 = window.bbox().xmin;
    field.y0 = window.bbox().ymin;
    field.dx = window.bbox().width() / field.nx;
    field.dy = window.bbox().height() / field.ny;
    field.value.assign(static_cast<size_t>(field.nx) * field.ny, 0.0);
    field.inside.assign(field.value.size(), 0);
    for (int iy = 0; iy < field.ny; ++iy)
        for (int ix = 0; ix < field.nx; ++ix) {
            const Point2 c = field.cell_center(ix, iy);
            const size_t idx = static_cast<size_t>(iy) * field.nx + ix;
            if (window.contains(c)) {
                field.inside[idx] = 1;
                field.value[idx] = intensity(c);
            }
        }

    const fs::path out(args.out_dir);
    io::write_points_csv((out / "points.csv").string(), pattern.points, flags, true);
    io::write_flags_csv((out / "flags.csv").string(), flags);
    io::write_dataset_csv((out / "dataset.csv").string(), y, x);
    io::write_field_csv((out / "field.csv").string(), field);
    io::write_field_json((out / "field.json").string(), field);
    io::write_partition_json((out / "partition.json").string(), partition);
    io::write_weights_csv((out / "weights.csv").string(), w);

    std::cout << "simulated scenario " << cfg.id << ": n=" << cfg.n
              << ", observed=" << flags.n_observed() << ", regions=" << partition.size()
              << ", files in " << args.out_dir << "\n";
    return kExitOk;
}

// ---- fit --------------------------------------------------------------------

CoarsenedDataset load_dataset(const std::string& data_dir) {
    const fs::path dir(data_dir);
    const io::PointsFile pts = io::read_points_csv((dir / "points.csv").string());
    const io::DatasetFile ds = io::read_dataset_csv((dir / "dataset.csv").string());
    Partition partition = io::read_partition_json((dir / "partition.json").string());

    if (static_cast<int>(pts.points.size()) != ds.y.size())
        throw io::IoError("dataset.csv and points.csv disagree on the number of units");

    CoarsenedDataset data;
    data.y = ds.y;
    data.x = ds.x;
    data.coords = pts.points;
    data.flags = pts.flags;
    data.partition = partition;
    if (pts.has_all_coords) data.true_points = pts.points;

    // labels of observed units are derivable; recompute them and keep the
    // stored label when rounding pushed a boundary point outside
    for (int i = 0; i < data.n(); ++i) {
        if (!data.flags.observed[i]) continue;
        try {
            data.flags.region[i] = partition.locate(data.coords[i]);
        } catch (const GeometryError&) {
        }
    }
    return data;
}

int cmd_fit(const std::string& data_dir, const std::string& methods_arg,
            const CommonArgs& args, int mc_impact_reps, int truncation) {
    const std::vector<std::string> methods = split_list(methods_arg);
    check_methods(methods);
    const CoarsenedDataset data = load_dataset(data_dir);
    const ScenarioConfig defaults =
        apply_scale(scenario_by_id("A"), args.scale == "paper" ? Scale::Paper : Scale::Desk);

    double threshold = defaults.kappa_threshold;
    DmeConfig dme = defaults.dme;
    if (!args.config_file.empty()) {
        const nlohmann::json j = io::load_json(args.config_file);
        const ScenarioConfig cfg = io::scenario_from_json(j, defaults);
        threshold = cfg.kappa_threshold;
        dme = cfg.dme;
    }
    dme.seed = mix_seed(args.seed, 0xD3E);
    dme.workers = effective_workers(args);
    const KappaSpec kappa = KappaSpec::threshold(threshold);

    std::vector<io::EstimateRow> rows;
    for (const std::string& m : methods) {
        io::EstimateRow row;
        if (m == "NCM") {
            row.result = fit_ncm(data, data.partition, kappa);
        } else if (m == "REM") {
            row.result = fit_rem(data, data.partition, kappa);
        } else if (m == "SREM") {
            row.result = fit_srem(data, data.partition, kappa);
        } else if (m == "CIP") {
            row.result = fit_cip(data, data.partition, kappa);
        } else {
            row.result = fit_dme(data, data.partition, kappa, dme);
        }

        if (data.x.cols() > 1) {
            row.has_impacts = true;
            if (m == "DME" && data.flags.n_coarsened() > 0) {
                McImpactConfig mc;
                mc.replicates = mc_impact_reps;
                mc.truncation = truncation;
                mc.seed = mix_seed(args.seed, 0x1A9);
                const IntensityField field = detail::dme_intensity(data, dme);
                row.impacts_beta1 =
                    impacts_mc(row.result.params, data, field, kappa, mc).per_regressor[1];
            } else {
                std::vector<Point2> pts;
                if (m == "NCM") {
                    if (!data.true_points)
                        throw EstimationError("NCM requires oracle coordinates");
                    pts = *data.true_points;
                } else if (m == "CIP" || m == "DME") {
                    pts.resize(data.n());
                    for (int i = 0; i < data.n(); ++i)
                        pts[i] = data.flags.observed[i]
                                     ? data.coords[i]
                                     : data.partition.centroid(data.flags.region[i]);
                } else {
                    pts = data.observed_coords();
                }
                const WeightMatrix w = build_weight_matrix(pts, kappa, m != "REM");
                row.impacts_beta1 =
                    impacts_exact(row.result.params.rho, row.result.params.beta[1], w);
            }
        }
        rows.push_back(row);
    }

    fs::create_directories(args.out_dir);
    const std::string path = (fs::path(args.out_dir) / "estimates.csv").string();
    io::write_estimates_csv(path, rows);
    std::cout << "wrote " << rows.size() << " estimate rows to " << path << "\n";
    return kExitOk;
}

// ---- impacts ----------------------------------------------------------------

int cmd_impacts(const std::string& data_dir, double rho, const std::string& beta_arg,
                const CommonArgs& args, int mc_reps, int truncation, bool redraw_all) {
    const CoarsenedDataset data = load_dataset(data_dir);
    const std::vector<std::string> parts = split_list(beta_arg);
    if (parts.empty()) throw io::IoError("--beta requires a comma-separated list");
    Eigen::VectorXd beta(parts.size());
    for (size_t j = 0; j < parts.size(); ++j) beta[j] = std::stod(parts[j]);
    if (beta.size() != data.x.cols())
        throw io::IoError("--beta length does not match the design matrix");

    const ScenarioConfig defaults = scenario_by_id("A");
    double threshold = defaults.kappa_threshold;
    if (!args.config_file.empty())
        threshold =
            io::scenario_from_json(io::load_json(args.config_file), defaults).kappa_threshold;
    const KappaSpec kappa = KappaSpec::threshold(threshold);
    const SlmParams params{rho, beta, 1.0};

    fs::create_directories(args.out_dir);
    const std::string path = (fs::path(args.out_dir) / "impacts.csv").string();
    std::ofstream os(path);
    os << "regressor,mode,total,direct,indirect\n";
    if (data.flags.n_coarsened() == 0) {
        const WeightMatrix w = build_weight_matrix(data.coords, kappa, true);
        for (int j = 0; j < beta.size(); ++j) {
            const ImpactTriple t = impacts_exact(rho, beta[j], w);
            os << j << ",exact," << io::fmt(t.total) << ',' << io::fmt(t.direct) << ','
               << io::fmt(t.indirect) << '\n';
        }
    } else {
        DmeConfig dme;
        const IntensityField field = detail::dme_intensity(data, dme);
        McImpactConfig mc;
        mc.replicates = mc_reps;
        mc.truncation = truncation;
        mc.redraw_all = redraw_all;
        mc.seed = mix_seed(args.seed, 0x1A9);
        const McImpacts all = impacts_mc(params, data, field, kappa, mc);
        for (int j = 0; j < beta.size(); ++j) {
            const ImpactTriple& t = all.per_regressor[j];
            os << j << ",mc," << io::fmt(t.total) << ',' << io::fmt(t.direct) << ','
               << io::fmt(t.indirect) << '\n';
        }
    }
    std::cout << "wrote impacts to " << path << "\n";
    return kExitOk;
}

// ---- benchmark ----------------------------------------------------------------

int cmd_benchmark(const std::string& scenarios_arg, const std::string& methods_arg,
                  const CommonArgs& args, int replications_override) {
    std::vector<std::string> ids = split_list(scenarios_arg);
    if (ids.size() == 1 && ids[0] == "all") {
        ids.clear();
        for (const auto& c : scenario_catalog()) ids.push_back(c.id);
    }
    if (ids.empty()) throw io::IoError("no scenarios requested");
    const std::vector<std::string> methods = split_list(methods_arg);
    check_methods(methods);
    fs::create_directories(args.out_dir);

    nlohmann::json combined;
    combined["scale"] = args.scale;
    combined["seed"] = args.seed;
    combined["started"] = timestamp_utc();
    nlohmann::json scenarios = nlohmann::json::array();

    for (const std::string& id : ids) {
        const ScenarioConfig cfg = resolve_scenario(id, args, replications_override);
        const MetricsTable table = run_scenario(cfg, methods, effective_workers(args));

        const fs::path out(args.out_dir);
        io::write_metrics_csv((out / ("table_" + id + ".csv")).string(), table);
        nlohmann::json meta;
        meta["scale"] = args.scale;
        meta["finished"] = timestamp_utc();
        meta["seconds"] = table.seconds;
        io::write_metrics_json((out / ("report_" + id + ".json")).string(), table, meta);

        nlohmann::json s = io::metrics_to_json(table);
        s["seconds"] = table.seconds;
        scenarios.push_back(s);
        std::cout << "scenario " << id << ": " << cfg.replications << " replications, "
                  << io::fmt(table.seconds) << " s\n";
    }
    combined["scenarios"] = scenarios;
    combined["finished"] = timestamp_utc();
    std::ofstream os((fs::path(args.out_dir) / "report.json").string());
    os << combined.dump(1) << '\n';
    return kExitOk;
}

// ---- report -----------------------------------------------------------------

int cmd_report(const CommonArgs& args) {
    const fs::path dir(args.out_dir);
    std::vector<fs::path> reports;
    if (fs::exists(dir))
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".json")
                reports.push_back(entry.path());
        }
    std::sort(reports.begin(), reports.end());
    if (reports.empty()) throw io::IoError("no report_*.json files in " + args.out_dir);

    const std::string combined = (dir / "combined_report.csv").string();
    std::ofstream os(combined);
    os << "scenario,method,quantity,rrmse,rbias,used,skipped\n";
    for (const fs::path& p : reports) {
        const nlohmann::json j = io::load_json(p.string());
        const std::string scenario = j.at("scenario").get<std::string>();
        const auto quantities = j.at("quantities").get<std::vector<std::string>>();
        std::cout << "scenario " << scenario << " (" << j.at("replications").get<int>()
                  << " replications)\n";
        for (const auto& m : j.at("methods")) {
            const std::string method = m.at("method").get<std::string>();
            std::cout << "  " << method << ":";
            for (size_t q = 0; q < quantities.size(); ++q) {
                const double rmse = m.at("cells")[q].at("rrmse").get<double>();
                const double bias = m.at("cells")[q].at("rbias").get<double>();
                os << scenario << ',' << method << ',' << quantities[q] << ','
                   << io::fmt(rmse) << ',' << io::fmt(bias) << ',' << m.at("used").get<int>()
                   << ',' << m.at("skipped").get<int>() << '\n';
                if (quantities[q] == "rho")
                    std::cout << " rho " << io::fmt(rmse) << " (" << io::fmt(bias) << ")";
            }
            std::cout << "\n";
        }
    }
    std::cout << "wrote " << combined << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial lag model estimation under coarsened geocoding"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string scenario = "A";
    std::string methods = "NCM,DME,SREM,CIP,REM";
    std::string data_dir;
    int replications_override = -1;
    int mc_reps = 50, truncation = 30;
    double rho = 0.5;
    std::string beta_arg = "1,1,-1";
    bool redraw_all = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", common.out_dir, "output directory");
        sub->add_option("--config", common.config_file, "JSON config file");
        sub->add_option("--seed", common.seed, "base seed");
        sub->add_option("--scale", common.scale, "run scale")
            ->check(CLI::IsMember({"desk", "paper"}));
        sub->add_option("--workers", common.workers, "worker threads (0 = auto)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "simulate a coarsened dataset");
    sim->add_option("--scenario", scenario, "scenario id (A..H)");
    add_common(sim);

    CLI::App* fit = app.add_subcommand("fit", "estimate a dataset with selected methods");
    fit->add_option("--data", data_dir, "directory with simulate outputs")->required();
    fit->add_option("--methods", methods, "comma-separated methods");
    fit->add_option("--impact-draws", mc_reps, "Monte Carlo impact replicates");
    fit->add_option("--truncation", truncation, "Neumann series truncation");
    add_common(fit);

    CLI::App* imp = app.add_subcommand("impacts", "impact measures for given parameters");
    imp->add_option("--data", data_dir, "directory with simulate outputs")->required();
    imp->add_option("--rho", rho, "autoregressive parameter")->required();
    imp->add_option("--beta", beta_arg, "comma-separated coefficients")->required();
    imp->add_option("--mc", mc_reps, "Monte Carlo replicates");
    imp->add_option("--truncation", truncation, "Neumann series truncation");
    imp->add_flag("--redraw-all", redraw_all, "redraw the whole pattern per replicate");
    add_common(imp);

    CLI::App* bench = app.add_subcommand("benchmark", "replication study for scenarios");
    bench->add_option("--scenario", scenario, "scenario ids, comma separated, or 'all'");
    bench->add_option("--methods", methods, "comma-separated methods");
    bench->add_option("--replications", replications_override, "override replication count");
    add_common(bench);

    CLI::App* rep = app.add_subcommand("report", "combine benchmark reports in --out");
    add_common(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(scenario, common);
        if (fit->parsed()) return cmd_fit(data_dir, methods, common, mc_reps, truncation);
        if (imp->parsed())
            return cmd_impacts(data_dir, rho, beta_arg, common, mc_reps, truncation,
                               redraw_all);
        if (bench->parsed())
            return cmd_benchmark(scenario, methods, common, replications_override);
        if (rep->parsed()) return cmd_report(common);
    } catch (const SkipRateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitQuality;
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
