#include "slmc/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "slmc/parallel.hpp"

namespace slmc {

namespace {

constexpr std::uint64_t kPatternStream = 0xA001;
constexpr std::uint64_t kDesignStream = 0xA002;
constexpr std::uint64_t kReplicationBase = 0xB000;

const char* kQuantities[] = {"rho",   "beta0",    "beta1",    "beta2",
                             "sigma", "D(beta1)", "M(beta1)", "T(beta1)"};

}  // namespace

std::vector<double> CoarseningSpec::coarsening_probabilities(
    const std::vector<double>& lambda_at_points) const {
    const int n = static_cast<int>(lambda_at_points.size());
    std::vector<double> prob(n);
    if (kind == CoarseningKind::Constant) {
        std::fill(prob.begin(), prob.end(), probability);
        return prob;
    }
    const double dir = kind == CoarseningKind::IntensityLinked ? 1.0 : -1.0;
    double lbar = 0.0;
    for (double v : lambda_at_points) lbar += v;
    lbar /= n;
    double hi_dev = 0.0, lo_dev = 0.0;
    for (double v : lambda_at_points) {
        const double d = dir * (v - lbar);
        hi_dev = std::max(hi_dev, d);
        lo_dev = std::min(lo_dev, d);
    }
    // largest gain keeping the affine map inside [range_lo, range_hi] while
    // the pattern average stays exactly at `mean`
    double gamma = std::numeric_limits<double>::infinity();
    if (hi_dev > 0.0) gamma = std::min(gamma, (range_hi - mean) / (factor * hi_dev));
    if (lo_dev < 0.0) gamma = std::min(gamma, (mean - range_lo) / (factor * (-lo_dev)));
    if (!std::isfinite(gamma)) gamma = 0.0;  // flat intensity: constant probabilities
    for (int i = 0; i < n; ++i)
        prob[i] = mean + factor * gamma * dir * (lambda_at_points[i] - lbar);
    return prob;
}

Window ScenarioConfig::make_window() const {
    return window_vertices.empty() ? Window::default_window() : Window(window_vertices);
}

IntensityFunction ScenarioConfig::make_intensity() const {
    if (intensity_bumps.empty() && intensity_baseline == 0.25)
        return IntensityFunction::two_bump_default();
    return IntensityFunction(intensity_baseline, intensity_bumps);
}

std::vector<ScenarioConfig> scenario_catalog() {
    ScenarioConfig a;
    a.id = "A";
    a.n = 250;
    a.rho = 0.5;
    a.beta = Eigen::Vector3d(1.0, 1.0, -1.0);
    a.sigma2 = 1.0;
    a.hex_side = 1.5;
    a.kappa_threshold = 0.5;
    a.coarsening = CoarseningSpec{};  // constant 0.4
    a.replications = 300;
    a.dme.population = 100;
    a.dme.draws_per_eval = 32;

    std::vector<ScenarioConfig> cat(8, a);
    cat[1].id = "B";
    cat[1].rho = 0.3;
    cat[2].id = "C";
    cat[2].rho = 0.7;
    cat[3].id = "D";
    cat[3].sigma2 = 2.0;
    cat[4].id = "E";
    cat[4].n = 500;
    cat[4].kappa_threshold = std::sqrt(1.0 / 8.0);
    cat[5].id = "F";
    cat[5].coarsening.kind = CoarseningKind::IntensityLinked;
    cat[5].coarsening.range_lo = 0.2;
    cat[5].coarsening.range_hi = 0.75;
    cat[6].id = "G";
    cat[6].coarsening.kind = CoarseningKind::IntensityInverse;
    cat[6].coarsening.range_lo = 0.04;
    cat[6].coarsening.range_hi = 0.60;
    cat[7].id = "H";
    cat[7].hex_side = 1.0;
    return cat;
}

ScenarioConfig scenario_by_id(const std::string& id) {
    for (const ScenarioConfig& c : scenario_catalog())
        if (c.id == id) return c;
    throw ScenarioError("unknown scenario id: " + id);
}

ScenarioConfig apply_scale(ScenarioConfig config, Scale scale) {
    if (scale == Scale::Desk) {
        config.replications = 50;
        config.dme.population = 60;
        config.dme.draws_per_eval = 16;
        config.impact_mc_replicates = 50;
    }
    return config;
}

MetricsCell relative_metrics(const std::vector<double>& estimates, double truth) {
    if (estimates.empty()) throw ScenarioError("relative_metrics: no estimates");
    if (truth == 0.0)
        throw ScenarioError("relative_metrics: truth is zero; relative metrics undefined");
    double sum = 0.0, sq = 0.0;
    for (double e : estimates) {
        sum += e - truth;
        sq += (e - truth) * (e - truth);
    }
    const int n = static_cast<int>(estimates.size());
    MetricsCell cell;
    cell.bias = 100.0 * (sum / n) / std::abs(truth);
    cell.rmse = 100.0 * std::sqrt(sq / n) / std::abs(truth);
    return cell;
}

const MetricsCell& MetricsTable::at(const std::string& method,
                                    const std::string& quantity) const {
    for (size_t i = 0; i < methods.size(); ++i) {
        if (methods[i] != method) continue;
        for (size_t j = 0; j < quantities.size(); ++j)
            if (quantities[j] == quantity) return cells[i][j];
    }
    throw ScenarioError("metrics table: no cell (" + method + ", " + quantity + ")");
}

namespace {

struct MethodEstimates {
    bool ok = false;
    double rho = 0, sigma = 0;
    Eigen::VectorXd beta;
    double d1 = 0, m1 = 0, t1 = 0;
};

MethodEstimates run_method(const std::string& method, const CoarsenedDataset& data,
                           const Partition& partition, const KappaSpec& kappa,
                           const ScenarioConfig& cfg, std::uint64_t rep_seed) {
    MethodEstimates out;
    EstimateResult fit;
    if (method == "NCM") {
        fit = fit_ncm(data, partition, kappa);
    } else if (method == "REM") {
        fit = fit_rem(data, partition, kappa);
    } else if (method == "SREM") {
        fit = fit_srem(data, partition, kappa);
    } else if (method == "CIP") {
        fit = fit_cip(data, partition, kappa);
    } else if (method == "DME") {
        DmeConfig dc = cfg.dme;
        dc.seed = mix_seed(rep_seed, 0xD3E);
        fit = fit_dme(data, partition, kappa, dc);
    } else {
        throw ScenarioError("unknown method: " + method);
    }

    out.rho = fit.params.rho;
    out.beta = fit.params.beta;
    out.sigma = std::sqrt(fit.params.sigma2);

    const int k1 = 1;  // impacts reported for the first non-intercept regressor
    if (fit.params.beta.size() > k1) {
        ImpactTriple imp;
        if (method == "DME") {
            // location uncertainty: Monte Carlo impacts from conditional draws
            McImpactConfig mc;
            mc.replicates = cfg.impact_mc_replicates;
            mc.truncation = cfg.impact_truncation;
            mc.seed = mix_seed(rep_seed, 0x1A9);
            const IntensityField field = detail::dme_intensity(data, cfg.dme);
            const McImpacts all = impacts_mc(fit.params, data, field, kappa, mc);
            imp = all.per_regressor[k1];
        } else {
            // plug-in impacts on the method's own weight matrix
            std::vector<Point2> pts;
            if (method == "NCM") {
                pts = *data.true_points;
            } else if (method == "CIP") {
                pts.resize(data.n());
                for (int i = 0; i < data.n(); ++i)
                    pts[i] = data.flags.observed[i]
                                 ? data.coords[i]
                                 : partition.centroid(data.flags.region[i]);
            } else {
                pts = data.observed_coords();
            }
            const bool standardise = method != "REM";
            const WeightMatrix w = build_weight_matrix(pts, kappa, standardise);
            imp = impacts_exact(fit.params.rho, fit.params.beta[k1], w);
        }
        out.d1 = imp.direct;
        out.m1 = imp.indirect;
        out.t1 = imp.total;
    }
    out.ok = true;
    return out;
}

}  // namespace

ReplicationEstimates run_scenario_raw(const ScenarioConfig& config,
                                      const std::vector<std::string>& methods, int workers) {
    if (methods.empty()) throw ScenarioError("run_scenario: no methods requested");
    if (config.replications < 1) throw ScenarioError("run_scenario: replications must be >= 1");
    if (config.beta.size() != 3)
        throw ScenarioError("run_scenario: scenarios use an intercept plus two regressors");

    const Window window = config.make_window();
    const Partition partition = build_hex_partition(window, config.hex_side);
    const IntensityFunction intensity = config.make_intensity();
    const KappaSpec kappa = KappaSpec::threshold(config.kappa_threshold);
    const Rng base(config.base_seed);

    // shared across replications: the pattern and the design matrix
    Rng pattern_rng = base.derive(kPatternStream);
    const PointPattern pattern = simulate_fixed_n(intensity, window, config.n, pattern_rng);
    const int k = static_cast<int>(config.beta.size());
    Eigen::MatrixXd x(config.n, k);
    {
        Rng x_rng = base.derive(kDesignStream);
        for (int i = 0; i < config.n; ++i) {
            x(i, 0) = 1.0;
            for (int j = 1; j < k; ++j) x(i, j) = x_rng.normal();
        }
    }
    const WeightMatrix w_true = build_weight_matrix(pattern.points, kappa, true);
    const SlmParams truth{config.rho, config.beta, config.sigma2};

    // per-unit coarsening probabilities (fixed, pattern is shared)
    std::vector<double> lambda_at(config.n);
    for (int i = 0; i < config.n; ++i) lambda_at[i] = intensity(pattern.points[i]);
    const std::vector<double> coarse_prob =
        config.coarsening.coarsening_probabilities(lambda_at);
    std::vector<double> phi(config.n);
    for (int i = 0; i < config.n; ++i) {
        if (coarse_prob[i] < 0.0 || coarse_prob[i] > 1.0)
            throw ScenarioError("run_scenario: coarsening probability outside [0,1]");
        phi[i] = 1.0 - coarse_prob[i];
    }

    ReplicationEstimates out;
    out.methods = methods;
    out.quantities.assign(std::begin(kQuantities), std::end(kQuantities));
    const int nq = static_cast<int>(out.quantities.size());
    out.draws.assign(methods.size(), std::vector<std::vector<double>>(nq));
    out.skipped.assign(methods.size(), 0);

    // truths in quantity order
    const ImpactTriple imp_truth = impacts_exact(config.rho, config.beta[1], w_true);
    out.truths = {config.rho,
                  config.beta[0],
                  config.beta.size() > 1 ? config.beta[1] : 0.0,
                  config.beta.size() > 2 ? config.beta[2] : 0.0,
                  std::sqrt(config.sigma2),
                  imp_truth.direct,
                  imp_truth.indirect,
                  imp_truth.total};

    struct RepResult {
        std::vector<MethodEstimates> by_method;
    };
    std::vector<RepResult> reps(config.replications);

    parallel_for(config.replications, workers, [&](int r) {
        Rng rep_rng = base.derive(kReplicationBase + static_cast<std::uint64_t>(r));
        const Eigen::VectorXd y = simulate_slm(w_true, x, truth, rep_rng);
        const CoarseningFlags flags = apply_coarsening(pattern, phi, partition, rep_rng);

        CoarsenedDataset data;
        data.y = y;
        data.x = x;
        data.coords = pattern.points;
        data.flags = flags;
        data.partition = partition;
        data.true_points = pattern.points;

        reps[r].by_method.resize(methods.size());
        for (size_t mi = 0; mi < methods.size(); ++mi) {
            try {
                reps[r].by_method[mi] =
                    run_method(methods[mi], data, partition, kappa, config, rep_rng.seed());
            } catch (const std::exception&) {
                reps[r].by_method[mi].ok = false;
            }
        }
    });

    for (int r = 0; r < config.replications; ++r) {
        for (size_t mi = 0; mi < methods.size(); ++mi) {
            const MethodEstimates& e = reps[r].by_method[mi];
            if (!e.ok) {
                ++out.skipped[mi];
                continue;
            }
            auto& d = out.draws[mi];
            d[0].push_back(e.rho);
            d[1].push_back(e.beta.size() > 0 ? e.beta[0] : 0.0);
            d[2].push_back(e.beta.size() > 1 ? e.beta[1] : 0.0);
            d[3].push_back(e.beta.size() > 2 ? e.beta[2] : 0.0);
            d[4].push_back(e.sigma);
            d[5].push_back(e.d1);
            d[6].push_back(e.m1);
            d[7].push_back(e.t1);
        }
    }
    return out;
}

MetricsTable run_scenario(const ScenarioConfig& config, const std::vector<std::string>& methods,
                          int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    const ReplicationEstimates raw = run_scenario_raw(config, methods, workers);

    MetricsTable table;
    table.scenario = config.id;
    table.methods = methods;
    table.quantities = raw.quantities;
    table.replications = config.replications;
    table.seed = config.base_seed;
    table.cells.assign(methods.size(), std::vector<MetricsCell>(raw.quantities.size()));
    table.used.assign(methods.size(), 0);
    table.skipped = raw.skipped;

    for (size_t mi = 0; mi < methods.size(); ++mi) {
        const int used = static_cast<int>(raw.draws[mi][0].size());
        table.used[mi] = used;
        if (raw.skipped[mi] > 0.2 * config.replications)
            throw SkipRateError("run_scenario: method " + methods[mi] + " skipped " +
                                std::to_string(raw.skipped[mi]) + " of " +
                                std::to_string(config.replications) + " replications");
        for (size_t q = 0; q < raw.quantities.size(); ++q)
            table.cells[mi][q] = relative_metrics(raw.draws[mi][q], raw.truths[q]);
    }
    table.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return table;
}

}  // namespace slmc
