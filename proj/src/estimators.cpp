#include "slmc/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "slmc/parallel.hpp"

namespace slmc {

namespace {

constexpr double kTwoPi = 6.283185307179586;

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct ConcentratedFit {
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
    double loglik = 0.0;
};

// For fixed rho: beta by least squares on (I - rho W) y, sigma2 closed form,
// concentrated log-likelihood with the log-determinant term.
class ConcentratedObjective {
public:
    ConcentratedObjective(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                          const WeightMatrix& w)
        : y_(y), x_(x), w_(w), wy_(w.w * y), qr_(x) {
        if (qr_.rank() < x.cols())
            throw EstimationError("fit_ml: design matrix is rank deficient");
    }

    ConcentratedFit eval(double rho) const {
        ConcentratedFit f;
        const Eigen::VectorXd ay = y_ - rho * wy_;
        f.beta = qr_.solve(ay);
        const Eigen::VectorXd resid = ay - x_ * f.beta;
        const int n = static_cast<int>(y_.size());
        f.sigma2 = resid.squaredNorm() / n;
        if (!(f.sigma2 > 0.0)) f.sigma2 = 1e-300;
        const double logdet = w_.w.nonZeros() == 0 ? 0.0 : log_abs_det_a(rho, w_.w);
        f.loglik = -0.5 * n * (std::log(kTwoPi * f.sigma2) + 1.0) + logdet;
        return f;
    }

private:
    const Eigen::VectorXd& y_;
    const Eigen::MatrixXd& x_;
    const WeightMatrix& w_;
    Eigen::VectorXd wy_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

EstimateResult fit_ml_impl(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                           const WeightMatrix& w, const std::string& method) {
    const auto t0 = Clock::now();
    if (y.size() != w.n() || x.rows() != w.n())
        throw EstimationError("fit_ml: dimension mismatch");
    ConcentratedObjective obj(y, x, w);

    EstimateResult res;
    res.method = method;

    if (w.w.nonZeros() == 0) {
        // objective is flat in rho; tie-break at rho = 0 (plain OLS)
        const ConcentratedFit f = obj.eval(0.0);
        res.params = {0.0, f.beta, f.sigma2};
        res.objective = f.loglik;
        res.iterations = 1;
        res.seconds = elapsed_seconds(t0);
        return res;
    }

    const auto [lo_raw, hi_raw] = admissible_rho_interval(w);
    const double margin = 1e-6 * (hi_raw - lo_raw);
    const double lo = lo_raw + margin, hi = hi_raw - margin;

    // coarse scan to bracket the global maximum, then golden section
    const int kScan = 41;
    int best_k = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    std::vector<double> grid(kScan), val(kScan);
    for (int k = 0; k < kScan; ++k) {
        grid[k] = lo + (hi - lo) * k / (kScan - 1);
        val[k] = obj.eval(grid[k]).loglik;
        if (val[k] > best_v) {
            best_v = val[k];
            best_k = k;
        }
    }
    if (best_k == 0 || best_k == kScan - 1) {
        throw EstimationError(
            "fit_ml: no interior maximum; objective at boundary rho=" +
            std::to_string(grid[best_k]) + " (interval [" + std::to_string(lo_raw) + ", " +
            std::to_string(hi_raw) + "], endpoint values " + std::to_string(val[0]) + ", " +
            std::to_string(val[kScan - 1]) + ")");
    }

    double a = grid[best_k - 1], b = grid[best_k + 1];
    const double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = obj.eval(x1).loglik, f2 = obj.eval(x2).loglik;
    int iters = kScan;
    while (b - a > 1e-7) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = obj.eval(x2).loglik;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = obj.eval(x1).loglik;
        }
        ++iters;
    }
    double rho_hat = 0.5 * (a + b);

    // one parabolic refinement step around the optimum
    {
        const double h = std::max(1e-5, 1e-4 * (hi - lo));
        const double fm = obj.eval(rho_hat - h).loglik;
        const double f0 = obj.eval(rho_hat).loglik;
        const double fp = obj.eval(rho_hat + h).loglik;
        const double denom = fm - 2.0 * f0 + fp;
        if (denom < 0.0) {
            const double step = 0.5 * h * (fm - fp) / denom;
            if (std::abs(step) < h) {
                const double cand = rho_hat + step;
                if (cand > lo && cand < hi && obj.eval(cand).loglik >= f0) rho_hat = cand;
            }
        }
        iters += 3;
    }

    const ConcentratedFit f = obj.eval(rho_hat);
    res.params = {rho_hat, f.beta, f.sigma2};
    res.objective = f.loglik;
    res.iterations = iters;
    res.seconds = elapsed_seconds(t0);
    return res;
}

}  // namespace

std::vector<Point2> CoarsenedDataset::observed_coords() const {
    std::vector<Point2> out;
    for (int i = 0; i < n(); ++i)
        if (flags.observed[i]) out.push_back(coords[i]);
    return out;
}

EstimateResult fit_ml(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const WeightMatrix& w) {
    return fit_ml_impl(y, x, w, "ML");
}

EstimateResult fit_ncm(const CoarsenedDataset& data, const Partition&, const KappaSpec& kappa) {
    if (!data.true_points || static_cast<int>(data.true_points->size()) != data.n())
        throw EstimationError("fit_ncm: true coordinates unavailable (oracle method)");
    const WeightMatrix w = build_weight_matrix(*data.true_points, kappa, true);
    EstimateResult res = fit_ml_impl(data.y, data.x, w, "NCM");
    return res;
}

namespace {

EstimateResult fit_restricted(const CoarsenedDataset& data, const KappaSpec& kappa,
                              bool standardise, const std::string& method) {
    const int p = data.flags.n_observed();
    if (p == 0) throw EstimationError(method + ": no observed units");
    std::vector<Point2> pts;
    Eigen::VectorXd y(p);
    Eigen::MatrixXd x(p, data.x.cols());
    int k = 0;
    for (int i = 0; i < data.n(); ++i) {
        if (!data.flags.observed[i]) continue;
        pts.push_back(data.coords[i]);
        y[k] = data.y[i];
        x.row(k) = data.x.row(i);
        ++k;
    }
    const WeightMatrix w = build_weight_matrix(pts, kappa, standardise);
    return fit_ml_impl(y, x, w, method);
}

}  // namespace

EstimateResult fit_rem(const CoarsenedDataset& data, const Partition&, const KappaSpec& kappa) {
    return fit_restricted(data, kappa, false, "REM");
}

EstimateResult fit_srem(const CoarsenedDataset& data, const Partition&, const KappaSpec& kappa) {
    return fit_restricted(data, kappa, true, "SREM");
}

EstimateResult fit_cip(const CoarsenedDataset& data, const Partition& partition,
                       const KappaSpec& kappa) {
    std::vector<Point2> pts(data.n());
    for (int i = 0; i < data.n(); ++i) {
        pts[i] = data.flags.observed[i] ? data.coords[i]
                                        : partition.centroid(data.flags.region[i]);
    }
    const WeightMatrix w = build_weight_matrix(pts, kappa, true);
    return fit_ml_impl(data.y, data.x, w, "CIP");
}

namespace detail {

std::vector<Point2> merge_locations(const CoarsenedDataset& data,
                                    const std::vector<Point2>& coarsened_locations) {
    std::vector<Point2> pts(data.n());
    size_t k = 0;
    for (int i = 0; i < data.n(); ++i) {
        if (data.flags.observed[i]) {
            pts[i] = data.coords[i];
        } else {
            pts[i] = coarsened_locations.at(k);
            ++k;
        }
    }
    if (k != coarsened_locations.size())
        throw EstimationError("merge_locations: draw length mismatch");
    return pts;
}

double marginal_loglik_given_draws(const SlmParams& params, const CoarsenedDataset& data,
                                   const KappaSpec& kappa,
                                   const std::vector<std::vector<Point2>>& draws) {
    if (draws.empty()) throw EstimationError("marginal_loglik_given_draws: no draws");
    const int p = data.flags.n_observed();
    Eigen::VectorXd y_obs(p);
    int k = 0;
    for (int i = 0; i < data.n(); ++i)
        if (data.flags.observed[i]) y_obs[k++] = data.y[i];

    std::vector<double> lls;
    lls.reserve(draws.size());
    int failures = 0;
    for (const auto& draw : draws) {
        try {
            const std::vector<Point2> pts = merge_locations(data, draw);
            const WeightMatrix w = build_weight_matrix(pts, kappa, true);
            const BlockSystem sys = split_blocks(w, data.flags, params.rho);
            lls.push_back(log_lik_marginal(params, y_obs, data.x, sys));
        } catch (const SingularSystemError&) {
            ++failures;
        }
    }
    if (lls.empty())
        throw EstimationError("mc_marginal_loglik: all " + std::to_string(failures) +
                              " draws produced singular systems");
    const double mx = *std::max_element(lls.begin(), lls.end());
    double acc = 0.0;
    for (double v : lls) acc += std::exp(v - mx);
    return mx + std::log(acc / lls.size());
}

IntensityField dme_intensity(const CoarsenedDataset& data, const DmeConfig& config) {
    const PropensityEstimate prop = estimate_propensity(data.flags, data.partition);
    std::vector<Point2> obs_pts;
    std::vector<double> obs_phi;
    for (int i = 0; i < data.n(); ++i) {
        if (!data.flags.observed[i]) continue;
        obs_pts.push_back(data.coords[i]);
        obs_phi.push_back(prop.at_region(data.flags.region[i]));
    }
    KdeConfig kde;
    kde.bandwidth = config.bandwidth_override;
    kde.grid_nx = config.grid_nx;
    kde.grid_ny = config.grid_ny;
    return estimate_intensity(obs_pts, obs_phi, data.partition.window(), kde);
}

}  // namespace detail

double mc_marginal_loglik(const SlmParams& params, const CoarsenedDataset& data,
                          const IntensityField& field, const KappaSpec& kappa, int draws,
                          Rng& rng) {
    if (draws < 1) throw EstimationError("mc_marginal_loglik: draws must be >= 1");
    const std::vector<int> labels = data.flags.coarsened_regions();
    const ConditionalSampler sampler(field, data.partition);
    std::vector<std::vector<Point2>> sets(draws);
    for (int m = 0; m < draws; ++m) sets[m] = sampler.sample(labels, rng);
    return detail::marginal_loglik_given_draws(params, data, kappa, sets);
}

void DmeConfig::validate() const {
    if (draws_per_eval < 1) throw EstimationError("dme: draws_per_eval must be >= 1");
    if (population < 2) throw EstimationError("dme: population must be >= 2");
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0))
        throw EstimationError("dme: elite_fraction must be in (0,1)");
    if (!(smoothing > 0.0 && smoothing <= 1.0))
        throw EstimationError("dme: smoothing must be in (0,1]");
    if (max_iters < 1) throw EstimationError("dme: max_iters must be >= 1");
    if (!(variance_tolerance > 0.0))
        throw EstimationError("dme: variance_tolerance must be > 0");
}

EstimateResult fit_dme(const CoarsenedDataset& data, const Partition& partition,
                       const KappaSpec& kappa, const DmeConfig& config, DmeTrace* trace) {
    const auto t0 = Clock::now();
    config.validate();
    const int p = data.flags.n_observed();
    if (p == 0) throw EstimationError("fit_dme: no observed units");
    const int k = static_cast<int>(data.x.cols());
    const int dim = k + 2;  // atanh(rho), beta..., log sigma
    const int n_coarse = data.n() - p;

    // step 1: propensity and intensity of the coarsened pattern
    const IntensityField field = detail::dme_intensity(data, config);
    const ConditionalSampler sampler(field, partition);
    const std::vector<int> labels = data.flags.coarsened_regions();

    // CE initialisation from the row-standardised restricted fit
    Eigen::VectorXd mu(dim);
    {
        const EstimateResult init = fit_srem(data, partition, kappa);
        mu[0] = std::atanh(std::clamp(init.params.rho, -0.99, 0.99));
        mu.segment(1, k) = init.params.beta;
        mu[dim - 1] = 0.5 * std::log(std::max(init.params.sigma2, 1e-12));
    }
    Eigen::VectorXd sd = Eigen::VectorXd::Constant(dim, 0.5);

    const int n_elite =
        std::max(1, static_cast<int>(std::ceil(config.elite_fraction * config.population)));
    const Rng base(config.seed);

    auto to_params = [&](const Eigen::VectorXd& theta) {
        SlmParams prm;
        prm.rho = std::tanh(theta[0]);
        prm.beta = theta.segment(1, k);
        prm.sigma2 = std::exp(2.0 * theta[dim - 1]);
        return prm;
    };

    EstimateResult res;
    res.method = "DME";
    bool converged = false;
    int iter = 0;
    double best_obj = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta = mu;

    for (iter = 1; iter <= config.max_iters; ++iter) {
        Rng iter_rng = base.derive(iter);

        // candidates first, then the shared location draws (common random
        // numbers across candidates within the iteration)
        Eigen::MatrixXd cand(dim, config.population);
        for (int j = 0; j < config.population; ++j)
            for (int d = 0; d < dim; ++d) cand(d, j) = mu[d] + sd[d] * iter_rng.normal();

        const int m_draws = n_coarse == 0 ? 1 : config.draws_per_eval;
        std::vector<std::vector<Point2>> sets(m_draws);
        for (int m = 0; m < m_draws; ++m) sets[m] = sampler.sample(labels, iter_rng);

        std::vector<double> score(config.population,
                                  -std::numeric_limits<double>::infinity());
        parallel_for(config.population, config.workers, [&](int j) {
            try {
                score[j] = detail::marginal_loglik_given_draws(to_params(cand.col(j)), data,
                                                               kappa, sets);
            } catch (const std::exception&) {
                // leave -inf: candidate drops out of the elite set
            }
        });

        std::vector<int> order(config.population);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return score[a] > score[b]; });
        if (!std::isfinite(score[order[0]]))
            throw EstimationError("fit_dme: every candidate in iteration " +
                                  std::to_string(iter) + " failed to evaluate");

        if (score[order[0]] > best_obj) {
            best_obj = score[order[0]];
            best_theta = cand.col(order[0]);
        }

        Eigen::VectorXd emean = Eigen::VectorXd::Zero(dim);
        double elite_obj = 0.0;
        for (int e = 0; e < n_elite; ++e) {
            emean += cand.col(order[e]);
            elite_obj += score[order[e]];
        }
        emean /= n_elite;
        elite_obj /= n_elite;
        Eigen::VectorXd evar = Eigen::VectorXd::Zero(dim);
        for (int e = 0; e < n_elite; ++e)
            evar += (cand.col(order[e]) - emean).array().square().matrix();
        const Eigen::VectorXd esd = (evar / n_elite).array().sqrt();

        mu = config.smoothing * emean + (1.0 - config.smoothing) * mu;
        sd = config.smoothing * esd + (1.0 - config.smoothing) * sd;

        if (trace) {
            trace->elite_mean_objective.push_back(elite_obj);
            trace->max_instrumental_sd.push_back(sd.maxCoeff());
        }

        if (sd.maxCoeff() < config.variance_tolerance) {
            converged = true;
            break;
        }
    }

    const Eigen::VectorXd theta_hat = converged ? mu : best_theta;
    res.params = to_params(theta_hat);
    res.converged = converged;
    res.iterations = std::min(iter, config.max_iters);

    // final objective at the returned estimate, fixed evaluation stream
    {
        Rng eval_rng = base.derive(0xFEEDBEEFULL);
        const int m_draws = n_coarse == 0 ? 1 : config.draws_per_eval;
        std::vector<std::vector<Point2>> sets(m_draws);
        for (int m = 0; m < m_draws; ++m) sets[m] = sampler.sample(labels, eval_rng);
        res.objective = detail::marginal_loglik_given_draws(res.params, data, kappa, sets);
    }
    res.seconds = elapsed_seconds(t0);
    return res;
}

}  // namespace slmc
