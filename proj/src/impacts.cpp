#include "slmc/impacts.hpp"

#include <Eigen/SparseLU>
#include <cmath>

namespace slmc {

ImpactTriple impacts_exact(double rho, double beta_k, const WeightMatrix& w) {
    const int n = w.n();
    Eigen::SparseMatrix<double> a(n, n);
    a.setIdentity();
    a -= (rho * w.w).eval();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw SingularSystemError("impacts_exact: I - rho W is singular");

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd u = lu.solve(ones);

    double trace = 0.0;
    {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            e[i] = 1.0;
            trace += lu.solve(e)[i];
            e[i] = 0.0;
        }
    }

    ImpactTriple t;
    t.total = ones.dot(u) / n * beta_k;
    t.direct = trace / n * beta_k;
    t.indirect = t.total - t.direct;
    t.total = t.direct + t.indirect;  // keeps T = D + M exact in floating point
    return t;
}

Eigen::VectorXd truncated_inverse_apply(double rho, const WeightMatrix& w, int m,
                                        const Eigen::VectorXd& v) {
    if (m < 0) throw std::invalid_argument("truncated_inverse_apply: m must be >= 0");
    // Horner: u_m = v; u_{h-1} = v + rho W u_h
    Eigen::VectorXd u = v;
    for (int h = 0; h < m; ++h) u = v + rho * (w.w * u);
    return u;
}

double truncated_inverse_trace(double rho, const WeightMatrix& w, int m, Rng* rng) {
    const int n = w.n();
    if (n <= 1000) {
        double trace = 0.0;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            e[i] = 1.0;
            trace += truncated_inverse_apply(rho, w, m, e)[i];
            e[i] = 0.0;
        }
        return trace;
    }
    // Hutchinson with Rademacher probes for large systems
    Rng fallback(12345);
    Rng& gen = rng ? *rng : fallback;
    const int probes = 64;
    double acc = 0.0;
    for (int k = 0; k < probes; ++k) {
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i) z[i] = gen.uniform() < 0.5 ? -1.0 : 1.0;
        acc += z.dot(truncated_inverse_apply(rho, w, m, z));
    }
    return acc / probes;
}

McImpacts impacts_mc(const SlmParams& params, const CoarsenedDataset& data,
                     const IntensityField& field, const KappaSpec& kappa,
                     const McImpactConfig& config) {
    if (config.replicates < 1)
        throw std::invalid_argument("impacts_mc: replicates must be >= 1");
    const int n = data.n();
    const std::vector<int> labels = data.flags.coarsened_regions();
    const ConditionalSampler sampler(field, data.partition);
    Rng rng(config.seed);

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    double acc_total_factor = 0.0;  // n^-1 1' (sum rho^h W^h) 1
    double acc_direct_factor = 0.0; // n^-1 tr  (sum rho^h W^h)
    int used = 0, skipped = 0;

    for (int k = 0; k < config.replicates; ++k) {
        Rng draw_rng = rng.derive(k);
        try {
            std::vector<Point2> pts;
            if (config.redraw_all) {
                pts = sample_pattern_from_field(field, data.partition.window(), n, draw_rng);
            } else {
                pts = detail::merge_locations(data, sampler.sample(labels, draw_rng));
            }
            const WeightMatrix w = build_weight_matrix(pts, kappa, true);
            acc_total_factor +=
                ones.dot(truncated_inverse_apply(params.rho, w, config.truncation, ones)) / n;
            acc_direct_factor +=
                truncated_inverse_trace(params.rho, w, config.truncation, &draw_rng) / n;
            ++used;
        } catch (const std::exception&) {
            ++skipped;
        }
    }
    if (used == 0)
        throw SingularSystemError("impacts_mc: every replicate draw failed");

    const double tf = acc_total_factor / used;
    const double df = acc_direct_factor / used;
    McImpacts out;
    out.used = used;
    out.skipped = skipped;
    out.per_regressor.resize(params.beta.size());
    for (int j = 0; j < params.beta.size(); ++j) {
        ImpactTriple t;
        t.total = tf * params.beta[j];
        t.direct = df * params.beta[j];
        t.indirect = t.total - t.direct;
        t.total = t.direct + t.indirect;
        out.per_regressor[j] = t;
    }
    return out;
}

}  // namespace slmc
