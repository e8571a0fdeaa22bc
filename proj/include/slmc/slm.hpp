#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>
#include <vector>

#include "slmc/point_process.hpp"
#include "slmc/rng.hpp"
#include "slmc/weights.hpp"

namespace slmc {

class SingularSystemError : public std::runtime_error {
public:
    explicit SingularSystemError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SlmParams {
    double rho = 0.0;
    Eigen::VectorXd beta;
    double sigma2 = 1.0;
};

/// Draw y = (I - rho W)^-1 (X beta + eps), eps ~ N(0, sigma2 I).
Eigen::VectorXd simulate_slm(const WeightMatrix& w, const Eigen::MatrixXd& x,
                             const SlmParams& params, Rng& rng);

/// Observed/coarsened block decomposition of a weight matrix under the
/// stable-order permutation (observed first, original relative order kept),
/// with the A = I - rho P W P' blocks derived for the stored rho.
struct BlockSystem {
    std::vector<int> idx_obs, idx_coa;
    double rho = 0.0;
    Eigen::SparseMatrix<double> w_pp, w_pc, w_cp, w_cc;
    Eigen::SparseMatrix<double> a_pp, a_pc, a_cp, a_cc;

    int p() const { return static_cast<int>(idx_obs.size()); }
    int c() const { return static_cast<int>(idx_coa.size()); }
    int n() const { return p() + c(); }
};

BlockSystem split_blocks(const WeightMatrix& w, const CoarseningFlags& flags, double rho);

/// The four blocks of (I - rho P W P')^-1, computed from factorisations of
/// A_CC and of the Schur complement Xi = A_PP - A_PC A_CC^-1 A_CP only.
struct SchurInverse {
    Eigen::MatrixXd pp, pc, cp, cc;
};

SchurInverse schur_inverse_blocks(const BlockSystem& system);

/// Mean and covariance of the observed-location responses y_P after the
/// coarsened block is integrated out of the joint Gaussian.
struct MarginalMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // symmetrised
};

MarginalMoments marginal_moments(const SlmParams& params, const BlockSystem& system,
                                 const Eigen::MatrixXd& x);

/// Gaussian log-density of y_obs under the marginal moments. Evaluated
/// through sparse factorisations of A and A_CC plus a Cholesky factor of the
/// low-rank covariance core, which is algebraically identical to factorising
/// the assembled covariance.
double log_lik_marginal(const SlmParams& params, const Eigen::VectorXd& y_obs,
                        const Eigen::MatrixXd& x, const BlockSystem& system);

/// Full-data SLM log-likelihood.
double log_lik_full(const SlmParams& params, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                    const WeightMatrix& w);

/// Admissible interval for rho: (-1, 1) for row-standardised matrices,
/// (1/lambda_min, 1/lambda_max) from the extreme real eigenvalues otherwise.
std::pair<double, double> admissible_rho_interval(const WeightMatrix& w);

/// log |det(I - rho W)| via sparse LU.
double log_abs_det_a(double rho, const Eigen::SparseMatrix<double>& w);

}  // namespace slmc
