#include "slmc/slm.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <cmath>

namespace slmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::SparseMatrix<double> identity_sparse(int n) {
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    return id;
}

// Extract rows `ri` and columns `ci` of a sparse matrix.
Eigen::SparseMatrix<double> submatrix(const Eigen::SparseMatrix<double>& m,
                                      const std::vector<int>& ri, const std::vector<int>& ci) {
    std::vector<int> rpos(m.rows(), -1), cpos(m.cols(), -1);
    for (size_t k = 0; k < ri.size(); ++k) rpos[ri[k]] = static_cast<int>(k);
    for (size_t k = 0; k < ci.size(); ++k) cpos[ci[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<double>> trips;
    for (int outer = 0; outer < m.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, outer); it; ++it) {
            const int r = rpos[it.row()], c = cpos[it.col()];
            if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
        }
    }
    Eigen::SparseMatrix<double> out(static_cast<int>(ri.size()), static_cast<int>(ci.size()));
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

// Assemble the permuted [P;C] x [P;C] sparse matrix from four blocks.
Eigen::SparseMatrix<double> assemble_permuted(const Eigen::SparseMatrix<double>& pp,
                                              const Eigen::SparseMatrix<double>& pc,
                                              const Eigen::SparseMatrix<double>& cp,
                                              const Eigen::SparseMatrix<double>& cc) {
    const int p = static_cast<int>(pp.rows());
    const int n = p + static_cast<int>(cc.rows());
    std::vector<Eigen::Triplet<double>> trips;
    auto add = [&](const Eigen::SparseMatrix<double>& blk, int roff, int coff) {
        for (int outer = 0; outer < blk.outerSize(); ++outer)
            for (Eigen::SparseMatrix<double>::InnerIterator it(blk, outer); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()) + roff,
                                   static_cast<int>(it.col()) + coff, it.value());
    };
    add(pp, 0, 0);
    add(pc, 0, p);
    add(cp, p, 0);
    add(cc, p, p);
    Eigen::SparseMatrix<double> out(n, n);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

struct SparseLuPair {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;       // A_CC
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_t;     // A_CC^T
    double log_abs_det = 0.0;
};

void factor_cc(const Eigen::SparseMatrix<double>& a_cc, SparseLuPair& out) {
    out.lu.compute(a_cc);
    if (out.lu.info() != Eigen::Success)
        throw SingularSystemError("schur: A_CC block is singular");
    Eigen::SparseMatrix<double> a_cc_t = a_cc.transpose();
    out.lu_t.compute(a_cc_t);
    if (out.lu_t.info() != Eigen::Success)
        throw SingularSystemError("schur: A_CC block is singular");
    out.log_abs_det = out.lu.logAbsDeterminant();
}

}  // namespace

Eigen::VectorXd simulate_slm(const WeightMatrix& w, const Eigen::MatrixXd& x,
                             const SlmParams& params, Rng& rng) {
    const int n = w.n();
    if (x.rows() != n) throw std::invalid_argument("simulate_slm: X row count mismatch");
    if (x.cols() != params.beta.size())
        throw std::invalid_argument("simulate_slm: beta length mismatch");
    Eigen::VectorXd rhs = x * params.beta;
    const double sd = std::sqrt(params.sigma2);
    for (int i = 0; i < n; ++i) rhs[i] += sd * rng.normal();

    Eigen::SparseMatrix<double> a = identity_sparse(n) - params.rho * w.w;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw SingularSystemError("simulate_slm: I - rho W is singular");
    return lu.solve(rhs);
}

BlockSystem split_blocks(const WeightMatrix& w, const CoarseningFlags& flags, double rho) {
    if (flags.n() != w.n()) throw std::invalid_argument("split_blocks: flags length mismatch");
    BlockSystem s;
    s.rho = rho;
    for (int i = 0; i < flags.n(); ++i)
        (flags.observed[i] ? s.idx_obs : s.idx_coa).push_back(i);

    s.w_pp = submatrix(w.w, s.idx_obs, s.idx_obs);
    s.w_pc = submatrix(w.w, s.idx_obs, s.idx_coa);
    s.w_cp = submatrix(w.w, s.idx_coa, s.idx_obs);
    s.w_cc = submatrix(w.w, s.idx_coa, s.idx_coa);

    s.a_pp = identity_sparse(s.p()) - rho * s.w_pp;
    s.a_pc = (-rho * s.w_pc).eval();
    s.a_cp = (-rho * s.w_cp).eval();
    s.a_cc = identity_sparse(s.c()) - rho * s.w_cc;
    return s;
}

SchurInverse schur_inverse_blocks(const BlockSystem& system) {
    const int p = system.p(), c = system.c();
    SchurInverse inv;
    if (c == 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd(system.a_pp));
        if (!lu.isInvertible()) throw SingularSystemError("schur: Xi block is singular");
        inv.pp = lu.inverse();
        inv.pc.resize(p, 0);
        inv.cp.resize(0, p);
        inv.cc.resize(0, 0);
        return inv;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu_cc(Eigen::MatrixXd(system.a_cc));
    if (!lu_cc.isInvertible()) throw SingularSystemError("schur: A_CC block is singular");
    const Eigen::MatrixXd acc_inv_acp = lu_cc.solve(Eigen::MatrixXd(system.a_cp));
    const Eigen::MatrixXd xi =
        Eigen::MatrixXd(system.a_pp) - Eigen::MatrixXd(system.a_pc) * acc_inv_acp;

    Eigen::FullPivLU<Eigen::MatrixXd> lu_xi(xi);
    if (!lu_xi.isInvertible()) throw SingularSystemError("schur: Xi block is singular");

    inv.pp = lu_xi.inverse();
    // A_PC A_CC^-1 via the transposed factorisation
    Eigen::FullPivLU<Eigen::MatrixXd> lu_cc_t(Eigen::MatrixXd(system.a_cc).transpose());
    const Eigen::MatrixXd apc_accinv =
        lu_cc_t.solve(Eigen::MatrixXd(system.a_pc).transpose()).transpose();
    inv.pc = -inv.pp * apc_accinv;
    inv.cp = -acc_inv_acp * inv.pp;
    inv.cc = lu_cc.inverse() + acc_inv_acp * inv.pp * apc_accinv;
    return inv;
}

MarginalMoments marginal_moments(const SlmParams& params, const BlockSystem& system,
                                 const Eigen::MatrixXd& x) {
    const int p = system.p(), c = system.c();
    if (x.rows() != system.n())
        throw std::invalid_argument("marginal_moments: X row count mismatch");
    const double rho = params.rho;

    Eigen::MatrixXd x_p(p, x.cols()), x_c(c, x.cols());
    for (int i = 0; i < p; ++i) x_p.row(i) = x.row(system.idx_obs[i]);
    for (int i = 0; i < c; ++i) x_c.row(i) = x.row(system.idx_coa[i]);
    const Eigen::VectorXd xb_p = x_p * params.beta;
    const Eigen::VectorXd xb_c = x_c * params.beta;

    const Eigen::MatrixXd a_pp = Eigen::MatrixXd::Identity(p, p) - rho * Eigen::MatrixXd(system.w_pp);
    MarginalMoments mm;
    if (c == 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a_pp);
        if (!lu.isInvertible()) throw SingularSystemError("marginal_moments: Xi singular");
        mm.mean = lu.solve(xb_p);
        const Eigen::MatrixXd xi_inv = lu.inverse();
        mm.cov = params.sigma2 * xi_inv * xi_inv.transpose();
    } else {
        const Eigen::MatrixXd w_pc = Eigen::MatrixXd(system.w_pc);
        const Eigen::MatrixXd a_pc = -rho * w_pc;
        const Eigen::MatrixXd a_cp = -rho * Eigen::MatrixXd(system.w_cp);
        const Eigen::MatrixXd a_cc =
            Eigen::MatrixXd::Identity(c, c) - rho * Eigen::MatrixXd(system.w_cc);
        Eigen::FullPivLU<Eigen::MatrixXd> lu_cc(a_cc);
        if (!lu_cc.isInvertible())
            throw SingularSystemError("marginal_moments: A_CC singular");
        const Eigen::MatrixXd xi = a_pp - a_pc * lu_cc.solve(a_cp);
        Eigen::FullPivLU<Eigen::MatrixXd> lu_xi(xi);
        if (!lu_xi.isInvertible()) throw SingularSystemError("marginal_moments: Xi singular");

        // mean = Xi^-1 X_P beta + rho Xi^-1 W_PC A_CC^-1 X_C beta
        mm.mean = lu_xi.solve(xb_p + rho * (w_pc * lu_cc.solve(xb_c)));

        // cov = sigma2 Xi^-1 (I + rho^2 W_PC (A_CC' A_CC)^-1 W_PC') Xi^-T,
        // with W_PC (A_CC' A_CC)^-1 W_PC' = U U' for U' = A_CC^-T W_PC'
        Eigen::FullPivLU<Eigen::MatrixXd> lu_cc_t(a_cc.transpose());
        const Eigen::MatrixXd u_t = lu_cc_t.solve(w_pc.transpose());
        const Eigen::MatrixXd core =
            Eigen::MatrixXd::Identity(p, p) + rho * rho * u_t.transpose() * u_t;
        const Eigen::MatrixXd xi_inv = lu_xi.inverse();
        mm.cov = params.sigma2 * xi_inv * core * xi_inv.transpose();
    }
    mm.cov = (0.5 * (mm.cov + mm.cov.transpose())).eval();
    return mm;
}

double log_lik_marginal(const SlmParams& params, const Eigen::VectorXd& y_obs,
                        const Eigen::MatrixXd& x, const BlockSystem& system) {
    const int p = system.p(), c = system.c();
    if (p == 0) throw std::invalid_argument("log_lik_marginal: no observed units");
    if (y_obs.size() != p) throw std::invalid_argument("log_lik_marginal: y_obs length mismatch");
    if (x.rows() != system.n())
        throw std::invalid_argument("log_lik_marginal: X row count mismatch");
    if (!(params.sigma2 > 0.0))
        throw std::invalid_argument("log_lik_marginal: sigma2 must be positive");
    const double rho = params.rho;

    Eigen::MatrixXd x_p(p, x.cols()), x_c(c, x.cols());
    for (int i = 0; i < p; ++i) x_p.row(i) = x.row(system.idx_obs[i]);
    for (int i = 0; i < c; ++i) x_c.row(i) = x.row(system.idx_coa[i]);
    const Eigen::VectorXd xb_p = x_p * params.beta;

    const Eigen::SparseMatrix<double> a_pp =
        identity_sparse(p) - rho * system.w_pp;

    // log|det A| from the full permuted system
    const Eigen::SparseMatrix<double> w_perm =
        assemble_permuted(system.w_pp, system.w_pc, system.w_cp, system.w_cc);
    Eigen::SparseMatrix<double> a_perm = identity_sparse(p + c) - rho * w_perm;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_a;
    lu_a.compute(a_perm);
    if (lu_a.info() != Eigen::Success)
        throw SingularSystemError("log_lik_marginal: I - rho W is singular");
    const double logdet_a = lu_a.logAbsDeterminant();

    double logdet_acc = 0.0;
    double logdet_core = 0.0;
    double quad;

    if (c == 0) {
        const Eigen::VectorXd t = a_pp * y_obs - xb_p;
        quad = t.squaredNorm() / params.sigma2;
    } else {
        Eigen::SparseMatrix<double> a_cc = identity_sparse(c) - rho * system.w_cc;
        SparseLuPair cc;
        factor_cc(a_cc, cc);
        logdet_acc = cc.log_abs_det;

        const Eigen::VectorXd xb_c = x_c * params.beta;

        // t = Xi (y_P - mean) = A_PP y_P - A_PC A_CC^-1 A_CP y_P
        //                       - X_P beta - rho W_PC A_CC^-1 X_C beta
        const Eigen::VectorXd acp_y = system.w_cp * y_obs;  // times -rho below
        const Eigen::VectorXd t = a_pp * y_obs -
                                  rho * rho * (system.w_pc * cc.lu.solve(acp_y)) - xb_p -
                                  rho * (system.w_pc * cc.lu.solve(xb_c));

        // Covariance core K = I_p + rho^2 U U', U = W_PC A_CC^-1.
        // Work with the c x c capacitance M = I_c + rho^2 U' U instead.
        const Eigen::MatrixXd u_t = cc.lu_t.solve(Eigen::MatrixXd(system.w_pc).transpose());
        Eigen::MatrixXd cap = rho * rho * (u_t * u_t.transpose());
        cap.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt(cap);
        if (llt.info() != Eigen::Success)
            throw SingularSystemError(
                "log_lik_marginal: covariance not positive definite");
        logdet_core = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();

        const Eigen::VectorXd v = u_t * t;  // U' t
        quad = (t.squaredNorm() - rho * rho * v.dot(llt.solve(v))) / params.sigma2;
    }

    // log det Sigma = p log sigma2 + log det K - 2 (log|det A| - log|det A_CC|)
    const double logdet_sigma =
        p * std::log(params.sigma2) + logdet_core - 2.0 * (logdet_a - logdet_acc);
    const double ll = -0.5 * (p * kLog2Pi + logdet_sigma + quad);
    if (!std::isfinite(ll))
        throw SingularSystemError("log_lik_marginal: non-finite log-likelihood");
    return ll;
}

double log_lik_full(const SlmParams& params, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                    const WeightMatrix& w) {
    const int n = w.n();
    if (y.size() != n || x.rows() != n)
        throw std::invalid_argument("log_lik_full: dimension mismatch");
    if (!(params.sigma2 > 0.0))
        throw std::invalid_argument("log_lik_full: sigma2 must be positive");
    const double logdet = log_abs_det_a(params.rho, w.w);
    const Eigen::VectorXd resid = y - params.rho * (w.w * y) - x * params.beta;
    return -0.5 * n * (kLog2Pi + std::log(params.sigma2)) + logdet -
           resid.squaredNorm() / (2.0 * params.sigma2);
}

double log_abs_det_a(double rho, const Eigen::SparseMatrix<double>& w) {
    const int n = static_cast<int>(w.rows());
    Eigen::SparseMatrix<double> a = identity_sparse(n) - rho * w;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw SingularSystemError("log_abs_det_a: I - rho W is singular");
    return lu.logAbsDeterminant();
}

std::pair<double, double> admissible_rho_interval(const WeightMatrix& w) {
    if (w.row_standardised) return {-1.0, 1.0};
    if (w.w.nonZeros() == 0) return {-1e6, 1e6};  // objective flat in rho

    // Unstandardised kappa matrices are symmetric; use the real spectrum.
    Eigen::MatrixXd dense(w.w);
    const double asym = (dense - dense.transpose()).cwiseAbs().maxCoeff();
    double lmin, lmax;
    if (asym < 1e-12) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
        lmin = es.eigenvalues().minCoeff();
        lmax = es.eigenvalues().maxCoeff();
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
        lmin = 1e300;
        lmax = -1e300;
        const double scale = dense.cwiseAbs().maxCoeff();
        for (int i = 0; i < dense.rows(); ++i) {
            if (std::abs(es.eigenvalues()[i].imag()) > 1e-9 * std::max(1.0, scale)) continue;
            const double re = es.eigenvalues()[i].real();
            lmin = std::min(lmin, re);
            lmax = std::max(lmax, re);
        }
    }
    const double hi = lmax > 1e-12 ? 1.0 / lmax : 1e6;
    const double lo = lmin < -1e-12 ? 1.0 / lmin : -1e6;
    return {lo, hi};
}

}  // namespace slmc
