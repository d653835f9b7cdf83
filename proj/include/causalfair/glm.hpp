#pragma once

#include <Eigen/Dense>

#include <span>

namespace causalfair::glm {

// Regression solvers shared by the structural equations, the conditional
// independence test and the logistic learner. Design matrices are passed
// WITHOUT an intercept column; every fit estimates one.

struct OlsFit {
    double intercept = 0.0;
    Eigen::VectorXd coef;
    double rss = 0.0;
    bool ridged = false;  // normal equations were singular; ridge 1e-8 applied
};

OlsFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct LogitOptions {
    double ridge = 1e-6;
    int max_iter = 100;
    double tol = 1e-8;
};

/// Baseline-category multinomial logit. Class 0 is the baseline; column k of
/// `coef` / entry k of `intercept` belong to class k+1.
struct LogitFit {
    Eigen::MatrixXd coef;          // p x (K-1)
    Eigen::RowVectorXd intercept;  // K-1
    double log_likelihood = 0.0;   // unpenalised, at the returned coefficients
    int iterations = 0;
    bool converged = false;
};

/// Newton-Raphson with step halving on the ridge-penalised log-likelihood.
/// Converged when the largest coefficient update drops below `tol`.
/// `classes` >= 2; every y must lie in [0, classes).
LogitFit fit_logit(const Eigen::MatrixXd& x, std::span<const int> y, int classes, const LogitOptions& opts = {},
                   const LogitFit* warm_start = nullptr);

/// Linear predictors, n x K, with the baseline column fixed at zero.
Eigen::MatrixXd logit_scores(const Eigen::MatrixXd& x, const LogitFit& fit);

/// Row-wise softmax of linear predictors (stable for large magnitudes).
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

/// Sum over rows of log P(y_i).
double logit_log_likelihood(const Eigen::MatrixXd& x, std::span<const int> y, const LogitFit& fit);

/// Gradient of the penalised log-likelihood, flattened class-major:
/// [intercept_1, coef_1..., intercept_2, coef_2..., ...].
Eigen::VectorXd logit_gradient(const Eigen::MatrixXd& x, std::span<const int> y, const LogitFit& fit,
                               double ridge);

}  // namespace causalfair::glm
