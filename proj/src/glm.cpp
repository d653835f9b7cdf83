#include "causalfair/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace causalfair::glm {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

}  // namespace

OlsFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd design = with_intercept(x);
    const Eigen::Index p = design.cols();
    Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * y;

    OlsFit fit;
    Eigen::VectorXd beta;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
        // LLT succeeds on numerically singular Gram matrices too; check the
        // pivots against the diagonal scale.
        const auto& l = llt.matrixL();
        const double scale = gram.diagonal().cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < p && ok; ++i) {
            const double piv = l(i, i) * l(i, i);
            if (!(piv > 1e-12 * std::max(scale, 1.0))) ok = false;
        }
    }
    if (ok) {
        beta = llt.solve(rhs);
    } else {
        gram.diagonal().array() += 1e-8;
        beta = gram.ldlt().solve(rhs);
        fit.ridged = true;
    }
    fit.intercept = beta(0);
    fit.coef = beta.tail(p - 1);
    fit.rss = (y - design * beta).squaredNorm();
    return fit;
}

Eigen::MatrixXd logit_scores(const Eigen::MatrixXd& x, const LogitFit& fit) {
    const Eigen::Index km1 = fit.intercept.size();
    Eigen::MatrixXd s(x.rows(), km1 + 1);
    s.col(0).setZero();
    if (x.cols() > 0)
        s.rightCols(km1) = x * fit.coef;
    else
        s.rightCols(km1).setZero();
    s.rightCols(km1).rowwise() += fit.intercept;
    return s;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd p = scores;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

namespace {

double log_lik_from_scores(const Eigen::MatrixXd& s, std::span<const int> y) {
    double ll = 0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        const double lse = mx + std::log((s.row(i).array() - mx).exp().sum());
        ll += s(i, y[static_cast<std::size_t>(i)]) - lse;
    }
    return ll;
}

double penalty(const LogitFit& f, double ridge) { return 0.5 * ridge * f.coef.squaredNorm(); }

}  // namespace

double logit_log_likelihood(const Eigen::MatrixXd& x, std::span<const int> y, const LogitFit& fit) {
    return log_lik_from_scores(logit_scores(x, fit), y);
}

Eigen::VectorXd logit_gradient(const Eigen::MatrixXd& x, std::span<const int> y, const LogitFit& fit,
                               double ridge) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p1 = x.cols() + 1;
    const Eigen::Index km1 = fit.intercept.size();
    const Eigen::MatrixXd prob = softmax_rows(logit_scores(x, fit));
    Eigen::VectorXd g(p1 * km1);
    for (Eigen::Index k = 0; k < km1; ++k) {
        Eigen::VectorXd resid(n);
        for (Eigen::Index i = 0; i < n; ++i)
            resid(i) = (y[static_cast<std::size_t>(i)] == k + 1 ? 1.0 : 0.0) - prob(i, k + 1);
        g(k * p1) = resid.sum();
        if (x.cols() > 0) g.segment(k * p1 + 1, p1 - 1) = x.transpose() * resid - ridge * fit.coef.col(k);
    }
    return g;
}

LogitFit fit_logit(const Eigen::MatrixXd& x, std::span<const int> y, int classes, const LogitOptions& opts,
                   const LogitFit* warm_start) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::Index p1 = p + 1;
    const Eigen::Index km1 = classes - 1;
    const Eigen::Index dim = p1 * km1;
    const Eigen::MatrixXd design = with_intercept(x);

    LogitFit fit;
    if (warm_start && warm_start->coef.rows() == p && warm_start->coef.cols() == km1) {
        fit.coef = warm_start->coef;
        fit.intercept = warm_start->intercept;
    } else {
        fit.coef = Eigen::MatrixXd::Zero(p, km1);
        fit.intercept = Eigen::RowVectorXd::Zero(km1);
        // Start intercepts at the smoothed log-odds of the marginal.
        std::vector<double> counts(static_cast<std::size_t>(classes), 0.5);
        for (int v : y) counts[static_cast<std::size_t>(v)] += 1.0;
        for (Eigen::Index k = 0; k < km1; ++k)
            fit.intercept(k) = std::log(counts[static_cast<std::size_t>(k + 1)] / counts[0]);
    }

    auto objective = [&](const LogitFit& f, Eigen::MatrixXd* prob_out) {
        const Eigen::MatrixXd s = logit_scores(x, f);
        if (prob_out) *prob_out = softmax_rows(s);
        return log_lik_from_scores(s, y) - penalty(f, opts.ridge);
    };

    Eigen::MatrixXd prob;
    double obj = objective(fit, &prob);

    for (int it = 0; it < opts.max_iter; ++it) {
        fit.iterations = it + 1;
        // Gradient and negative Hessian of the penalised log-likelihood.
        Eigen::VectorXd grad(dim);
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index a = 0; a < km1; ++a) {
            Eigen::VectorXd resid(n);
            for (Eigen::Index i = 0; i < n; ++i)
                resid(i) = (y[static_cast<std::size_t>(i)] == a + 1 ? 1.0 : 0.0) - prob(i, a + 1);
            grad.segment(a * p1, p1) = design.transpose() * resid;
            if (p > 0) grad.segment(a * p1 + 1, p) -= opts.ridge * fit.coef.col(a);
            for (Eigen::Index b = a; b < km1; ++b) {
                Eigen::VectorXd w(n);
                for (Eigen::Index i = 0; i < n; ++i)
                    w(i) = prob(i, a + 1) * ((a == b ? 1.0 : 0.0) - prob(i, b + 1));
                const Eigen::MatrixXd block = design.transpose() * w.asDiagonal() * design;
                info.block(a * p1, b * p1, p1, p1) = block;
                if (a != b) info.block(b * p1, a * p1, p1, p1) = block.transpose();
            }
            for (Eigen::Index j = 1; j < p1; ++j) info(a * p1 + j, a * p1 + j) += opts.ridge;
        }
        // Tiny jitter keeps the intercept block solvable under separation.
        info.diagonal().array() += 1e-12;
        Eigen::VectorXd step = info.ldlt().solve(grad);
        if (!step.allFinite()) break;

        double t = 1.0;
        LogitFit trial = fit;
        double trial_obj = -std::numeric_limits<double>::infinity();
        Eigen::MatrixXd trial_prob;
        for (int half = 0; half < 40; ++half) {
            for (Eigen::Index k = 0; k < km1; ++k) {
                trial.intercept(k) = fit.intercept(k) + t * step(k * p1);
                if (p > 0) trial.coef.col(k) = fit.coef.col(k) + t * step.segment(k * p1 + 1, p);
            }
            trial_obj = objective(trial, &trial_prob);
            if (trial_obj >= obj - 1e-12 * std::abs(obj)) break;
            t *= 0.5;
        }
        const double max_update = t * step.cwiseAbs().maxCoeff();
        if (!(trial_obj >= obj - 1e-12 * std::abs(obj))) {
            fit.converged = max_update < opts.tol;
            break;
        }
        fit.coef = trial.coef;
        fit.intercept = trial.intercept;
        prob = std::move(trial_prob);
        obj = trial_obj;
        if (max_update < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.log_likelihood = logit_log_likelihood(x, y, fit);
    return fit;
}

}  // namespace causalfair::glm
