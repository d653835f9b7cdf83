#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace causalfair::learners {

enum class LearnerId { logistic, tree_ensemble, linear_svm };

std::string_view to_string(LearnerId id) noexcept;
LearnerId parse_learner(std::string_view id);

/// Hyperparameters by learner:
///   logistic       ridge (1e-4), max_iter (100)
///   tree_ensemble  trees (100), max_depth (8), min_leaf (1), threads (1)
///   linear_svm     lambda (1e-4), epochs (30)
/// Unknown keys are rejected.
struct ClassifierSpec {
    LearnerId id = LearnerId::logistic;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;

    void validate() const;
    double param(const std::string& key) const;
};

/// Trained binary classifier; label 1 is the favorable class.
class Classifier {
public:
    virtual ~Classifier() = default;

    /// Decision scores; positive means label 1.
    virtual Eigen::VectorXd scores(const Eigen::MatrixXd& x) const = 0;
    std::size_t features() const noexcept { return features_; }

    /// 1 iff score > 0; a score of exactly 0 is assigned label 0.
    std::vector<int> predict(const Eigen::MatrixXd& x) const;

protected:
    explicit Classifier(std::size_t features) : features_(features) {}
    void check_columns(const Eigen::MatrixXd& x) const;

private:
    std::size_t features_;
};

struct Trained {
    std::shared_ptr<const Classifier> model;
    std::vector<std::string> warnings;
};

/// Requires n >= 10 and y in {0, 1}. A single-class y yields a constant
/// predictor and a warning.
Trained fit(const ClassifierSpec& spec, const Eigen::MatrixXd& x, std::span<const int> y);

/// Penalised logistic loss used by the logistic learner, for diagnostics.
double logistic_loss(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& coef,
                     double intercept, double ridge);

}  // namespace causalfair::learners
