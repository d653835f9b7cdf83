#pragma once

#include "causalfair/glm.hpp"
#include "causalfair/tabular.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace causalfair::sem {

enum class ModelKind { linear, binary_logit, multinomial_logit };

std::string_view to_string(ModelKind kind) noexcept;

/// Fitted structural equation for one endogenous node.
///
/// Linear targets: target = intercept + coefficients' * x.
/// Logit targets: class k+1 has linear predictor intercept(k) + coefficients.col(k)' * x
/// against baseline class 0 (the first level).
struct NodeModel {
    std::string target;
    std::vector<std::string> parents;
    ModelKind kind = ModelKind::linear;
    tabular::Encoder encoder;  // raw dummy coding of the parents

    Eigen::MatrixXd coefficients;  // encoded parent columns x width
    Eigen::RowVectorXd intercept;  // width
    double residual_variance = 0.0;  // linear only (MLE)

    std::size_t n = 0;
    double log_likelihood = 0.0;
    int n_params = 0;
    double bic = 0.0;
    bool converged = true;
    int iterations = 0;
    /// R^2 for linear targets, training accuracy for logit targets.
    double fit_quality = 0.0;

    std::size_t width() const noexcept { return static_cast<std::size_t>(intercept.size()); }
};

NodeModel fit_node(const tabular::Dataset& data, const std::string& target, const std::vector<std::string>& parents);

struct FitScore {
    /// Sum over endogenous nodes.
    double total_bic = 0.0;
    std::map<std::string, double> per_node;
    /// Intercept-only BIC of every node without a model. Lets delta_bic
    /// compare graphs in which a node changes between exogenous and endogenous.
    std::map<std::string, double> exogenous;
};

using DirectedEdge = std::pair<std::string, std::string>;  // (source, target)

struct SemFit {
    std::map<std::string, NodeModel> models;
    FitScore score;
};

/// One model per node with at least one directed parent. Parents are fitted
/// in lexicographic order. `threads` == 0 picks the hardware concurrency.
SemFit fit_all(const tabular::Dataset& data, const std::vector<DirectedEdge>& edges, unsigned threads = 1);

/// Intercept-only BIC of every column.
std::map<std::string, double> baseline_bics(const tabular::Dataset& data, unsigned threads = 1);

/// `baselines` supplies the exogenous entries for nodes without a model.
FitScore score_of(const std::map<std::string, NodeModel>& models,
                  const std::map<std::string, double>& baselines = {});

/// Positive-is-worse change in whole-graph BIC: endogenous totals plus the
/// intercept-only terms of exogenous nodes.
double delta_bic(const FitScore& before, const FitScore& after) noexcept;

struct EdgeWeight {
    std::string source;
    std::string target;
    std::optional<double> std_beta;
    bool representable = false;
};

EdgeWeight edge_weight(const NodeModel& model, const std::string& source, const tabular::Dataset& data);

}  // namespace causalfair::sem
