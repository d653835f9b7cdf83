#pragma once

#include "causalfair/graph.hpp"
#include "causalfair/sem.hpp"
#include "causalfair/tabular.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace causalfair::simulate {

struct SimulationConfig {
    std::uint64_t seed = 0;
    double rescale_lr = 0.1;
    int rescale_max_iters = 50;
    /// Row-parallelism inside one node; results do not depend on it.
    unsigned threads = 1;

    void validate() const;
};

/// Mean and standard deviation of each encoded parent column in the
/// original data; the stochastic term draws from N(mean, std^2).
struct NoiseSpec {
    std::vector<double> mean;
    std::vector<double> std;
};

NoiseSpec noise_spec(const sem::NodeModel& model, const tabular::Dataset& original);

struct NodeSimulation {
    std::vector<double> values;  // numeric targets
    Eigen::MatrixXd prob_mat;    // nominal targets, n x L
};

/// Re-generates one node: per row, score = sum(a_i b_i x_i) + intercept + sum((1 - a_i) b_i r_i).
/// `alphas` maps each model parent to its scaling factor (missing = 1).
/// Parent values are read from `parents` (simulated where available).
NodeSimulation simulate_node(const sem::NodeModel& model, const std::map<std::string, double>& alphas,
                             const tabular::Dataset& parents, const NoiseSpec& noise, std::uint64_t seed,
                             unsigned threads = 1);

struct NumericRescale {
    std::vector<double> values;
    bool degenerate = false;  // simulated column had zero variance
};

/// Affine map onto the original column's mean and standard deviation.
NumericRescale rescale_numeric(std::span<const double> simulated, std::span<const double> original);

struct RescaleState {
    Eigen::MatrixXd prob_mat;
    std::vector<double> dist_ori;
    std::vector<double> dist_deb;
    std::vector<double> scale_factor;
    double diff = 0.0;
};

struct CategoricalRescale {
    std::vector<double> labels;  // level codes
    int iterations = 0;          // scaling steps performed
    RescaleState state;
    double initial_l1 = 0.0;     // argmax of the unscaled matrix vs original marginal
    double final_l1 = 0.0;
    std::vector<std::string> warnings;
};

/// Iteratively rescales class probabilities so the argmax marginal moves
/// toward the original marginal.
CategoricalRescale rescale_categorical(const Eigen::MatrixXd& prob_mat, std::span<const double> original,
                                       const SimulationConfig& cfg);

/// Discrete distribution of level codes, length `levels`.
std::vector<double> distribution(std::span<const double> codes, std::size_t levels);
/// Row-wise argmax, ties to the lowest index.
std::vector<double> argmax_rows(const Eigen::MatrixXd& m);

struct DebiasResult {
    tabular::Dataset data;
    std::set<std::string> simulated;
    std::vector<std::string> retrained;
    std::vector<std::string> warnings;
    /// R^2 or accuracy of the model used for each simulated node.
    std::map<std::string, double> fit_quality;
};

/// Generates the debiased dataset from the model's debias-stage edits.
DebiasResult generate_debiased(const tabular::Dataset& data, const graph::CausalModel& model,
                               const SimulationConfig& cfg);

}  // namespace causalfair::simulate
