#pragma once

#include "causalfair/learners.hpp"
#include "causalfair/tabular.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace causalfair::metrics {

/// One attribute condition of a custom group: a nominal column restricted
/// to a set of levels, or a numeric column restricted to a union of
/// inclusive ranges.
struct Condition {
    std::string column;
    std::vector<std::string> levels;
    std::vector<std::pair<double, double>> ranges;
};

/// Conjunction of conditions. An empty predicate matches nothing.
struct Predicate {
    std::vector<Condition> conditions;
};

/// Either a binary sensitive column (group A = first level, group B =
/// second level) or two custom predicates.
struct GroupSpec {
    std::optional<std::string> column;
    Predicate a;
    Predicate b;

    static GroupSpec sensitive(std::string column);
    static GroupSpec custom(Predicate a, Predicate b);

    /// Columns the groups are defined over; dropped before training.
    std::set<std::string> attributes() const;
    std::string name_a(const tabular::Dataset& data) const;
    std::string name_b(const tabular::Dataset& data) const;
};

/// Row membership per group, resolved once on the original data.
struct Groups {
    std::vector<char> a;
    std::vector<char> b;
    std::string name_a;
    std::string name_b;
};

/// Throws DataError when a group is empty or the groups overlap.
Groups resolve(const tabular::Dataset& data, const GroupSpec& spec);

/// Binary outcome: which column is the label and which level counts as favorable.
struct Outcome {
    std::string column;
    std::string favorable;

    /// Label from the schema file when the arguments are absent.
    static Outcome of(const tabular::Dataset& data, std::optional<std::string> column = std::nullopt,
                      std::optional<std::string> favorable = std::nullopt);
    /// 1 where the row carries the favorable level.
    std::vector<int> indicator(const tabular::Dataset& data) const;
};

/// Favorable / unfavorable percentages per group.
struct Fourfold {
    double a_favorable = 0.0;
    double a_unfavorable = 0.0;
    double b_favorable = 0.0;
    double b_unfavorable = 0.0;
};

Fourfold fourfold(const tabular::Dataset& data, const Groups& groups, const Outcome& outcome);
double parity_diff(const tabular::Dataset& data, const Groups& groups, const Outcome& outcome);

/// Mean share of each row's k Gower-nearest neighbours (over all non-label
/// columns, ties by row index) whose label differs.
double individual_bias(const tabular::Dataset& data, const std::string& label, std::size_t k = 5,
                       unsigned threads = 1);

/// Mean Gower distance between aligned rows, numeric ranges from `original`.
double distortion(const tabular::Dataset& original, const tabular::Dataset& debiased);

struct EvalConfig {
    learners::ClassifierSpec learner;
    int splits = 3;
    std::size_t k = 5;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const;
};

struct ClassifierScores {
    double accuracy = 0.0;  // against the reference labels
    double f1 = 0.0;
    double accuracy_diff = 0.0;  // against the dataset's own labels
    double fnr_diff = 0.0;
    double fpr_diff = 0.0;
    std::vector<std::string> warnings;
};

/// Repeated stratified 50:50 splits. Per split a classifier is trained on
/// `data` (label and `drop` columns removed) and scored on the test half:
/// accuracy and F1 against `reference` labels, group gaps against the
/// dataset's own labels. Splits are stratified on `reference`, so passing
/// the same reference for two aligned datasets gives them identical splits.
ClassifierScores classifier_scores(const tabular::Dataset& data, std::span<const int> reference,
                                   const Groups& groups, const Outcome& outcome, const std::set<std::string>& drop,
                                   const EvalConfig& cfg);

struct MetricsReport {
    double accuracy = 0.0;
    double f1 = 0.0;
    double parity_diff = 0.0;
    double accuracy_diff = 0.0;
    double fnr_diff = 0.0;
    double fpr_diff = 0.0;
    double individual_bias = 0.0;
    double distortion = 0.0;
    Fourfold fourfold;
    std::vector<std::string> warnings;
};

/// Metrics of `candidate` relative to `original` (row aligned). Groups are
/// resolved on the original rows.
MetricsReport evaluate(const tabular::Dataset& original, const tabular::Dataset& candidate, const GroupSpec& groups,
                       const Outcome& outcome, const EvalConfig& cfg);

struct Comparison {
    MetricsReport original;
    MetricsReport debiased;
    std::string group_a;
    std::string group_b;
};

Comparison compare(const tabular::Dataset& original, const tabular::Dataset& debiased, const GroupSpec& groups,
                   const Outcome& outcome, const EvalConfig& cfg);

}  // namespace causalfair::metrics
