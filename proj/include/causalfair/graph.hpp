#pragma once

#include "causalfair/discovery.hpp"
#include "causalfair/sem.hpp"
#include "causalfair/tabular.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace causalfair::graph {

enum class Stage { refine, debias };
enum class EdgeState { undirected, directed };
enum class EdgeOrigin { discovered, user_added };
enum class EditOp { add, remove, reverse, direct, set_alpha };

std::string_view to_string(Stage s) noexcept;
std::string_view to_string(EdgeState s) noexcept;
std::string_view to_string(EdgeOrigin o) noexcept;
/// "add", "delete", "reverse", "direct", "set_alpha"
std::string_view to_string(EditOp op) noexcept;
Stage parse_stage(std::string_view s);
EditOp parse_op(std::string_view s);

struct Edge {
    std::string source;  // for undirected edges: lexicographically smaller endpoint
    std::string target;
    EdgeState state = EdgeState::undirected;
    double alpha = 1.0;
    EdgeOrigin origin = EdgeOrigin::discovered;

    bool operator==(const Edge&) const = default;
};

struct EditRecord {
    Stage stage = Stage::refine;
    EditOp op = EditOp::add;
    std::string source;
    std::string target;
    double alpha_before = 1.0;
    double alpha_after = 1.0;
    std::optional<double> slider;  // set_alpha only, percent in [-100, 100]

    bool operator==(const EditRecord&) const = default;
};

using DirectedPair = std::pair<std::string, std::string>;

class EditLog {
public:
    void append(EditRecord r) { records_.push_back(std::move(r)); }
    const std::vector<EditRecord>& records() const noexcept { return records_; }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t size() const noexcept { return records_.size(); }
    void truncate(std::size_t n) { records_.resize(std::min(n, records_.size())); }

    /// Edges added during the debias stage.
    std::set<DirectedPair> added_in_debias() const;
    /// Edges deleted, strengthened or weakened during the debias stage.
    std::set<DirectedPair> modified_in_debias() const;

    bool operator==(const EditLog&) const = default;

private:
    std::vector<EditRecord> records_;
};

/// Alpha for a slider position in percent; throws EditError outside [-100, 100].
double alpha_from_slider(double slider);

/// The editable causal model: discovered structure, user edits, fitted
/// structural equations and the append-only edit log.
class CausalModel {
public:
    CausalModel(std::shared_ptr<const tabular::Dataset> data, const discovery::Cpdag& cpdag, unsigned threads = 1);

    const tabular::Dataset& data() const noexcept { return *data_; }
    std::shared_ptr<const tabular::Dataset> data_ptr() const noexcept { return data_; }

    Stage stage() const noexcept { return stage_; }
    const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    /// Sorted by (source, target).
    std::vector<Edge> edges() const;
    /// Edge between a and b in either direction.
    const Edge* find_edge(const std::string& a, const std::string& b) const;
    std::vector<std::string> parents(const std::string& node) const;
    std::vector<std::string> children(const std::string& node) const;
    std::vector<DirectedPair> directed_edges() const;

    const std::map<std::string, sem::NodeModel>& node_models() const noexcept { return models_; }
    const sem::FitScore& fit() const noexcept { return fit_; }
    const EditLog& log() const noexcept { return log_; }
    /// Discovered structure this model started from.
    const discovery::Cpdag& origin() const noexcept { return origin_; }

    /// Refine-stage edit; returns the BIC change (after - before).
    double apply_refine(EditOp op, const std::string& source, const std::string& target);
    /// Debias-stage edit. `slider` (percent) is required for set_alpha;
    /// -100 is recorded as a delete.
    void apply_debias(EditOp op, const std::string& source, const std::string& target,
                      std::optional<double> slider = std::nullopt);
    /// Replays one record, entering the debias stage when needed.
    double apply(const EditRecord& record);

    /// One-way switch from Refine to Debias; snapshots the refined model.
    void enter_debias();
    /// Restores the snapshot taken by enter_debias and drops later log records.
    void reset_to_refined();

    /// Every simple directed path, in lexicographic order of node sequences.
    std::vector<std::vector<std::string>> find_paths(const std::string& source, const std::string& target) const;
    /// Heads of debias-stage edits plus all their descendants.
    std::set<std::string> debias_footprint() const;
    std::set<std::string> descendants(const std::string& node) const;
    /// Kahn's algorithm with lexicographic tie-breaking.
    std::vector<std::string> topological_order() const;

    /// Alpha for each parent of the node's fitted model; 0 for parents whose
    /// edge was deleted in the debias stage.
    std::map<std::string, double> parent_alphas(const std::string& node) const;

    /// Standardised weight for a directed edge from the current node models.
    sem::EdgeWeight weight(const std::string& source, const std::string& target) const;

    /// Replays `log` from the discovered structure.
    static CausalModel replay(std::shared_ptr<const tabular::Dataset> data, const discovery::Cpdag& cpdag,
                              const EditLog& log, unsigned threads = 1);

    /// Structure, alphas and stage equal (models follow from them).
    bool same_structure(const CausalModel& other) const;

private:
    using Key = std::pair<std::string, std::string>;
    static Key key(const std::string& a, const std::string& b);

    void require_node(const std::string& name) const;
    void check_acyclic_with(const std::string& from, const std::string& to,
                            const std::set<Key>& ignore = {}) const;
    std::optional<std::vector<std::string>> directed_path(const std::string& from, const std::string& to,
                                                          const std::set<Key>& ignore) const;
    void refit(const std::set<std::string>& targets);

    struct Snapshot {
        std::map<Key, Edge> edges;
        std::map<std::string, sem::NodeModel> models;
        sem::FitScore fit;
        std::size_t log_size = 0;
    };

    std::shared_ptr<const tabular::Dataset> data_;
    discovery::Cpdag origin_;
    std::vector<std::string> nodes_;
    std::map<Key, Edge> edges_;
    std::map<std::string, sem::NodeModel> models_;
    sem::FitScore fit_;
    std::map<std::string, double> baselines_;  // intercept-only BIC per node
    Stage stage_ = Stage::refine;
    EditLog log_;
    std::optional<Snapshot> refined_;
    unsigned threads_ = 1;
};

}  // namespace causalfair::graph
