#pragma once

#include "causalfair/discovery.hpp"
#include "causalfair/error.hpp"
#include "causalfair/graph.hpp"
#include "causalfair/simulate.hpp"
#include "causalfair/tabular.hpp"

#include <memory>
#include <optional>
#include <string>

namespace causalfair::pipeline {

// The load -> discover -> edit -> simulate sequence shared by the command
// line tool, the session service and the Python module.

struct LoadOptions {
    std::optional<std::string> schema_path;
    /// Override the schema file's label / favorable level.
    std::optional<std::string> label;
    std::optional<std::string> favorable;
};

tabular::LoadResult load(const std::string& csv_path, const LoadOptions& opts = {});
tabular::LoadResult load_text(std::string_view csv, std::string name, std::optional<tabular::SchemaHint> hint,
                              const LoadOptions& opts = {});

/// Re-expresses `other` in `reference`'s column order and level coding, so
/// a re-loaded debiased file compares cell for cell with the original even
/// when a level went unused. Throws DataError on missing columns, differing
/// kinds or unknown levels.
tabular::Dataset conform(const tabular::Dataset& reference, const tabular::Dataset& other);

/// Discovers the CPDAG and fits the structural equations of its directed edges.
struct Discovered {
    discovery::Cpdag cpdag;
    std::shared_ptr<graph::CausalModel> model;
    std::vector<std::string> warnings;
};

Discovered discover(std::shared_ptr<const tabular::Dataset> data, const discovery::DiscoveryConfig& cfg);

/// Rejected edit while replaying a script; `index` is the record's position.
class ReplayError : public EditError {
public:
    ReplayError(std::size_t index, const std::string& what, std::vector<std::string> cycle = {})
        : EditError("edit " + std::to_string(index) + ": " + what, std::move(cycle)), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Applies every record in order; throws ReplayError on the first rejection.
void replay(graph::CausalModel& model, const graph::EditLog& log);

}  // namespace causalfair::pipeline
