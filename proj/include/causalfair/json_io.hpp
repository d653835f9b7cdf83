#pragma once

#include "causalfair/graph.hpp"
#include "causalfair/learners.hpp"
#include "causalfair/metrics.hpp"
#include "causalfair/simulate.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace causalfair::io {

// Insertion-ordered so serialised output is byte stable.
using Json = nlohmann::ordered_json;

/// Nodes and edges with state, alpha, standardised weight and the
/// representable flag; `delta_bic` is attached when given.
Json graph_summary(const graph::CausalModel& model, std::optional<double> delta_bic = std::nullopt);
/// Per-node structural equation fit statistics.
Json fit_summary(const graph::CausalModel& model);

Json to_json(const graph::EditRecord& record);
/// Reads {stage, op, source, target, slider?}. Throws DataError.
graph::EditRecord record_from_json(const Json& j);
/// Array of records.
Json to_json(const graph::EditLog& log);
graph::EditLog edit_log_from_json(const Json& j);

/// {"column": name} or {"a": [conditions], "b": [conditions]} where a
/// condition is {"column", "levels": [...]} or {"column", "ranges": [[lo, hi], ...]}.
metrics::GroupSpec group_from_json(const Json& j);
Json to_json(const metrics::GroupSpec& spec);

/// "logistic" or {"id": "tree_ensemble", "params": {"trees": 50}}.
learners::ClassifierSpec learner_from_json(const Json& j);
Json to_json(const learners::ClassifierSpec& spec);

Json to_json(const metrics::Fourfold& f);
Json to_json(const metrics::MetricsReport& r);
Json to_json(const metrics::Comparison& c);

/// Parses JSON text, rethrowing syntax errors as DataError with `what` as context.
Json parse(std::string_view text, const std::string& what);
Json read_file(const std::string& path);
void write_file(const std::string& path, const Json& j);
void write_text(const std::string& path, const std::string& text);

}  // namespace causalfair::io
