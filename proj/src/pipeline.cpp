#include "causalfair/pipeline.hpp"

namespace causalfair::pipeline {

namespace {

std::optional<tabular::SchemaHint> merge(std::optional<tabular::SchemaHint> hint, const LoadOptions& opts) {
    if (!opts.label && !opts.favorable) return hint;
    tabular::SchemaHint h = hint.value_or(tabular::SchemaHint{});
    if (opts.label) h.label = opts.label;
    if (opts.favorable) h.favorable = opts.favorable;
    return h;
}

}  // namespace

tabular::LoadResult load(const std::string& csv_path, const LoadOptions& opts) {
    std::optional<tabular::SchemaHint> hint;
    if (opts.schema_path) hint = tabular::read_schema(*opts.schema_path);
    return tabular::load_csv(csv_path, merge(std::move(hint), opts));
}

tabular::LoadResult load_text(std::string_view csv, std::string name, std::optional<tabular::SchemaHint> hint,
                              const LoadOptions& opts) {
    return tabular::parse_csv(csv, std::move(name), merge(std::move(hint), opts));
}

tabular::Dataset conform(const tabular::Dataset& reference, const tabular::Dataset& other) {
    if (other.rows() == 0) throw DataError("dataset has no rows");
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < reference.cols(); ++j) {
        const auto& ref = reference.spec(j);
        const auto found = other.find(ref.name);
        if (!found) throw DataError("column '" + ref.name + "' is missing");
        const auto& spec = other.spec(*found);
        if (spec.kind != ref.kind) throw DataError("column '" + ref.name + "' changed kind");
        const auto src = other.column(*found);
        std::vector<double> out(src.begin(), src.end());
        if (ref.nominal()) {
            std::vector<double> map(spec.levels.size());
            for (std::size_t l = 0; l < spec.levels.size(); ++l) {
                const int k = ref.level_index(spec.levels[l]);
                if (k < 0) throw DataError("column '" + ref.name + "' has unknown level '" + spec.levels[l] + "'");
                map[l] = k;
            }
            for (double& v : out) v = map[static_cast<std::size_t>(v)];
        }
        cols.push_back(std::move(out));
    }
    if (other.cols() != reference.cols()) throw DataError("dataset has columns the reference lacks");
    return tabular::Dataset(other.name(), reference.schema(), std::move(cols), reference.label());
}

Discovered discover(std::shared_ptr<const tabular::Dataset> data, const discovery::DiscoveryConfig& cfg) {
    auto result = discovery::discover(*data, cfg);
    Discovered d{result.graph, nullptr, std::move(result.warnings)};
    d.model = std::make_shared<graph::CausalModel>(std::move(data), d.cpdag, cfg.threads);
    return d;
}

void replay(graph::CausalModel& model, const graph::EditLog& log) {
    const auto& recs = log.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        try {
            model.apply(recs[i]);
        } catch (const EditError& e) {
            throw ReplayError(i, e.what(), e.cycle());
        } catch (const Error& e) {
            throw ReplayError(i, e.what());
        }
    }
}

}  // namespace causalfair::pipeline
