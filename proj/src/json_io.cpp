#include "causalfair/json_io.hpp"

#include "causalfair/error.hpp"

#include <fstream>
#include <sstream>

namespace causalfair::io {

Json graph_summary(const graph::CausalModel& model, std::optional<double> delta_bic) {
    Json j;
    j["stage"] = graph::to_string(model.stage());
    Json nodes = Json::array();
    const auto& data = model.data();
    for (const auto& name : model.nodes()) {
        Json n;
        n["name"] = name;
        n["kind"] = tabular::to_string(data.spec(data.index_of(name)).kind);
        auto it = model.node_models().find(name);
        n["endogenous"] = it != model.node_models().end();
        if (it != model.node_models().end()) {
            n["model"] = sem::to_string(it->second.kind);
            n["bic"] = it->second.bic;
            n["fit_quality"] = it->second.fit_quality;
        }
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);

    Json edges = Json::array();
    for (const auto& e : model.edges()) {
        Json o;
        o["source"] = e.source;
        o["target"] = e.target;
        o["state"] = graph::to_string(e.state);
        o["alpha"] = e.alpha;
        o["origin"] = graph::to_string(e.origin);
        std::optional<double> beta;
        bool representable = false;
        if (e.state == graph::EdgeState::directed && model.node_models().count(e.target)) {
            const auto w = model.weight(e.source, e.target);
            beta = w.std_beta;
            representable = w.representable;
        }
        o["std_beta"] = beta ? Json(*beta) : Json(nullptr);
        // The value a view should draw: the fitted weight scaled by the user's alpha.
        o["effective_beta"] = beta ? Json(*beta * e.alpha) : Json(nullptr);
        o["representable"] = representable;
        edges.push_back(std::move(o));
    }
    j["edges"] = std::move(edges);
    j["total_bic"] = model.fit().total_bic;
    if (delta_bic) j["delta_bic"] = *delta_bic;
    return j;
}

Json fit_summary(const graph::CausalModel& model) {
    Json j;
    j["total_bic"] = model.fit().total_bic;
    Json nodes = Json::object();
    for (const auto& [name, m] : model.node_models()) {
        Json n;
        n["model"] = sem::to_string(m.kind);
        n["parents"] = m.parents;
        n["n"] = m.n;
        n["log_likelihood"] = m.log_likelihood;
        n["n_params"] = m.n_params;
        n["bic"] = m.bic;
        n["converged"] = m.converged;
        n["iterations"] = m.iterations;
        n["fit_quality"] = m.fit_quality;
        nodes[name] = std::move(n);
    }
    j["nodes"] = std::move(nodes);
    return j;
}

Json to_json(const graph::EditRecord& r) {
    Json j;
    j["stage"] = graph::to_string(r.stage);
    j["op"] = graph::to_string(r.op);
    j["source"] = r.source;
    j["target"] = r.target;
    if (r.slider) j["slider"] = *r.slider;
    j["alpha_before"] = r.alpha_before;
    j["alpha_after"] = r.alpha_after;
    return j;
}

namespace {

const Json& field(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
    return *it;
}

std::string string_field(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double number_field(const Json& v, const std::string& key) {
    if (!v.is_number()) throw DataError("field '" + key + "' must be a number");
    return v.get<double>();
}

}  // namespace

graph::EditRecord record_from_json(const Json& j) {
    if (!j.is_object()) throw DataError("edit record must be a JSON object");
    graph::EditRecord r;
    r.stage = graph::parse_stage(string_field(j, "stage"));
    r.op = graph::parse_op(string_field(j, "op"));
    r.source = string_field(j, "source");
    r.target = string_field(j, "target");
    if (auto it = j.find("slider"); it != j.end() && !it->is_null()) r.slider = number_field(*it, "slider");
    if (r.op == graph::EditOp::set_alpha && !r.slider) throw DataError("set_alpha record needs a slider value");
    // Echoed logs carry the alphas; hand-written scripts may omit them.
    if (auto it = j.find("alpha_before"); it != j.end()) r.alpha_before = number_field(*it, "alpha_before");
    if (auto it = j.find("alpha_after"); it != j.end()) r.alpha_after = number_field(*it, "alpha_after");
    return r;
}

Json to_json(const graph::EditLog& log) {
    Json a = Json::array();
    for (const auto& r : log.records()) a.push_back(to_json(r));
    return a;
}

graph::EditLog edit_log_from_json(const Json& j) {
    if (!j.is_array()) throw DataError("edit script must be a JSON array");
    graph::EditLog log;
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            log.append(record_from_json(j[i]));
        } catch (const Error& e) {
            throw DataError("edit " + std::to_string(i) + ": " + e.what());
        }
    }
    return log;
}

namespace {

metrics::Predicate predicate_from_json(const Json& j, const char* which) {
    if (!j.is_array()) throw DataError(std::string("group '") + which + "' must be an array of conditions");
    metrics::Predicate p;
    for (const auto& c : j) {
        if (!c.is_object()) throw DataError("group condition must be an object");
        metrics::Condition cond;
        cond.column = string_field(c, "column");
        if (auto it = c.find("levels"); it != c.end()) {
            if (!it->is_array()) throw DataError("'levels' must be an array");
            for (const auto& l : *it) {
                if (!l.is_string()) throw DataError("levels must be strings");
                cond.levels.push_back(l.get<std::string>());
            }
        }
        if (auto it = c.find("ranges"); it != c.end()) {
            if (!it->is_array()) throw DataError("'ranges' must be an array");
            for (const auto& r : *it) {
                if (!r.is_array() || r.size() != 2) throw DataError("each range must be [low, high]");
                cond.ranges.emplace_back(number_field(r[0], "range"), number_field(r[1], "range"));
            }
        }
        if (cond.levels.empty() && cond.ranges.empty())
            throw DataError("condition on '" + cond.column + "' selects nothing");
        p.conditions.push_back(std::move(cond));
    }
    if (p.conditions.empty()) throw DataError(std::string("group '") + which + "' has no conditions");
    return p;
}

Json predicate_to_json(const metrics::Predicate& p) {
    Json a = Json::array();
    for (const auto& c : p.conditions) {
        Json o;
        o["column"] = c.column;
        if (!c.levels.empty()) o["levels"] = c.levels;
        if (!c.ranges.empty()) {
            Json rs = Json::array();
            for (const auto& [lo, hi] : c.ranges) rs.push_back(Json::array({lo, hi}));
            o["ranges"] = std::move(rs);
        }
        a.push_back(std::move(o));
    }
    return a;
}

}  // namespace

metrics::GroupSpec group_from_json(const Json& j) {
    if (j.is_string()) return metrics::GroupSpec::sensitive(j.get<std::string>());
    if (!j.is_object()) throw DataError("group spec must be a column name or an object");
    if (j.contains("column")) return metrics::GroupSpec::sensitive(string_field(j, "column"));
    return metrics::GroupSpec::custom(predicate_from_json(field(j, "a"), "a"), predicate_from_json(field(j, "b"), "b"));
}

Json to_json(const metrics::GroupSpec& spec) {
    Json j;
    if (spec.column) {
        j["column"] = *spec.column;
    } else {
        j["a"] = predicate_to_json(spec.a);
        j["b"] = predicate_to_json(spec.b);
    }
    return j;
}

learners::ClassifierSpec learner_from_json(const Json& j) {
    learners::ClassifierSpec spec;
    if (j.is_string()) {
        spec.id = learners::parse_learner(j.get<std::string>());
    } else if (j.is_object()) {
        spec.id = learners::parse_learner(string_field(j, "id"));
        if (auto it = j.find("params"); it != j.end()) {
            if (!it->is_object()) throw DataError("'params' must be an object");
            for (auto p = it->begin(); p != it->end(); ++p) spec.params[p.key()] = number_field(p.value(), p.key());
        }
        if (auto it = j.find("seed"); it != j.end()) spec.seed = it->get<std::uint64_t>();
    } else {
        throw DataError("learner must be a name or an object");
    }
    spec.validate();
    return spec;
}

Json to_json(const learners::ClassifierSpec& spec) {
    Json j;
    j["id"] = learners::to_string(spec.id);
    Json params = Json::object();
    for (const auto& [k, v] : spec.params) params[k] = v;
    j["params"] = std::move(params);
    return j;
}

Json to_json(const metrics::Fourfold& f) {
    Json j;
    j["a_favorable"] = f.a_favorable;
    j["a_unfavorable"] = f.a_unfavorable;
    j["b_favorable"] = f.b_favorable;
    j["b_unfavorable"] = f.b_unfavorable;
    return j;
}

Json to_json(const metrics::MetricsReport& r) {
    Json j;
    j["accuracy"] = r.accuracy;
    j["f1"] = r.f1;
    j["parity_diff"] = r.parity_diff;
    j["accuracy_diff"] = r.accuracy_diff;
    j["fnr_diff"] = r.fnr_diff;
    j["fpr_diff"] = r.fpr_diff;
    j["individual_bias"] = r.individual_bias;
    j["distortion"] = r.distortion;
    j["fourfold"] = to_json(r.fourfold);
    j["warnings"] = r.warnings;
    return j;
}

Json to_json(const metrics::Comparison& c) {
    Json j;
    j["groups"] = {{"a", c.group_a}, {"b", c.group_b}};
    j["original"] = to_json(c.original);
    j["debiased"] = to_json(c.debiased);
    return j;
}

Json parse(std::string_view text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(what + " is not valid JSON: " + e.what());
    }
}

Json read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), "'" + path + "'");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

void write_file(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace causalfair::io
