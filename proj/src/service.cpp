#include "causalfair/service.hpp"

#include "causalfair/json_io.hpp"
#include "causalfair/metrics.hpp"
#include "causalfair/pipeline.hpp"
#include "causalfair/rng.hpp"

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <mutex>
#include <random>
#include <sstream>
#include <vector>

namespace causalfair::service {

using io::Json;

enum class Phase { empty, loaded, discovered, refine, debias };

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::empty: return "empty";
        case Phase::loaded: return "loaded";
        case Phase::discovered: return "discovered";
        case Phase::refine: return "refine";
        case Phase::debias: return "debias";
    }
    return "empty";
}

struct Session {
    std::mutex mu;
    std::string id;
    Phase phase = Phase::empty;
    std::int64_t revision = 0;

    std::shared_ptr<const tabular::Dataset> data;
    std::size_t dropped_rows = 0;

    discovery::DiscoveryConfig discovery;
    std::uint64_t seed = 0;
    learners::ClassifierSpec learner;
    std::optional<metrics::GroupSpec> groups;
    std::optional<std::string> label;
    std::optional<std::string> favorable;
    std::size_t k = 5;
    int splits = 3;

    std::optional<discovery::Cpdag> cpdag;
    std::shared_ptr<graph::CausalModel> model;

    std::optional<tabular::Dataset> debiased;
    std::uint64_t debiased_seed = 0;
    std::vector<std::string> debias_warnings;
    std::optional<metrics::Comparison> report;

    void invalidate_outputs() {
        debiased.reset();
        debias_warnings.clear();
        report.reset();
    }
};

namespace {

struct HttpError {
    int status;
    std::string message;
};

Response json_response(int status, const Json& j) { return {status, "application/json", j.dump() + "\n"}; }

Response error_response(int status, const std::string& message) {
    Json j;
    j["error"] = message;
    j["status"] = status;
    return json_response(status, j);
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        std::size_t j = i;
        while (j < path.size() && path[j] != '/') ++j;
        if (j > i) parts.emplace_back(path.substr(i, j - i));
        i = j;
    }
    return parts;
}

std::string percent_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out += ' ';
        } else if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
                   std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

Json parse_body(std::string_view body) {
    if (body.empty()) return Json::object();
    try {
        Json j = Json::parse(body);
        if (!j.is_object()) throw HttpError{400, "request body must be a JSON object"};
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw HttpError{400, std::string("request body is not valid JSON: ") + e.what()};
    }
}

std::string require_string(const Json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string()) throw HttpError{400, std::string("field '") + key + "' must be a string"};
    return it->get<std::string>();
}

const std::string& require_param(const std::map<std::string, std::string>& params, const char* key) {
    auto it = params.find(key);
    if (it == params.end()) throw HttpError{400, std::string("query parameter '") + key + "' is required"};
    return it->second;
}

/// Revision check for mutating calls; accepted only when strictly larger.
void check_revision(Session& s, const Json& body) {
    auto it = body.find("revision");
    if (it == body.end() || !it->is_number_integer())
        throw HttpError{400, "mutating requests need an integer 'revision'"};
    const auto rev = it->get<std::int64_t>();
    if (rev <= s.revision)
        throw HttpError{409, "stale revision " + std::to_string(rev) + "; last accepted is " + std::to_string(s.revision)};
}

void accept_revision(Session& s, const Json& body) { s.revision = body.at("revision").get<std::int64_t>(); }

graph::CausalModel& require_model(Session& s) {
    if (!s.model) throw HttpError{422, "discover the causal model first"};
    return *s.model;
}

Json status_json(const Session& s) {
    Json j;
    j["id"] = s.id;
    j["stage"] = phase_name(s.phase);
    j["revision"] = s.revision;
    if (s.data) {
        j["rows"] = s.data->rows();
        j["columns"] = s.data->column_names();
        j["dropped_rows"] = s.dropped_rows;
        if (s.data->label()) j["label"] = *s.data->label();
    }
    Json cfg;
    cfg["p_value"] = s.discovery.alpha;
    cfg["max_cond_size"] = s.discovery.max_cond_size ? Json(*s.discovery.max_cond_size) : Json(nullptr);
    cfg["seed"] = s.seed;
    cfg["learner"] = io::to_json(s.learner);
    cfg["group"] = s.groups ? io::to_json(*s.groups) : Json(nullptr);
    cfg["label"] = s.label ? Json(*s.label) : Json(nullptr);
    cfg["favorable"] = s.favorable ? Json(*s.favorable) : Json(nullptr);
    cfg["k"] = s.k;
    cfg["splits"] = s.splits;
    j["config"] = std::move(cfg);
    return j;
}

/// The graph payload shared by every mutating response and GET /graph.
Json graph_payload(const Session& s, std::optional<double> delta_bic = std::nullopt) {
    Json j;
    j["id"] = s.id;
    j["stage"] = phase_name(s.phase);
    j["revision"] = s.revision;
    j["graph"] = s.model ? io::graph_summary(*s.model, delta_bic) : Json(nullptr);
    return j;
}

void snapshot(const ServiceConfig& cfg, const Session& s) {
    if (!cfg.snapshot_dir) return;
    std::filesystem::create_directories(*cfg.snapshot_dir);
    Json j = status_json(s);
    j["edits"] = s.model ? io::to_json(s.model->log()) : Json::array();
    io::write_file((std::filesystem::path(*cfg.snapshot_dir) / (s.id + ".json")).string(), j);
}

const tabular::Dataset& simulate(Session& s, unsigned threads) {
    auto& model = require_model(s);
    if (s.debiased && s.debiased_seed == s.seed) return *s.debiased;
    simulate::SimulationConfig sc;
    sc.seed = s.seed;
    sc.threads = threads;
    auto res = simulate::generate_debiased(*s.data, model, sc);
    s.debiased = std::move(res.data);
    s.debiased_seed = s.seed;
    s.debias_warnings = std::move(res.warnings);
    s.report.reset();
    return *s.debiased;
}

Json distribution_json(const tabular::Dataset& d, std::size_t col, const std::vector<double>& edges) {
    const auto& spec = d.spec(col);
    const auto values = d.column(col);
    Json out;
    if (spec.nominal()) {
        std::vector<std::size_t> counts(spec.levels.size(), 0);
        for (double v : values) ++counts[static_cast<std::size_t>(v)];
        Json c = Json::object();
        for (std::size_t l = 0; l < counts.size(); ++l) c[spec.levels[l]] = counts[l];
        out["counts"] = std::move(c);
    } else {
        std::vector<std::size_t> counts(edges.size() - 1, 0);
        for (double v : values) {
            std::size_t b = 0;
            while (b + 2 < edges.size() && v >= edges[b + 1]) ++b;
            ++counts[b];
        }
        out["bin_edges"] = edges;
        out["counts"] = counts;
    }
    return out;
}

std::vector<double> bin_edges(const tabular::Dataset& original, std::size_t col, int bins = 10) {
    const auto v = original.column(col);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<double> e;
    const double width = (*hi - *lo) / bins;
    for (int b = 0; b <= bins; ++b) e.push_back(width > 0 ? *lo + width * b : *lo + b);
    return e;
}

/// Joint counts of target levels (or bins) per source level (or bin).
Json joint_json(const tabular::Dataset& d, std::size_t s, std::size_t t, const std::vector<double>& se,
                const std::vector<double>& te) {
    auto cell = [&](std::size_t col, double v, const std::vector<double>& edges) -> std::size_t {
        if (d.spec(col).nominal()) return static_cast<std::size_t>(v);
        std::size_t b = 0;
        while (b + 2 < edges.size() && v >= edges[b + 1]) ++b;
        return b;
    };
    auto labels = [&](std::size_t col, const std::vector<double>& edges) {
        std::vector<std::string> out;
        if (d.spec(col).nominal()) return d.spec(col).levels;
        for (std::size_t b = 0; b + 1 < edges.size(); ++b)
            out.push_back(tabular::format_number(edges[b]) + ".." + tabular::format_number(edges[b + 1]));
        return out;
    };
    const auto sl = labels(s, se), tl = labels(t, te);
    std::vector<std::vector<std::size_t>> counts(sl.size(), std::vector<std::size_t>(tl.size(), 0));
    for (std::size_t i = 0; i < d.rows(); ++i) ++counts[cell(s, d.at(i, s), se)][cell(t, d.at(i, t), te)];
    Json j;
    j["source_levels"] = sl;
    j["target_levels"] = tl;
    j["counts"] = counts;
    return j;
}

metrics::Outcome outcome_of(const Session& s) { return metrics::Outcome::of(*s.data, s.label, s.favorable); }

}  // namespace

SessionService::SessionService(ServiceConfig cfg) : cfg_(std::move(cfg)) {}
SessionService::~SessionService() = default;

std::size_t SessionService::session_count() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
}

std::shared_ptr<Session> SessionService::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

Response SessionService::handle(std::string_view method, std::string_view target, std::string_view body) {
    std::map<std::string, std::string> params;
    std::string_view path = target;
    if (auto q = target.find('?'); q != std::string_view::npos) {
        path = target.substr(0, q);
        std::string_view query = target.substr(q + 1);
        while (!query.empty()) {
            const auto amp = query.find('&');
            const std::string_view pair = query.substr(0, amp);
            const auto eq = pair.find('=');
            if (eq == std::string_view::npos) params[percent_decode(pair)] = "";
            else params[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
            if (amp == std::string_view::npos) break;
            query = query.substr(amp + 1);
        }
    }
    return handle(method, path, params, body);
}

Response SessionService::handle(std::string_view method, std::string_view path,
                                const std::map<std::string, std::string>& params, std::string_view body) {
    const auto parts = split_path(path);
    try {
        if (parts.empty() || parts[0] != "sessions") throw HttpError{404, "no such endpoint"};

        if (parts.size() == 1) {
            if (method == "GET") {
                std::shared_lock lock(mu_);
                Json ids = Json::array();
                for (const auto& [id, s] : sessions_) ids.push_back(id);
                return json_response(200, Json{{"sessions", ids}});
            }
            if (method != "POST") throw HttpError{405, "use POST to create a session"};
            auto s = std::make_shared<Session>();
            {
                std::unique_lock lock(mu_);
                std::random_device rd;
                const std::uint64_t token = rng::splitmix64((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ ++counter_);
                std::ostringstream id;
                id << std::hex << token;
                s->id = id.str();
                sessions_.emplace(s->id, s);
            }
            s->discovery.threads = cfg_.threads;
            return json_response(201, status_json(*s));
        }

        const std::string& id = parts[1];
        auto session = find(id);
        if (!session) throw HttpError{404, "unknown session '" + id + "'"};
        std::unique_lock lock(session->mu);
        Session& s = *session;
        const std::string action = parts.size() > 2 ? parts[2] : "";
        if (parts.size() > 3) throw HttpError{404, "no such endpoint"};

        auto mutate = [&](auto&& body_fn) -> Response {
            if (method != "POST" && method != "PUT") throw HttpError{405, "use POST for '" + action + "'"};
            const Json req = parse_body(body);
            check_revision(s, req);
            Json out = body_fn(req);
            accept_revision(s, req);
            out["revision"] = s.revision;
            snapshot(cfg_, s);
            return json_response(200, out);
        };

        if (action.empty()) {
            if (method == "GET") return json_response(200, status_json(s));
            if (method == "DELETE") {
                lock.unlock();
                std::unique_lock all(mu_);
                sessions_.erase(id);
                return json_response(200, Json{{"deleted", id}});
            }
            throw HttpError{405, "use GET or DELETE on a session"};
        }

        if (action == "dataset") {
            return mutate([&](const Json& req) {
                const std::string csv = require_string(req, "csv");
                std::optional<tabular::SchemaHint> hint;
                if (auto it = req.find("schema"); it != req.end() && !it->is_null())
                    hint = tabular::parse_schema(it->dump());
                const std::string name = req.contains("name") ? require_string(req, "name") : std::string("dataset");
                auto loaded = pipeline::load_text(csv, name, hint);
                if (loaded.data.rows() > cfg_.max_rows || loaded.data.cols() > cfg_.max_cols)
                    throw HttpError{422, "dataset has " + std::to_string(loaded.data.rows()) + " rows and " +
                                             std::to_string(loaded.data.cols()) + " columns; the limit is " +
                                             std::to_string(cfg_.max_rows) + " rows and " +
                                             std::to_string(cfg_.max_cols) + " columns"};
                s.data = std::make_shared<const tabular::Dataset>(std::move(loaded.data));
                s.dropped_rows = loaded.dropped_rows;
                s.cpdag.reset();
                s.model.reset();
                s.invalidate_outputs();
                s.phase = Phase::loaded;
                return status_json(s);
            });
        }

        if (action == "config") {
            return mutate([&](const Json& req) {
                // Parse everything before touching the session so a bad field changes nothing.
                auto disc = s.discovery;
                auto seed = s.seed;
                auto learner = s.learner;
                auto groups = s.groups;
                auto label = s.label;
                auto favorable = s.favorable;
                auto k = s.k;
                auto splits = s.splits;
                if (auto it = req.find("p_value"); it != req.end()) disc.alpha = it->get<double>();
                if (auto it = req.find("max_cond_size"); it != req.end())
                    disc.max_cond_size = it->is_null() ? std::nullopt : std::optional<std::size_t>(it->get<std::size_t>());
                if (auto it = req.find("seed"); it != req.end()) seed = it->get<std::uint64_t>();
                if (auto it = req.find("learner"); it != req.end()) learner = io::learner_from_json(*it);
                if (auto it = req.find("group"); it != req.end())
                    groups = it->is_null() ? std::nullopt : std::optional(io::group_from_json(*it));
                if (auto it = req.find("label"); it != req.end()) label = it->get<std::string>();
                if (auto it = req.find("favorable"); it != req.end()) favorable = it->get<std::string>();
                if (auto it = req.find("k"); it != req.end()) k = it->get<std::size_t>();
                if (auto it = req.find("splits"); it != req.end()) splits = it->get<int>();
                disc.validate();
                if (k < 1) throw HttpError{422, "k must be at least 1"};
                if (splits < 1) throw HttpError{422, "splits must be at least 1"};
                if (groups && s.data) metrics::resolve(*s.data, *groups);
                if ((label || favorable) && s.data) metrics::Outcome::of(*s.data, label, favorable);
                if (seed != s.seed) s.debiased.reset();
                s.discovery = disc;
                s.seed = seed;
                s.learner = learner;
                s.groups = groups;
                s.label = label;
                s.favorable = favorable;
                s.k = k;
                s.splits = splits;
                s.report.reset();
                return status_json(s);
            });
        }

        if (action == "discover") {
            return mutate([&](const Json&) {
                if (!s.data) throw HttpError{422, "upload a dataset first"};
                auto d = pipeline::discover(s.data, s.discovery);
                s.cpdag = d.cpdag;
                s.model = d.model;
                s.invalidate_outputs();
                s.phase = Phase::discovered;
                Json out = graph_payload(s);
                out["warnings"] = d.warnings;
                return out;
            });
        }

        if (action == "refine") {
            return mutate([&](const Json& req) {
                auto& model = require_model(s);
                const auto op = graph::parse_op(require_string(req, "op"));
                const double delta = model.apply_refine(op, require_string(req, "source"), require_string(req, "target"));
                s.phase = Phase::refine;
                s.invalidate_outputs();
                return graph_payload(s, delta);
            });
        }

        if (action == "stage") {
            return mutate([&](const Json& req) {
                auto& model = require_model(s);
                const auto stage = graph::parse_stage(require_string(req, "stage"));
                if (stage == graph::Stage::refine && model.stage() == graph::Stage::debias)
                    throw HttpError{422, "the debias stage cannot be left; use reset to restore the refined model"};
                if (stage == graph::Stage::debias) model.enter_debias();
                s.phase = model.stage() == graph::Stage::debias ? Phase::debias : s.phase;
                return graph_payload(s);
            });
        }

        if (action == "reset") {
            return mutate([&](const Json&) {
                auto& model = require_model(s);
                model.reset_to_refined();
                s.invalidate_outputs();
                return graph_payload(s);
            });
        }

        if (action == "debias") {
            return mutate([&](const Json& req) {
                auto& model = require_model(s);
                if (model.stage() != graph::Stage::debias) throw HttpError{422, "switch to the debias stage first"};
                const auto op = graph::parse_op(require_string(req, "op"));
                std::optional<double> slider;
                if (auto it = req.find("slider"); it != req.end() && !it->is_null()) slider = it->get<double>();
                model.apply_debias(op, require_string(req, "source"), require_string(req, "target"), slider);
                s.invalidate_outputs();
                Json out = graph_payload(s);
                out["record"] = io::to_json(model.log().records().back());
                return out;
            });
        }

        if (action == "simulate") {
            return mutate([&](const Json& req) {
                if (auto it = req.find("seed"); it != req.end()) s.seed = it->get<std::uint64_t>();
                const auto& d = simulate(s, cfg_.threads);
                Json out = graph_payload(s);
                out["seed"] = s.seed;
                out["rows"] = d.rows();
                out["simulated"] = s.model->debias_footprint();
                out["warnings"] = s.debias_warnings;
                return out;
            });
        }

        if (action == "evaluate") {
            return mutate([&](const Json&) {
                require_model(s);
                if (!s.groups) throw HttpError{422, "configure the groups to compare first"};
                const auto& deb = simulate(s, cfg_.threads);
                metrics::EvalConfig ec;
                ec.learner = s.learner;
                ec.seed = s.seed;
                ec.k = s.k;
                ec.splits = s.splits;
                ec.threads = cfg_.threads;
                s.report = metrics::compare(*s.data, deb, *s.groups, outcome_of(s), ec);
                Json out = graph_payload(s);
                out["report"] = io::to_json(*s.report);
                return out;
            });
        }

        if (method != "GET") throw HttpError{405, "use GET for '" + action + "'"};

        if (action == "graph") return json_response(200, graph_payload(s));

        if (action == "edits") {
            auto& model = require_model(s);
            return json_response(200, io::to_json(model.log()));
        }

        if (action == "paths") {
            auto& model = require_model(s);
            const auto paths = model.find_paths(require_param(params, "source"), require_param(params, "target"));
            return json_response(200, Json{{"paths", paths}});
        }

        if (action == "logs") {
            auto& model = require_model(s);
            std::set<std::pair<std::string, std::string>> before, after;
            for (const auto& e : model.origin().edges()) before.emplace(std::min(e.a, e.b), std::max(e.a, e.b));
            for (const auto& e : model.edges()) after.emplace(std::min(e.source, e.target), std::max(e.source, e.target));
            Json added = Json::array(), deleted = Json::array();
            for (const auto& e : model.edges())
                if (!before.count({std::min(e.source, e.target), std::max(e.source, e.target)}))
                    added.push_back(Json{{"source", e.source}, {"target", e.target}});
            for (const auto& e : model.origin().edges())
                if (!after.count({std::min(e.a, e.b), std::max(e.a, e.b)}))
                    deleted.push_back(Json{{"source", e.a}, {"target", e.b}, {"directed", e.directed}});
            Json out;
            out["records"] = io::to_json(model.log());
            out["added"] = std::move(added);
            out["deleted"] = std::move(deleted);
            out["impacted"] = model.debias_footprint();
            return json_response(200, out);
        }

        if (action == "comparison") {
            if (!s.data) throw HttpError{422, "upload a dataset first"};
            const tabular::Dataset& orig = *s.data;
            const tabular::Dataset* deb = s.debiased ? &*s.debiased : nullptr;
            Json out;
            if (auto it = params.find("node"); it != params.end()) {
                const std::size_t j = orig.index_of(it->second);
                const auto edges = orig.spec(j).nominal() ? std::vector<double>{} : bin_edges(orig, j);
                out["node"] = it->second;
                out["original"] = distribution_json(orig, j, edges);
                out["debiased"] = deb ? distribution_json(*deb, j, edges) : Json(nullptr);
            } else if (params.count("source") || params.count("target")) {
                const std::size_t a = orig.index_of(require_param(params, "source"));
                const std::size_t b = orig.index_of(require_param(params, "target"));
                const auto ea = orig.spec(a).nominal() ? std::vector<double>{} : bin_edges(orig, a);
                const auto eb = orig.spec(b).nominal() ? std::vector<double>{} : bin_edges(orig, b);
                out["source"] = orig.spec(a).name;
                out["target"] = orig.spec(b).name;
                out["original"] = joint_json(orig, a, b, ea, eb);
                out["debiased"] = deb ? joint_json(*deb, a, b, ea, eb) : Json(nullptr);
            } else {
                if (!s.groups) throw HttpError{422, "configure the groups to compare first"};
                const auto groups = metrics::resolve(orig, *s.groups);
                const auto outcome = outcome_of(s);
                out["groups"] = {{"a", groups.name_a}, {"b", groups.name_b}};
                out["original"] = io::to_json(metrics::fourfold(orig, groups, outcome));
                out["debiased"] = deb ? io::to_json(metrics::fourfold(*deb, groups, outcome)) : Json(nullptr);
            }
            return json_response(200, out);
        }

        if (action == "debiased.csv") {
            const auto& d = simulate(s, cfg_.threads);
            return {200, "text/csv", tabular::to_csv(d)};
        }

        throw HttpError{404, "no such endpoint"};
    } catch (const HttpError& e) {
        return error_response(e.status, e.message);
    } catch (const Error& e) {
        return error_response(422, e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, std::string("malformed field: ") + e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

void serve(SessionService& service, const std::string& host, int port) {
    httplib::Server server;
    auto route = [&service](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params[k] = v;
        const Response r = service.handle(req.method, req.path, params, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.Get(".*", route);
    server.Post(".*", route);
    server.Put(".*", route);
    server.Delete(".*", route);
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace causalfair::service
