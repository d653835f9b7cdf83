#include "causalfair/graph.hpp"

#include "causalfair/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

namespace causalfair::graph {

std::string_view to_string(Stage s) noexcept { return s == Stage::refine ? "refine" : "debias"; }
std::string_view to_string(EdgeState s) noexcept { return s == EdgeState::directed ? "directed" : "undirected"; }
std::string_view to_string(EdgeOrigin o) noexcept { return o == EdgeOrigin::discovered ? "discovered" : "user_added"; }

std::string_view to_string(EditOp op) noexcept {
    switch (op) {
        case EditOp::add: return "add";
        case EditOp::remove: return "delete";
        case EditOp::reverse: return "reverse";
        case EditOp::direct: return "direct";
        case EditOp::set_alpha: return "set_alpha";
    }
    return "add";
}

Stage parse_stage(std::string_view s) {
    if (s == "refine" || s == "Refine") return Stage::refine;
    if (s == "debias" || s == "Debias") return Stage::debias;
    throw EditError("unknown stage '" + std::string(s) + "'");
}

EditOp parse_op(std::string_view s) {
    if (s == "add") return EditOp::add;
    if (s == "delete" || s == "remove") return EditOp::remove;
    if (s == "reverse") return EditOp::reverse;
    if (s == "direct") return EditOp::direct;
    if (s == "set_alpha") return EditOp::set_alpha;
    throw EditError("unknown edit op '" + std::string(s) + "'");
}

std::set<DirectedPair> EditLog::added_in_debias() const {
    std::set<DirectedPair> out;
    for (const auto& r : records_)
        if (r.stage == Stage::debias && r.op == EditOp::add) out.insert({r.source, r.target});
    return out;
}

std::set<DirectedPair> EditLog::modified_in_debias() const {
    std::set<DirectedPair> out;
    for (const auto& r : records_)
        if (r.stage == Stage::debias && (r.op == EditOp::remove || r.op == EditOp::set_alpha))
            out.insert({r.source, r.target});
    return out;
}

double alpha_from_slider(double slider) {
    if (!std::isfinite(slider) || slider < -100.0 || slider > 100.0)
        throw EditError("slider must lie in [-100, 100], got " + std::to_string(slider));
    return 1.0 + slider / 100.0;
}

// ---------------------------------------------------------------------------

CausalModel::Key CausalModel::key(const std::string& a, const std::string& b) {
    return a < b ? Key{a, b} : Key{b, a};
}

CausalModel::CausalModel(std::shared_ptr<const tabular::Dataset> data, const discovery::Cpdag& cpdag,
                         unsigned threads)
    : data_(std::move(data)), origin_(cpdag), nodes_(cpdag.nodes()), threads_(threads) {
    for (const auto& n : nodes_) data_->index_of(n);
    for (const auto& e : cpdag.edges()) {
        Edge edge{e.a, e.b, e.directed ? EdgeState::directed : EdgeState::undirected, 1.0, EdgeOrigin::discovered};
        edges_.emplace(key(e.a, e.b), edge);
    }
    auto fitted = sem::fit_all(*data_, directed_edges(), threads_);
    models_ = std::move(fitted.models);
    fit_ = std::move(fitted.score);
    baselines_ = sem::baseline_bics(*data_, threads_);
}

std::vector<Edge> CausalModel::edges() const {
    std::vector<Edge> out;
    for (const auto& [k, e] : edges_) out.push_back(e);
    std::sort(out.begin(), out.end(),
              [](const Edge& l, const Edge& r) { return std::tie(l.source, l.target) < std::tie(r.source, r.target); });
    return out;
}

const Edge* CausalModel::find_edge(const std::string& a, const std::string& b) const {
    auto it = edges_.find(key(a, b));
    return it == edges_.end() ? nullptr : &it->second;
}

std::vector<std::string> CausalModel::parents(const std::string& node) const {
    std::vector<std::string> out;
    for (const auto& [k, e] : edges_)
        if (e.state == EdgeState::directed && e.target == node) out.push_back(e.source);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> CausalModel::children(const std::string& node) const {
    std::vector<std::string> out;
    for (const auto& [k, e] : edges_)
        if (e.state == EdgeState::directed && e.source == node) out.push_back(e.target);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<DirectedPair> CausalModel::directed_edges() const {
    std::vector<DirectedPair> out;
    for (const auto& [k, e] : edges_)
        if (e.state == EdgeState::directed) out.emplace_back(e.source, e.target);
    std::sort(out.begin(), out.end());
    return out;
}

void CausalModel::require_node(const std::string& name) const {
    if (std::find(nodes_.begin(), nodes_.end(), name) == nodes_.end())
        throw EditError("unknown node '" + name + "'");
}

std::optional<std::vector<std::string>> CausalModel::directed_path(const std::string& from, const std::string& to,
                                                                   const std::set<Key>& ignore) const {
    std::map<std::string, std::string> prev;
    std::queue<std::string> q;
    q.push(from);
    prev[from] = from;
    while (!q.empty()) {
        const std::string u = q.front();
        q.pop();
        if (u == to) {
            std::vector<std::string> path{to};
            for (std::string v = to; v != from;) {
                v = prev[v];
                path.push_back(v);
            }
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (const auto& c : children(u)) {
            if (ignore.count(key(u, c)) || prev.count(c)) continue;
            prev[c] = u;
            q.push(c);
        }
    }
    return std::nullopt;
}

void CausalModel::check_acyclic_with(const std::string& from, const std::string& to, const std::set<Key>& ignore) const {
    if (auto path = directed_path(to, from, ignore)) {
        std::vector<std::string> cycle{from};
        cycle.insert(cycle.end(), path->begin(), path->end());
        std::string text;
        for (std::size_t i = 0; i < cycle.size(); ++i) text += (i ? " -> " : "") + cycle[i];
        throw EditError("edge " + from + " -> " + to + " would create the cycle " + text, std::move(cycle));
    }
}

void CausalModel::refit(const std::set<std::string>& targets) {
    for (const auto& t : targets) {
        auto ps = parents(t);
        if (ps.empty())
            models_.erase(t);
        else
            models_.insert_or_assign(t, sem::fit_node(*data_, t, ps));
    }
    fit_ = sem::score_of(models_, baselines_);
}

double CausalModel::apply_refine(EditOp op, const std::string& source, const std::string& target) {
    if (stage_ != Stage::refine) throw StageError("refine edits are only allowed in the refine stage");
    require_node(source);
    require_node(target);
    if (source == target) throw EditError("self-loops are not allowed");
    const Key k = key(source, target);
    auto it = edges_.find(k);
    const sem::FitScore before = fit_;
    std::set<std::string> touched;
    EditRecord rec{Stage::refine, op, source, target, 1.0, 1.0, std::nullopt};

    switch (op) {
        case EditOp::add:
            if (it != edges_.end()) throw EditError("an edge between " + source + " and " + target + " already exists");
            check_acyclic_with(source, target);
            edges_.emplace(k, Edge{source, target, EdgeState::directed, 1.0, EdgeOrigin::user_added});
            touched.insert(target);
            rec.alpha_before = 0.0;
            break;
        case EditOp::remove:
            if (it == edges_.end()) throw EditError("no edge between " + source + " and " + target);
            if (it->second.state == EdgeState::directed) {
                touched.insert(it->second.target);
                rec.source = it->second.source;
                rec.target = it->second.target;
            }
            edges_.erase(it);
            rec.alpha_after = 0.0;
            break;
        case EditOp::reverse: {
            if (it == edges_.end() || it->second.state != EdgeState::directed || it->second.source != source)
                throw EditError("no directed edge " + source + " -> " + target + " to reverse");
            check_acyclic_with(target, source, {k});
            it->second.source = target;
            it->second.target = source;
            touched = {source, target};
            break;
        }
        case EditOp::direct:
            if (it == edges_.end() || it->second.state != EdgeState::undirected)
                throw EditError("no undirected edge between " + source + " and " + target + " to direct");
            check_acyclic_with(source, target);
            it->second.source = source;
            it->second.target = target;
            it->second.state = EdgeState::directed;
            touched.insert(target);
            break;
        case EditOp::set_alpha:
            throw StageError("edge strength can only be changed in the debias stage");
    }
    refit(touched);
    log_.append(rec);
    return sem::delta_bic(before, fit_);
}

void CausalModel::apply_debias(EditOp op, const std::string& source, const std::string& target,
                               std::optional<double> slider) {
    if (stage_ != Stage::debias) throw StageError("debias edits are only allowed in the debias stage");
    require_node(source);
    require_node(target);
    if (source == target) throw EditError("self-loops are not allowed");
    const Key k = key(source, target);
    auto it = edges_.find(k);
    auto require_directed = [&] {
        if (it == edges_.end()) throw EditError("no edge between " + source + " and " + target);
        if (it->second.state != EdgeState::directed)
            throw EditError("edge " + source + " - " + target + " is undirected; direct it in the refine stage first");
        if (it->second.source != source) throw EditError("no directed edge " + source + " -> " + target);
    };

    if (op == EditOp::set_alpha) {
        if (!slider) throw EditError("set_alpha needs a slider value");
        const double alpha = alpha_from_slider(*slider);
        require_directed();
        if (alpha == 0.0) {
            op = EditOp::remove;
        } else {
            const double before = it->second.alpha;
            it->second.alpha = alpha;
            log_.append({Stage::debias, EditOp::set_alpha, source, target, before, alpha, slider});
            return;
        }
    }
    switch (op) {
        case EditOp::remove: {
            require_directed();
            const double before = it->second.alpha;
            edges_.erase(it);
            log_.append({Stage::debias, EditOp::remove, source, target, before, 0.0, std::nullopt});
            return;
        }
        case EditOp::add:
            if (it != edges_.end()) throw EditError("an edge between " + source + " and " + target + " already exists");
            check_acyclic_with(source, target);
            edges_.emplace(k, Edge{source, target, EdgeState::directed, 1.0, EdgeOrigin::user_added});
            refit({target});
            log_.append({Stage::debias, EditOp::add, source, target, 0.0, 1.0, std::nullopt});
            return;
        default:
            throw StageError(std::string("'") + std::string(to_string(op)) + "' is a refine-stage edit");
    }
}

double CausalModel::apply(const EditRecord& record) {
    if (record.stage == Stage::refine) return apply_refine(record.op, record.source, record.target);
    if (stage_ == Stage::refine) enter_debias();
    apply_debias(record.op, record.source, record.target, record.slider);
    return 0.0;
}

void CausalModel::enter_debias() {
    if (stage_ == Stage::debias) return;
    refined_ = Snapshot{edges_, models_, fit_, log_.size()};
    stage_ = Stage::debias;
}

void CausalModel::reset_to_refined() {
    if (!refined_) throw StageError("no refined snapshot to restore");
    edges_ = refined_->edges;
    models_ = refined_->models;
    fit_ = refined_->fit;
    log_.truncate(refined_->log_size);
    // Stays in the debias stage; the snapshot is kept for further resets.
}

std::vector<std::vector<std::string>> CausalModel::find_paths(const std::string& source,
                                                             const std::string& target) const {
    require_node(source);
    require_node(target);
    if (source == target) throw EditError("source and target of a path must differ");
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> path{source};
    std::set<std::string> on_path{source};
    std::function<void(const std::string&)> dfs = [&](const std::string& u) {
        for (const auto& c : children(u)) {
            if (on_path.count(c)) continue;
            path.push_back(c);
            if (c == target) {
                out.push_back(path);
            } else {
                on_path.insert(c);
                dfs(c);
                on_path.erase(c);
            }
            path.pop_back();
        }
    };
    dfs(source);
    return out;
}

std::set<std::string> CausalModel::descendants(const std::string& node) const {
    std::set<std::string> out;
    std::vector<std::string> stack{node};
    while (!stack.empty()) {
        const std::string u = stack.back();
        stack.pop_back();
        for (const auto& c : children(u))
            if (out.insert(c).second) stack.push_back(c);
    }
    return out;
}

std::set<std::string> CausalModel::debias_footprint() const {
    std::set<std::string> out;
    if (stage_ != Stage::debias) return out;
    auto heads = log_.added_in_debias();
    auto modified = log_.modified_in_debias();
    heads.insert(modified.begin(), modified.end());
    for (const auto& [s, t] : heads) {
        out.insert(t);
        auto d = descendants(t);
        out.insert(d.begin(), d.end());
    }
    return out;
}

std::vector<std::string> CausalModel::topological_order() const {
    std::map<std::string, int> indeg;
    for (const auto& n : nodes_) indeg[n] = 0;
    for (const auto& [s, t] : directed_edges()) ++indeg[t];
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [n, d] : indeg)
        if (d == 0) ready.push(n);
    std::vector<std::string> order;
    while (!ready.empty()) {
        std::string u = ready.top();
        ready.pop();
        for (const auto& c : children(u))
            if (--indeg[c] == 0) ready.push(c);
        order.push_back(std::move(u));
    }
    if (order.size() != nodes_.size()) throw EditError("directed graph contains a cycle");
    return order;
}

std::map<std::string, double> CausalModel::parent_alphas(const std::string& node) const {
    std::map<std::string, double> out;
    auto it = models_.find(node);
    if (it == models_.end()) return out;
    for (const auto& p : it->second.parents) {
        const Edge* e = find_edge(p, node);
        out[p] = (e && e->state == EdgeState::directed && e->source == p) ? e->alpha : 0.0;
    }
    return out;
}

sem::EdgeWeight CausalModel::weight(const std::string& source, const std::string& target) const {
    auto it = models_.find(target);
    if (it == models_.end()) throw EditError("'" + target + "' has no fitted model");
    return sem::edge_weight(it->second, source, *data_);
}

CausalModel CausalModel::replay(std::shared_ptr<const tabular::Dataset> data, const discovery::Cpdag& cpdag,
                                const EditLog& log, unsigned threads) {
    CausalModel m(std::move(data), cpdag, threads);
    const auto& recs = log.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        try {
            m.apply(recs[i]);
        } catch (const EditError& e) {
            throw EditError("edit " + std::to_string(i) + ": " + e.what(), e.cycle());
        } catch (const StageError& e) {
            throw EditError("edit " + std::to_string(i) + ": " + e.what());
        }
    }
    return m;
}

bool CausalModel::same_structure(const CausalModel& other) const {
    return stage_ == other.stage_ && edges_ == other.edges_ && nodes_ == other.nodes_;
}

}  // namespace causalfair::graph
