#include "causalfair/discovery.hpp"

#include "causalfair/error.hpp"
#include "causalfair/glm.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace causalfair::discovery {

using tabular::Dataset;

void DiscoveryConfig::validate() const {
    if (!(alpha > 0 && alpha < 1)) throw DataError("p-value threshold must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// Cpdag

Cpdag::Cpdag(std::vector<std::string> nodes)
    : nodes_(std::move(nodes)),
      adj_(nodes_.size(), std::vector<bool>(nodes_.size(), false)),
      arrow_(nodes_.size(), std::vector<bool>(nodes_.size(), false)) {}

Cpdag Cpdag::complete(std::vector<std::string> nodes) {
    Cpdag g(std::move(nodes));
    for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = a + 1; b < g.size(); ++b) g.add_undirected(a, b);
    return g;
}

std::size_t Cpdag::index_of(const std::string& name) const {
    auto it = std::find(nodes_.begin(), nodes_.end(), name);
    if (it == nodes_.end()) throw DataError("unknown node '" + name + "'");
    return static_cast<std::size_t>(it - nodes_.begin());
}

void Cpdag::add_undirected(std::size_t a, std::size_t b) {
    if (a == b) throw EditError("self-loops are not allowed");
    adj_[a][b] = adj_[b][a] = true;
    arrow_[a][b] = arrow_[b][a] = false;
}

void Cpdag::remove(std::size_t a, std::size_t b) {
    adj_[a][b] = adj_[b][a] = false;
    arrow_[a][b] = arrow_[b][a] = false;
}

void Cpdag::orient(std::size_t from, std::size_t to) {
    arrow_[from][to] = true;
    arrow_[to][from] = false;
}

void Cpdag::unorient(std::size_t a, std::size_t b) { arrow_[a][b] = arrow_[b][a] = false; }

std::vector<std::size_t> Cpdag::neighbors(std::size_t a) const {
    std::vector<std::size_t> out;
    for (std::size_t b = 0; b < size(); ++b)
        if (adj_[a][b]) out.push_back(b);
    return out;
}

std::size_t Cpdag::edge_count() const {
    std::size_t c = 0;
    for (std::size_t a = 0; a < size(); ++a)
        for (std::size_t b = a + 1; b < size(); ++b) c += adj_[a][b];
    return c;
}

bool Cpdag::reachable(std::size_t from, std::size_t to) const {
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        if (u == to) return true;
        for (std::size_t v = 0; v < size(); ++v)
            if (arrow_[u][v] && !seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
    }
    return false;
}

bool Cpdag::acyclic() const {
    std::vector<std::size_t> indeg(size(), 0);
    for (std::size_t a = 0; a < size(); ++a)
        for (std::size_t b = 0; b < size(); ++b) indeg[b] += arrow_[a][b];
    std::deque<std::size_t> q;
    for (std::size_t a = 0; a < size(); ++a)
        if (!indeg[a]) q.push_back(a);
    std::size_t seen = 0;
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop_front();
        ++seen;
        for (std::size_t v = 0; v < size(); ++v)
            if (arrow_[u][v] && --indeg[v] == 0) q.push_back(v);
    }
    return seen == size();
}

void Cpdag::set_sepset(std::size_t a, std::size_t b, std::vector<std::size_t> z) {
    sepsets_[{std::min(a, b), std::max(a, b)}] = std::move(z);
}

const std::vector<std::size_t>* Cpdag::sepset(std::size_t a, std::size_t b) const {
    auto it = sepsets_.find({std::min(a, b), std::max(a, b)});
    return it == sepsets_.end() ? nullptr : &it->second;
}

std::vector<Cpdag::Edge> Cpdag::edges() const {
    std::vector<Edge> out;
    for (std::size_t a = 0; a < size(); ++a)
        for (std::size_t b = a + 1; b < size(); ++b) {
            if (!adj_[a][b]) continue;
            if (arrow_[a][b])
                out.push_back({nodes_[a], nodes_[b], true});
            else if (arrow_[b][a])
                out.push_back({nodes_[b], nodes_[a], true});
            else
                out.push_back({std::min(nodes_[a], nodes_[b]), std::max(nodes_[a], nodes_[b]), false});
        }
    std::sort(out.begin(), out.end(), [](const Edge& l, const Edge& r) {
        return std::tie(l.a, l.b) < std::tie(r.a, r.b);
    });
    return out;
}

// ---------------------------------------------------------------------------
// CI test

namespace {

constexpr double kCiRidge = 1e-6;
constexpr int kCiMaxIter = 100;

double chi2_upper(double stat, double df) {
    if (df <= 0) return 1.0;
    if (!std::isfinite(stat)) return 0.0;
    if (stat <= 0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

/// p-value of "adding y to the model of x given z improves the fit".
double directional_p(const Dataset& data, std::size_t x, const Eigen::MatrixXd& zx, const Eigen::MatrixXd& yx) {
    const std::size_t n = data.rows();
    const auto col = data.column(x);
    const Eigen::MatrixXd full = hcat(zx, yx);
    if (!data.spec(x).nominal()) {
        const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(n));
        const double tiny = std::numeric_limits<double>::min();
        const double rss0 = std::max(glm::fit_ols(zx, target).rss, tiny);
        const double rss1 = std::max(glm::fit_ols(full, target).rss, tiny);
        const double stat = static_cast<double>(n) * std::log(rss0 / rss1);
        return chi2_upper(stat, static_cast<double>(yx.cols()));
    }
    // Recode to observed levels; a target with one observed level carries no information.
    std::vector<int> remap(data.spec(x).levels.size(), -1);
    int k = 0;
    std::vector<bool> present(remap.size(), false);
    for (double v : col) present[static_cast<std::size_t>(v)] = true;
    for (std::size_t l = 0; l < remap.size(); ++l)
        if (present[l]) remap[l] = k++;
    if (k < 2) return 1.0;
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = remap[static_cast<std::size_t>(col[i])];

    const glm::LogitOptions opts{kCiRidge, kCiMaxIter, 1e-8};
    const glm::LogitFit null_fit = glm::fit_logit(zx, y, k, opts);
    glm::LogitFit warm;
    warm.coef = Eigen::MatrixXd::Zero(full.cols(), k - 1);
    warm.coef.topRows(zx.cols()) = null_fit.coef;
    warm.intercept = null_fit.intercept;
    const glm::LogitFit alt_fit = glm::fit_logit(full, y, k, opts, &warm);
    const double stat = 2.0 * (alt_fit.log_likelihood - null_fit.log_likelihood);
    return chi2_upper(stat, static_cast<double>((k - 1) * yx.cols()));
}

Eigen::MatrixXd encode_columns(const Dataset& data, const std::vector<std::string>& names) {
    if (names.empty()) return Eigen::MatrixXd(static_cast<Eigen::Index>(data.rows()), 0);
    return tabular::encode(data, names, true).values;
}

}  // namespace

double ci_test(const Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> z) {
    if (x == y) throw DataError("ci_test needs two distinct variables");
    std::vector<std::string> znames;
    for (std::size_t c : z) {
        if (c == x || c == y) throw DataError("conditioning set must not contain the tested variables");
        znames.push_back(data.spec(c).name);
    }
    // Canonical order makes the statistic independent of how z was listed.
    std::sort(znames.begin(), znames.end());
    const Eigen::MatrixXd zx = encode_columns(data, znames);
    const Eigen::MatrixXd xx = encode_columns(data, {data.spec(x).name});
    const Eigen::MatrixXd yx = encode_columns(data, {data.spec(y).name});
    const double p_xy = directional_p(data, x, zx, yx);
    const double p_yx = directional_p(data, y, zx, xx);
    return std::max(p_xy, p_yx);
}

double ci_test(const Dataset& data, const std::string& x, const std::string& y, const std::vector<std::string>& z) {
    std::vector<std::size_t> zi;
    for (const auto& name : z) zi.push_back(data.index_of(name));
    return ci_test(data, data.index_of(x), data.index_of(y), zi);
}

// ---------------------------------------------------------------------------
// Skeleton

namespace {

/// Calls f(subset) for each size-k subset of `pool` in lexicographic order
/// until f returns true. Returns whether it did.
template <class F>
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t k, F&& f) {
    if (k > pool.size()) return false;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::size_t> subset(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) subset[i] = pool[idx[i]];
        if (f(subset)) return true;
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == pool.size() - k + (i - 1)) --i;
        if (i == 0) return false;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

struct PairTask {
    std::size_t a;
    std::size_t b;
    bool removed = false;
    std::vector<std::size_t> sepset;
    std::size_t tests = 0;
    std::vector<std::string> warnings;
};

}  // namespace

SkeletonResult pc_skeleton(const Dataset& data, const DiscoveryConfig& cfg) {
    cfg.validate();
    const std::size_t m = data.cols();
    SkeletonResult res{Cpdag::complete(data.column_names()), 0, {}};
    Cpdag& g = res.graph;

    // Every iteration runs in name order so the result does not depend on column order.
    std::vector<std::size_t> by_name(m);
    std::iota(by_name.begin(), by_name.end(), 0);
    std::sort(by_name.begin(), by_name.end(),
              [&](std::size_t l, std::size_t r) { return data.spec(l).name < data.spec(r).name; });
    std::vector<std::size_t> rank(m);
    for (std::size_t i = 0; i < m; ++i) rank[by_name[i]] = i;
    auto name_sorted = [&](std::vector<std::size_t> v) {
        std::sort(v.begin(), v.end(), [&](std::size_t l, std::size_t r) { return rank[l] < rank[r]; });
        return v;
    };

    const std::size_t max_level = cfg.max_cond_size.value_or(m >= 2 ? m - 2 : 0);
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());

    for (std::size_t level = 0; level <= max_level; ++level) {
        std::vector<std::vector<std::size_t>> snapshot(m);
        bool any = false;
        for (std::size_t a = 0; a < m; ++a) {
            snapshot[a] = name_sorted(g.neighbors(a));
            if (snapshot[a].size() >= level + 1) any = true;
        }
        if (!any) break;

        std::vector<PairTask> tasks;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const std::size_t a = by_name[i], b = by_name[j];
                if (g.adjacent(a, b)) tasks.push_back(PairTask{a, b, false, {}, 0, {}});
            }

        auto run = [&](PairTask& task) {
            std::set<std::vector<std::size_t>> tried;
            auto test = [&](const std::vector<std::size_t>& z) {
                if (!tried.insert(z).second) return false;
                ++task.tests;
                double p;
                try {
                    p = ci_test(data, task.a, task.b, z);
                } catch (const std::exception& e) {
                    task.warnings.push_back("CI test " + data.spec(task.a).name + " vs " + data.spec(task.b).name +
                                            " skipped: " + e.what());
                    return false;
                }
                if (p > cfg.alpha) {
                    task.removed = true;
                    task.sepset = z;
                    return true;
                }
                return false;
            };
            for (auto [from, other] : {std::pair{task.a, task.b}, std::pair{task.b, task.a}}) {
                std::vector<std::size_t> pool;
                for (std::size_t v : snapshot[from])
                    if (v != other) pool.push_back(v);
                if (for_each_subset(pool, level, test)) return;
            }
        };

        const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1)));
        if (workers <= 1) {
            for (auto& t : tasks) run(t);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) run(tasks[i]);
                });
        }

        for (auto& t : tasks) {
            res.tests += t.tests;
            for (auto& w : t.warnings) res.warnings.push_back(std::move(w));
            if (t.removed) {
                g.remove(t.a, t.b);
                g.set_sepset(t.a, t.b, t.sepset);
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Orientation

namespace {

class Orienter {
public:
    explicit Orienter(Cpdag& g) : g_(g), locked_(g.size(), std::vector<bool>(g.size(), false)) {
        order_.resize(g.size());
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(),
                  [&](std::size_t l, std::size_t r) { return g.nodes()[l] < g.nodes()[r]; });
    }

    void colliders() {
        std::set<std::pair<std::size_t, std::size_t>> demands;
        for (std::size_t b : order_)
            for (std::size_t ia = 0; ia < order_.size(); ++ia)
                for (std::size_t ic = ia + 1; ic < order_.size(); ++ic) {
                    const std::size_t a = order_[ia], c = order_[ic];
                    if (a == b || c == b) continue;
                    if (!g_.adjacent(a, b) || !g_.adjacent(c, b) || g_.adjacent(a, c)) continue;
                    const auto* sep = g_.sepset(a, c);
                    if (sep && std::find(sep->begin(), sep->end(), b) != sep->end()) continue;
                    demands.insert({a, b});
                    demands.insert({c, b});
                }
        for (const auto& [from, to] : demands) {
            if (demands.count({to, from})) {
                locked_[from][to] = locked_[to][from] = true;
                continue;
            }
        }
        // Apply in name order so cycle rejections are deterministic.
        std::vector<std::pair<std::size_t, std::size_t>> ordered(demands.begin(), demands.end());
        std::sort(ordered.begin(), ordered.end(), [&](auto l, auto r) {
            return std::tie(g_.nodes()[l.first], g_.nodes()[l.second]) <
                   std::tie(g_.nodes()[r.first], g_.nodes()[r.second]);
        });
        for (const auto& [from, to] : ordered) {
            if (locked_[from][to]) continue;
            if (!try_orient(from, to)) locked_[from][to] = locked_[to][from] = true;
        }
    }

    void meek() {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t a : order_)
                for (std::size_t b : order_) {
                    if (a == b || !g_.undirected(a, b) || locked_[a][b]) continue;
                    if (rule1(a, b) || rule2(a, b) || rule3(a, b) || rule4(a, b)) {
                        if (try_orient(a, b)) changed = true;
                    }
                }
        }
    }

private:
    bool try_orient(std::size_t from, std::size_t to) {
        if (g_.reachable(to, from)) return false;
        g_.orient(from, to);
        return true;
    }

    // R1: c -> a - b, c and b nonadjacent  =>  a -> b
    bool rule1(std::size_t a, std::size_t b) const {
        for (std::size_t c = 0; c < g_.size(); ++c)
            if (c != b && g_.directed(c, a) && !g_.adjacent(c, b)) return true;
        return false;
    }

    // R2: a -> c -> b and a - b  =>  a -> b
    bool rule2(std::size_t a, std::size_t b) const {
        for (std::size_t c = 0; c < g_.size(); ++c)
            if (g_.directed(a, c) && g_.directed(c, b)) return true;
        return false;
    }

    // R3: a - c -> b, a - d -> b, c and d nonadjacent, a - b  =>  a -> b
    bool rule3(std::size_t a, std::size_t b) const {
        for (std::size_t c = 0; c < g_.size(); ++c) {
            if (!g_.undirected(a, c) || !g_.directed(c, b)) continue;
            for (std::size_t d = c + 1; d < g_.size(); ++d)
                if (g_.undirected(a, d) && g_.directed(d, b) && !g_.adjacent(c, d)) return true;
        }
        return false;
    }

    // R4: a - d, d -> c -> b, a adjacent to c, d and b nonadjacent, a - b  =>  a -> b
    bool rule4(std::size_t a, std::size_t b) const {
        for (std::size_t c = 0; c < g_.size(); ++c) {
            if (c == a || !g_.directed(c, b) || !g_.adjacent(a, c)) continue;
            for (std::size_t d = 0; d < g_.size(); ++d)
                if (d != b && g_.undirected(a, d) && g_.directed(d, c) && !g_.adjacent(d, b)) return true;
        }
        return false;
    }

    Cpdag& g_;
    std::vector<std::vector<bool>> locked_;
    std::vector<std::size_t> order_;
};

}  // namespace

Cpdag orient(Cpdag skeleton) {
    Orienter o(skeleton);
    o.colliders();
    o.meek();
    return skeleton;
}

DiscoveryResult discover(const Dataset& data, const DiscoveryConfig& cfg) {
    SkeletonResult sk = pc_skeleton(data, cfg);
    return {orient(std::move(sk.graph)), sk.tests, std::move(sk.warnings)};
}

}  // namespace causalfair::discovery
