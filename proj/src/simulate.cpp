#include "causalfair/simulate.hpp"

#include "causalfair/error.hpp"
#include "causalfair/glm.hpp"
#include "causalfair/rng.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace causalfair::simulate {

using tabular::Dataset;

void SimulationConfig::validate() const {
    if (!(rescale_lr > 0)) throw DataError("rescale learning rate must be positive");
    if (rescale_max_iters < 1) throw DataError("rescale iteration cap must be at least 1");
}

namespace {

struct Moments {
    double mean = 0.0;
    double std = 0.0;
};

Moments moments(std::span<const double> v) {
    Moments m;
    if (v.empty()) return m;
    const double n = static_cast<double>(v.size());
    for (double x : v) m.mean += x;
    m.mean /= n;
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / n);
    return m;
}

std::string column_key(const tabular::EncodedColumn& c) {
    return c.source_name + '\x1f' + (c.level ? std::to_string(*c.level) : std::string("numeric"));
}

template <class F>
void parallel_rows(std::size_t n, unsigned threads, F&& body) {
    if (threads <= 1 || n < 1024) {
        body(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo < hi) pool.emplace_back([&, lo, hi] { body(lo, hi); });
    }
}

}  // namespace

NoiseSpec noise_spec(const sem::NodeModel& model, const Dataset& original) {
    const Eigen::MatrixXd x = model.encoder.transform(original).values;
    NoiseSpec spec;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const Eigen::VectorXd col = x.col(c);
        const Moments m = moments(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        spec.mean.push_back(m.mean);
        spec.std.push_back(m.std);
    }
    return spec;
}

NodeSimulation simulate_node(const sem::NodeModel& model, const std::map<std::string, double>& alphas,
                             const Dataset& parents, const NoiseSpec& noise, std::uint64_t seed, unsigned threads) {
    const auto& cols = model.encoder.columns();
    const std::size_t p = cols.size();
    if (noise.mean.size() != p || noise.std.size() != p) throw DataError("noise spec does not match the model");
    const Eigen::MatrixXd x = model.encoder.transform(parents).values;
    const std::size_t n = parents.rows();
    const std::size_t width = model.width();

    std::vector<double> alpha(p, 1.0);
    std::vector<std::uint64_t> col_keys(p);
    for (std::size_t c = 0; c < p; ++c) {
        if (auto it = alphas.find(cols[c].source_name); it != alphas.end()) alpha[c] = it->second;
        if (alpha[c] < 0.0 || alpha[c] > 2.0)
            throw EditError("alpha for '" + cols[c].source_name + "' lies outside [0, 2]");
        col_keys[c] = rng::fnv1a(column_key(cols[c]));
    }
    const std::uint64_t node_key = rng::fnv1a(model.target);

    Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    parallel_rows(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto ri = static_cast<Eigen::Index>(i);
            for (std::size_t k = 0; k < width; ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                scores(ri, ki) = model.intercept(ki);
            }
            for (std::size_t c = 0; c < p; ++c) {
                const auto ci = static_cast<Eigen::Index>(c);
                const double a = alpha[c];
                double value = a * x(ri, ci);
                if (a != 1.0) {
                    const double r = noise.mean[c] + noise.std[c] * rng::keyed_normal(seed, node_key, col_keys[c], i);
                    value += (1.0 - a) * r;
                }
                for (std::size_t k = 0; k < width; ++k) {
                    const auto ki = static_cast<Eigen::Index>(k);
                    scores(ri, ki) += model.coefficients(ci, ki) * value;
                }
            }
        }
    });

    NodeSimulation out;
    if (model.kind == sem::ModelKind::linear) {
        out.values.assign(scores.col(0).data(), scores.col(0).data() + n);
    } else {
        Eigen::MatrixXd full(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width + 1));
        full.col(0).setZero();
        full.rightCols(static_cast<Eigen::Index>(width)) = scores;
        out.prob_mat = glm::softmax_rows(full);
    }
    return out;
}

NumericRescale rescale_numeric(std::span<const double> simulated, std::span<const double> original) {
    const Moments target = moments(original);
    const Moments sim = moments(simulated);
    NumericRescale out;
    out.values.resize(simulated.size());
    if (sim.std == 0) {
        std::fill(out.values.begin(), out.values.end(), target.mean);
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < simulated.size(); ++i)
        out.values[i] = target.mean + (simulated[i] - sim.mean) / sim.std * target.std;
    return out;
}

std::vector<double> distribution(std::span<const double> codes, std::size_t levels) {
    std::vector<double> d(levels, 0.0);
    for (double c : codes) d[static_cast<std::size_t>(c)] += 1.0;
    if (!codes.empty())
        for (double& v : d) v /= static_cast<double>(codes.size());
    return d;
}

std::vector<double> argmax_rows(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < m.cols(); ++k)
            if (m(i, k) > m(i, best)) best = k;
        out[static_cast<std::size_t>(i)] = static_cast<double>(best);
    }
    return out;
}

namespace {

double l1(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace

CategoricalRescale rescale_categorical(const Eigen::MatrixXd& prob_mat, std::span<const double> original,
                                       const SimulationConfig& cfg) {
    cfg.validate();
    const auto levels = static_cast<std::size_t>(prob_mat.cols());
    const std::size_t n = static_cast<std::size_t>(prob_mat.rows());
    if (n != original.size()) throw DataError("probability matrix and original column differ in length");
    // Zero components of the debiased marginal are floored so the ratio terms stay finite.
    const double floor = 1.0 / (10.0 * static_cast<double>(n));

    CategoricalRescale out;
    RescaleState& st = out.state;
    st.prob_mat = prob_mat;
    st.dist_ori = distribution(original, levels);
    bool floored = false;
    auto dist_deb = [&](const Eigen::MatrixXd& pm) {
        auto d = distribution(argmax_rows(pm), levels);
        for (double& v : d)
            if (v < floor) {
                v = floor;
                floored = true;
            }
        return d;
    };
    auto gap = [&](const std::vector<double>& deb) {
        double s = 0;
        for (std::size_t l = 0; l < levels; ++l) s += std::abs((st.dist_ori[l] - deb[l]) / deb[l]);
        return s;
    };

    const std::vector<double> initial_labels = argmax_rows(prob_mat);
    out.initial_l1 = l1(st.dist_ori, distribution(initial_labels, levels));

    st.scale_factor.assign(levels, 1.0);
    for (int iter = 0;; ++iter) {
        st.dist_deb = dist_deb(st.prob_mat);
        st.diff = gap(st.dist_deb);
        if (st.diff == 0.0) break;  // marginals already agree
        std::vector<double> factor(levels);
        for (std::size_t l = 0; l < levels; ++l)
            factor[l] = 1.0 + cfg.rescale_lr * (st.dist_ori[l] - st.dist_deb[l]) / st.dist_deb[l];
        Eigen::MatrixXd scaled = st.prob_mat;
        for (std::size_t l = 0; l < levels; ++l) scaled.col(static_cast<Eigen::Index>(l)) *= factor[l];
        const auto new_deb = dist_deb(scaled);
        const double new_diff = gap(new_deb);
        if (new_diff > st.diff) break;  // the step made things worse; keep the previous matrix
        st.prob_mat = std::move(scaled);
        st.scale_factor = factor;
        st.dist_deb = new_deb;
        st.diff = new_diff;
        out.iterations = iter + 1;
        if (iter >= cfg.rescale_max_iters) break;
    }
    if (floored) out.warnings.push_back("a level was absent from the argmax assignment; its share was floored at 1/(10n)");

    out.labels = argmax_rows(st.prob_mat);
    out.final_l1 = l1(st.dist_ori, distribution(out.labels, levels));
    if (out.final_l1 > out.initial_l1) {
        out.warnings.push_back("rescaling increased the marginal L1 distance; kept the unscaled assignment");
        out.labels = initial_labels;
        out.final_l1 = out.initial_l1;
    }
    return out;
}

DebiasResult generate_debiased(const Dataset& data, const graph::CausalModel& model, const SimulationConfig& cfg) {
    cfg.validate();
    DebiasResult res{data, {}, {}, {}, {}};
    if (model.stage() != graph::Stage::debias) return res;

    // Step 1: retrain the heads of edges added while debiasing.
    std::map<std::string, sem::NodeModel> models = model.node_models();
    std::set<std::string> heads;
    for (const auto& [s, t] : model.log().added_in_debias()) heads.insert(t);
    for (const auto& t : heads) {
        const auto ps = model.parents(t);
        if (ps.empty()) continue;
        models.insert_or_assign(t, sem::fit_node(data, t, ps));
        res.retrained.push_back(t);
    }

    // Step 2: nodes touched by debias edits and everything downstream of them.
    res.simulated = model.debias_footprint();

    // Step 3 and 4: simulate in topological order, rescaling each column
    // before its children read it.
    Dataset current = data;
    for (const auto& v : model.topological_order()) {
        if (!res.simulated.count(v)) continue;
        auto it = models.find(v);
        if (it == models.end()) {
            res.warnings.push_back("'" + v + "' has no fitted model; copied unchanged");
            continue;
        }
        const sem::NodeModel& m = it->second;
        std::map<std::string, double> alphas;
        for (const auto& p : m.parents) {
            const graph::Edge* e = model.find_edge(p, v);
            alphas[p] = (e && e->state == graph::EdgeState::directed && e->source == p) ? e->alpha : 0.0;
        }
        const NoiseSpec noise = noise_spec(m, data);
        const NodeSimulation sim = simulate_node(m, alphas, current, noise, cfg.seed, cfg.threads);
        const std::size_t j = data.index_of(v);
        std::vector<double> values;
        if (m.kind == sem::ModelKind::linear) {
            auto r = rescale_numeric(sim.values, data.column(j));
            if (r.degenerate) res.warnings.push_back("'" + v + "' simulated with zero variance; set to the original mean");
            values = std::move(r.values);
        } else {
            auto r = rescale_categorical(sim.prob_mat, data.column(j), cfg);
            for (auto& w : r.warnings) res.warnings.push_back("'" + v + "': " + w);
            values = std::move(r.labels);
        }
        current = current.with_column(j, std::move(values));
        res.fit_quality[v] = m.fit_quality;
    }
    res.data = std::move(current);
    return res;
}

}  // namespace causalfair::simulate
