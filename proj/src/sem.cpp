#include "causalfair/sem.hpp"

#include "causalfair/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

namespace causalfair::sem {

using tabular::Dataset;

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::linear: return "linear";
        case ModelKind::binary_logit: return "binary_logit";
        case ModelKind::multinomial_logit: return "multinomial_logit";
    }
    return "linear";
}

namespace {

double population_std(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / n);
}

}  // namespace

NodeModel fit_node(const Dataset& data, const std::string& target, const std::vector<std::string>& parents) {
    const std::size_t t = data.index_of(target);
    if (std::find(parents.begin(), parents.end(), target) != parents.end())
        throw DataError("node '" + target + "' cannot be its own parent");
    for (const auto& p : parents) data.index_of(p);

    NodeModel m;
    m.target = target;
    m.parents = parents;
    m.encoder = tabular::Encoder::fit(data, parents, false);
    const Eigen::MatrixXd x = m.encoder.transform(data).values;
    const std::size_t n = data.rows();
    const double dn = static_cast<double>(n);
    m.n = n;
    const auto& spec = data.spec(t);
    const auto col = data.column(t);

    if (!spec.nominal()) {
        m.kind = ModelKind::linear;
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(n));
        const glm::OlsFit ols = glm::fit_ols(x, y);
        m.coefficients = ols.coef;
        m.intercept = Eigen::RowVectorXd::Constant(1, ols.intercept);
        m.residual_variance = std::max(ols.rss / dn, std::numeric_limits<double>::min());
        m.log_likelihood = -0.5 * dn * (std::log(2.0 * std::numbers::pi * m.residual_variance) + 1.0);
        m.n_params = static_cast<int>(x.cols()) + 2;
        const double tss = (y.array() - y.mean()).square().sum();
        m.fit_quality = tss > 0 ? 1.0 - ols.rss / tss : 1.0;
    } else {
        const int classes = static_cast<int>(spec.levels.size());
        m.kind = classes == 2 ? ModelKind::binary_logit : ModelKind::multinomial_logit;
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(col[i]);
        const glm::LogitFit fit = glm::fit_logit(x, y, classes, {1e-6, 100, 1e-8});
        m.coefficients = fit.coef;
        m.intercept = fit.intercept;
        m.log_likelihood = fit.log_likelihood;
        m.converged = fit.converged;
        m.iterations = fit.iterations;
        m.n_params = static_cast<int>((x.cols() + 1) * (classes - 1));
        const Eigen::MatrixXd s = glm::logit_scores(x, fit);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Index best;
            s.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
            hits += best == y[i];
        }
        m.fit_quality = static_cast<double>(hits) / dn;
    }
    m.bic = m.n_params * std::log(dn) - 2.0 * m.log_likelihood;
    return m;
}

std::map<std::string, double> baseline_bics(const Dataset& data, unsigned threads) {
    const auto names = data.column_names();
    std::vector<double> out(names.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(names.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < names.size();) out[i] = fit_node(data, names[i], {}).bic;
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    }
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], out[i]);
    return m;
}

FitScore score_of(const std::map<std::string, NodeModel>& models, const std::map<std::string, double>& baselines) {
    FitScore s;
    for (const auto& [name, m] : models) {
        s.per_node[name] = m.bic;
        s.total_bic += m.bic;
    }
    for (const auto& [name, b] : baselines)
        if (!models.count(name)) s.exogenous.emplace(name, b);
    return s;
}

SemFit fit_all(const Dataset& data, const std::vector<DirectedEdge>& edges, unsigned threads) {
    std::map<std::string, std::set<std::string>> parents;
    for (const auto& [s, t] : edges) {
        data.index_of(s);
        data.index_of(t);
        parents[t].insert(s);
    }
    std::vector<std::pair<std::string, std::vector<std::string>>> jobs;
    for (const auto& [t, ps] : parents) jobs.emplace_back(t, std::vector<std::string>(ps.begin(), ps.end()));

    std::vector<std::optional<NodeModel>> out(jobs.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
            try {
                out[i] = fit_node(data, jobs[i].first, jobs[i].second);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    SemFit fit;
    for (std::size_t i = 0; i < jobs.size(); ++i) fit.models.emplace(jobs[i].first, std::move(*out[i]));
    fit.score = score_of(fit.models, baseline_bics(data, threads));
    return fit;
}

double delta_bic(const FitScore& before, const FitScore& after) noexcept {
    auto whole = [](const FitScore& s) {
        double t = s.total_bic;
        for (const auto& [name, b] : s.exogenous) t += b;
        return t;
    };
    return whole(after) - whole(before);
}

EdgeWeight edge_weight(const NodeModel& model, const std::string& source, const Dataset& data) {
    EdgeWeight w{source, model.target, std::nullopt, false};
    const auto& sources = model.encoder.sources();
    auto it = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.name == source; });
    if (it == sources.end()) throw DataError("'" + source + "' is not a parent of '" + model.target + "'");
    if (model.kind == ModelKind::multinomial_logit) return w;

    const auto src_index = static_cast<std::size_t>(it - sources.begin());
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < model.encoder.columns().size(); ++c)
        if (model.encoder.columns()[c].source == src_index) cols.push_back(c);
    if (cols.size() != 1) return w;

    const std::size_t c = cols.front();
    const double beta = model.coefficients(static_cast<Eigen::Index>(c), 0);
    const std::size_t j = data.index_of(source);
    double sigma_source;
    if (data.spec(j).nominal()) {
        const int level = *model.encoder.columns()[c].level;
        std::vector<double> indicator(data.rows());
        for (std::size_t r = 0; r < data.rows(); ++r) indicator[r] = data.code(r, j) == level ? 1.0 : 0.0;
        sigma_source = population_std(indicator);
    } else {
        sigma_source = population_std(data.column(j));
    }

    w.representable = true;
    if (sigma_source == 0) {
        w.std_beta = 0.0;
        return w;
    }
    if (model.kind == ModelKind::linear) {
        const double sigma_target = population_std(data.column(data.index_of(model.target)));
        w.std_beta = sigma_target > 0 ? beta * sigma_source / sigma_target : 0.0;
    } else {
        w.std_beta = beta * sigma_source;
    }
    return w;
}

}  // namespace causalfair::sem
