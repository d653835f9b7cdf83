#include "causalfair/learners.hpp"

#include "causalfair/error.hpp"
#include "causalfair/glm.hpp"
#include "causalfair/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace causalfair::learners {

std::string_view to_string(LearnerId id) noexcept {
    switch (id) {
        case LearnerId::logistic: return "logistic";
        case LearnerId::tree_ensemble: return "tree_ensemble";
        case LearnerId::linear_svm: return "linear_svm";
    }
    return "logistic";
}

LearnerId parse_learner(std::string_view id) {
    if (id == "logistic") return LearnerId::logistic;
    if (id == "tree_ensemble") return LearnerId::tree_ensemble;
    if (id == "linear_svm") return LearnerId::linear_svm;
    throw DataError("unknown learner '" + std::string(id) + "'");
}

namespace {

const std::map<std::string, double>& defaults(LearnerId id) {
    static const std::map<std::string, double> logistic{{"ridge", 1e-4}, {"max_iter", 100}};
    static const std::map<std::string, double> trees{
        {"trees", 100}, {"max_depth", 8}, {"min_leaf", 1}, {"threads", 1}};
    static const std::map<std::string, double> svm{{"lambda", 1e-4}, {"epochs", 30}};
    switch (id) {
        case LearnerId::logistic: return logistic;
        case LearnerId::tree_ensemble: return trees;
        case LearnerId::linear_svm: return svm;
    }
    return logistic;
}

bool is_count(double v) { return v >= 1 && std::floor(v) == v; }

}  // namespace

void ClassifierSpec::validate() const {
    const auto& known = defaults(id);
    for (const auto& [k, v] : params) {
        if (!known.count(k))
            throw DataError("learner '" + std::string(to_string(id)) + "' has no parameter '" + k + "'");
        if (!std::isfinite(v)) throw DataError("parameter '" + k + "' must be finite");
    }
    switch (id) {
        case LearnerId::logistic:
            if (param("ridge") < 0) throw DataError("ridge must be non-negative");
            if (!is_count(param("max_iter"))) throw DataError("max_iter must be a positive integer");
            break;
        case LearnerId::tree_ensemble:
            for (const char* k : {"trees", "max_depth", "min_leaf"})
                if (!is_count(param(k))) throw DataError(std::string(k) + " must be a positive integer");
            if (param("threads") < 0 || std::floor(param("threads")) != param("threads"))
                throw DataError("threads must be a non-negative integer");
            break;
        case LearnerId::linear_svm:
            if (!(param("lambda") > 0)) throw DataError("lambda must be positive");
            if (!is_count(param("epochs"))) throw DataError("epochs must be a positive integer");
            break;
    }
}

double ClassifierSpec::param(const std::string& key) const {
    if (auto it = params.find(key); it != params.end()) return it->second;
    return defaults(id).at(key);
}

std::vector<int> Classifier::predict(const Eigen::MatrixXd& x) const {
    const Eigen::VectorXd s = scores(x);
    std::vector<int> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s(i) > 0 ? 1 : 0;
    return out;
}

void Classifier::check_columns(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != features_)
        throw DataError("classifier expects " + std::to_string(features_) + " columns, got " +
                        std::to_string(x.cols()));
}

namespace {

class ConstantModel final : public Classifier {
public:
    ConstantModel(std::size_t p, int label) : Classifier(p), score_(label == 1 ? 1.0 : -1.0) {}
    Eigen::VectorXd scores(const Eigen::MatrixXd& x) const override {
        check_columns(x);
        return Eigen::VectorXd::Constant(x.rows(), score_);
    }

private:
    double score_;
};

class LinearModel final : public Classifier {
public:
    LinearModel(Eigen::VectorXd w, double b) : Classifier(static_cast<std::size_t>(w.size())), w_(std::move(w)), b_(b) {}
    Eigen::VectorXd scores(const Eigen::MatrixXd& x) const override {
        check_columns(x);
        Eigen::VectorXd s = x * w_;
        s.array() += b_;
        return s;
    }

private:
    Eigen::VectorXd w_;
    double b_;
};

// ---------------------------------------------------------------------------
// Bagged CART

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // share of label 1 among the node's samples
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> y, int max_depth, int min_leaf, std::size_t mtry,
                rng::Stream& stream)
        : x_(x), y_(y), max_depth_(max_depth), min_leaf_(min_leaf), mtry_(mtry), stream_(stream) {}

    std::vector<TreeNode> build(std::vector<std::size_t> samples) {
        nodes_.clear();
        grow(samples, 0);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<std::size_t>& samples, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        double pos = 0;
        for (auto i : samples) pos += y_[i];
        const double total = static_cast<double>(samples.size());
        nodes_[static_cast<std::size_t>(id)].value = pos / total;
        if (depth >= max_depth_ || pos == 0 || pos == total ||
            samples.size() < 2 * static_cast<std::size_t>(min_leaf_))
            return id;

        const auto p = static_cast<std::size_t>(x_.cols());
        std::vector<std::size_t> features(p);
        std::iota(features.begin(), features.end(), 0);
        for (std::size_t k = 0; k < mtry_ && k < p; ++k) std::swap(features[k], features[k + stream_.index(p - k)]);

        const double parent = gini(pos, total) * total;
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> order = samples;
        for (std::size_t k = 0; k < std::min(mtry_, p); ++k) {
            const auto f = static_cast<Eigen::Index>(features[k]);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x_(static_cast<Eigen::Index>(a), f) < x_(static_cast<Eigen::Index>(b), f); });
            double lpos = 0, ln = 0;
            for (std::size_t s = 0; s + 1 < order.size(); ++s) {
                lpos += y_[order[s]];
                ln += 1;
                const double here = x_(static_cast<Eigen::Index>(order[s]), f);
                const double next = x_(static_cast<Eigen::Index>(order[s + 1]), f);
                if (here == next) continue;
                const double rn = total - ln;
                if (ln < min_leaf_ || rn < min_leaf_) continue;
                const double child = gini(lpos, ln) * ln + gini(pos - lpos, rn) * rn;
                const double gain = parent - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (here + next);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto i : samples)
            (x_(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left : right).push_back(i);
        samples.clear();
        samples.shrink_to_fit();
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    static double gini(double pos, double n) {
        if (n <= 0) return 0.0;
        const double q = pos / n;
        return 2.0 * q * (1.0 - q);
    }

    const Eigen::MatrixXd& x_;
    std::span<const int> y_;
    int max_depth_;
    int min_leaf_;
    std::size_t mtry_;
    rng::Stream& stream_;
    std::vector<TreeNode> nodes_;
};

class ForestModel final : public Classifier {
public:
    ForestModel(std::size_t p, std::vector<std::vector<TreeNode>> trees) : Classifier(p), trees_(std::move(trees)) {}

    Eigen::VectorXd scores(const Eigen::MatrixXd& x) const override {
        check_columns(x);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double sum = 0;
            for (const auto& tree : trees_) {
                std::size_t k = 0;
                while (tree[k].feature >= 0)
                    k = static_cast<std::size_t>(x(i, tree[k].feature) <= tree[k].threshold ? tree[k].left : tree[k].right);
                sum += tree[k].value;
            }
            s(i) = sum / static_cast<double>(trees_.size()) - 0.5;
        }
        return s;
    }

private:
    std::vector<std::vector<TreeNode>> trees_;
};

std::shared_ptr<const Classifier> fit_forest(const ClassifierSpec& spec, const Eigen::MatrixXd& x,
                                             std::span<const int> y) {
    const auto n_trees = static_cast<std::size_t>(spec.param("trees"));
    const int depth = static_cast<int>(spec.param("max_depth"));
    const int min_leaf = static_cast<int>(spec.param("min_leaf"));
    unsigned threads = static_cast<unsigned>(spec.param("threads"));
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const auto p = static_cast<std::size_t>(x.cols());
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));

    std::vector<std::vector<TreeNode>> trees(n_trees);
    // Each tree owns a stream derived from (seed, tree index), so the forest
    // does not depend on how trees are spread over threads.
    auto grow = [&](std::size_t t) {
        rng::Stream stream(spec.seed ^ rng::splitmix64(t + 1));
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = stream.index(n);
        std::sort(sample.begin(), sample.end());
        TreeBuilder builder(x, y, depth, min_leaf, mtry, stream);
        trees[t] = builder.build(std::move(sample));
    };
    if (threads <= 1) {
        for (std::size_t t = 0; t < n_trees; ++t) grow(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < std::min<std::size_t>(threads, n_trees); ++w)
            pool.emplace_back([&] {
                for (std::size_t t; (t = next.fetch_add(1)) < n_trees;) grow(t);
            });
    }
    return std::make_shared<ForestModel>(p, std::move(trees));
}

// ---------------------------------------------------------------------------
// Linear SVM: averaged stochastic subgradient descent on the regularised
// hinge loss, step size 1 / (lambda * (t + 1 / lambda)).

std::shared_ptr<const Classifier> fit_svm(const ClassifierSpec& spec, const Eigen::MatrixXd& x,
                                          std::span<const int> y) {
    const double lambda = spec.param("lambda");
    const auto epochs = static_cast<std::size_t>(spec.param("epochs"));
    const auto n = static_cast<std::size_t>(x.rows());
    const Eigen::Index p = x.cols();
    rng::Stream stream(spec.seed);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p), w_avg = Eigen::VectorXd::Zero(p);
    double b = 0, b_avg = 0, averaged = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const double t0 = 1.0 / lambda;
    double t = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
        stream.shuffle(order);
        for (auto i : order) {
            const auto ri = static_cast<Eigen::Index>(i);
            const double eta = 1.0 / (lambda * (t + t0));
            const double yi = y[i] == 1 ? 1.0 : -1.0;
            const double margin = yi * (x.row(ri).dot(w) + b);
            w *= (1.0 - eta * lambda);
            if (margin < 1) {
                w += eta * yi * x.row(ri).transpose();
                b += eta * yi;
            }
            t += 1;
            // Average over the second half of training.
            if (2 * e >= epochs) {
                averaged += 1;
                w_avg += (w - w_avg) / averaged;
                b_avg += (b - b_avg) / averaged;
            }
        }
    }
    return std::make_shared<LinearModel>(w_avg, b_avg);
}

}  // namespace

double logistic_loss(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& coef,
                     double intercept, double ridge) {
    double loss = 0.5 * ridge * coef.squaredNorm();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double eta = intercept + x.row(i).dot(coef);
        // log(1 + exp(eta)) - y * eta, written to avoid overflow
        const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        loss += softplus - (y[static_cast<std::size_t>(i)] == 1 ? eta : 0.0);
    }
    return loss;
}

Trained fit(const ClassifierSpec& spec, const Eigen::MatrixXd& x, std::span<const int> y) {
    spec.validate();
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("feature rows and labels differ in length");
    if (y.size() < 10) throw DataError("at least 10 training rows are required");
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
        pos += static_cast<std::size_t>(v);
    }
    const auto p = static_cast<std::size_t>(x.cols());
    Trained out;
    if (pos == 0 || pos == y.size()) {
        out.model = std::make_shared<ConstantModel>(p, pos == 0 ? 0 : 1);
        out.warnings.push_back("training labels contain a single class; using a constant predictor");
        return out;
    }
    switch (spec.id) {
        case LearnerId::logistic: {
            glm::LogitOptions opts;
            opts.ridge = spec.param("ridge");
            opts.max_iter = static_cast<int>(spec.param("max_iter"));
            const auto f = glm::fit_logit(x, y, 2, opts);
            if (!f.converged) out.warnings.push_back("logistic regression did not converge");
            out.model = std::make_shared<LinearModel>(f.coef.col(0), f.intercept(0));
            break;
        }
        case LearnerId::tree_ensemble: out.model = fit_forest(spec, x, y); break;
        case LearnerId::linear_svm: out.model = fit_svm(spec, x, y); break;
    }
    return out;
}

}  // namespace causalfair::learners
