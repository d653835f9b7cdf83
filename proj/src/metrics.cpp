#include "causalfair/metrics.hpp"

#include "causalfair/error.hpp"
#include "causalfair/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace causalfair::metrics {

using tabular::Dataset;

GroupSpec GroupSpec::sensitive(std::string column) {
    GroupSpec g;
    g.column = std::move(column);
    return g;
}

GroupSpec GroupSpec::custom(Predicate a, Predicate b) {
    GroupSpec g;
    g.a = std::move(a);
    g.b = std::move(b);
    return g;
}

std::set<std::string> GroupSpec::attributes() const {
    if (column) return {*column};
    std::set<std::string> out;
    for (const auto* p : {&a, &b})
        for (const auto& c : p->conditions) out.insert(c.column);
    return out;
}

namespace {

std::string describe(const Predicate& p) {
    std::string s;
    for (const auto& c : p.conditions) {
        if (!s.empty()) s += " & ";
        s += c.column + " in {";
        bool first = true;
        for (const auto& l : c.levels) {
            s += (first ? "" : ", ") + l;
            first = false;
        }
        for (const auto& [lo, hi] : c.ranges) {
            s += (first ? "" : ", ") + tabular::format_number(lo) + ".." + tabular::format_number(hi);
            first = false;
        }
        s += "}";
    }
    return s.empty() ? "(empty)" : s;
}

const tabular::ColumnSpec& binary_nominal(const Dataset& data, const std::string& column, const char* role) {
    const auto& spec = data.spec(data.index_of(column));
    if (!spec.nominal() || spec.levels.size() != 2)
        throw DataError(std::string(role) + " column '" + column + "' must be nominal with exactly two levels");
    return spec;
}

std::vector<char> match(const Dataset& data, const Predicate& p) {
    std::vector<char> in(data.rows(), p.conditions.empty() ? 0 : 1);
    for (const auto& c : p.conditions) {
        const std::size_t j = data.index_of(c.column);
        const auto& spec = data.spec(j);
        if (spec.nominal()) {
            if (!c.ranges.empty()) throw DataError("column '" + c.column + "' is nominal; use levels, not ranges");
            std::vector<char> allowed(spec.levels.size(), 0);
            for (const auto& l : c.levels) {
                const int k = spec.level_index(l);
                if (k < 0) throw DataError("column '" + c.column + "' has no level '" + l + "'");
                allowed[static_cast<std::size_t>(k)] = 1;
            }
            for (std::size_t i = 0; i < in.size(); ++i)
                if (!allowed[static_cast<std::size_t>(data.code(i, j))]) in[i] = 0;
        } else {
            if (!c.levels.empty()) throw DataError("column '" + c.column + "' is numeric; use ranges, not levels");
            for (const auto& [lo, hi] : c.ranges)
                if (!(lo <= hi)) throw DataError("range on '" + c.column + "' has lower bound above upper bound");
            for (std::size_t i = 0; i < in.size(); ++i) {
                const double v = data.at(i, j);
                bool hit = false;
                for (const auto& [lo, hi] : c.ranges) hit = hit || (lo <= v && v <= hi);
                if (!hit) in[i] = 0;
            }
        }
    }
    return in;
}

}  // namespace

std::string GroupSpec::name_a(const Dataset& data) const {
    if (column) return *column + " = " + binary_nominal(data, *column, "sensitive").levels[0];
    return describe(a);
}

std::string GroupSpec::name_b(const Dataset& data) const {
    if (column) return *column + " = " + binary_nominal(data, *column, "sensitive").levels[1];
    return describe(b);
}

Groups resolve(const Dataset& data, const GroupSpec& spec) {
    Groups g;
    g.name_a = spec.name_a(data);
    g.name_b = spec.name_b(data);
    if (spec.column) {
        const std::size_t j = data.index_of(*spec.column);
        g.a.resize(data.rows());
        g.b.resize(data.rows());
        for (std::size_t i = 0; i < data.rows(); ++i) {
            g.a[i] = data.code(i, j) == 0;
            g.b[i] = data.code(i, j) == 1;
        }
    } else {
        g.a = match(data, spec.a);
        g.b = match(data, spec.b);
    }
    std::size_t na = 0, nb = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (g.a[i] && g.b[i]) throw DataError("groups overlap at row " + std::to_string(i));
        na += static_cast<std::size_t>(g.a[i]);
        nb += static_cast<std::size_t>(g.b[i]);
    }
    if (na == 0) throw DataError("group A (" + g.name_a + ") is empty");
    if (nb == 0) throw DataError("group B (" + g.name_b + ") is empty");
    return g;
}

Outcome Outcome::of(const Dataset& data, std::optional<std::string> column, std::optional<std::string> favorable) {
    Outcome o;
    if (column) o.column = *column;
    else if (data.label()) o.column = *data.label();
    else throw DataError("no label column given and the schema declares none");
    const auto& spec = binary_nominal(data, o.column, "label");
    if (favorable) o.favorable = *favorable;
    else if (spec.favorable_level) o.favorable = *spec.favorable_level;
    else throw DataError("no favorable level given for label '" + o.column + "'");
    if (spec.level_index(o.favorable) < 0)
        throw DataError("label '" + o.column + "' has no level '" + o.favorable + "'");
    return o;
}

std::vector<int> Outcome::indicator(const Dataset& data) const {
    const std::size_t j = data.index_of(column);
    const int fav = data.spec(j).level_index(favorable);
    if (fav < 0) throw DataError("label '" + column + "' has no level '" + favorable + "'");
    std::vector<int> out(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) out[i] = data.code(i, j) == fav ? 1 : 0;
    return out;
}

Fourfold fourfold(const Dataset& data, const Groups& groups, const Outcome& outcome) {
    if (groups.a.size() != data.rows() || groups.b.size() != data.rows())
        throw DataError("group membership does not match the dataset's rows");
    const auto y = outcome.indicator(data);
    double na = 0, nb = 0, fa = 0, fb = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (groups.a[i]) {
            na += 1;
            fa += y[i];
        } else if (groups.b[i]) {
            nb += 1;
            fb += y[i];
        }
    }
    if (na == 0) throw DataError("group A (" + groups.name_a + ") is empty");
    if (nb == 0) throw DataError("group B (" + groups.name_b + ") is empty");
    Fourfold f;
    f.a_favorable = 100.0 * fa / na;
    f.a_unfavorable = 100.0 - f.a_favorable;
    f.b_favorable = 100.0 * fb / nb;
    f.b_unfavorable = 100.0 - f.b_favorable;
    return f;
}

double parity_diff(const Dataset& data, const Groups& groups, const Outcome& outcome) {
    const Fourfold f = fourfold(data, groups, outcome);
    return std::abs(f.a_favorable - f.b_favorable) / 100.0;
}

double individual_bias(const Dataset& data, const std::string& label, std::size_t k, unsigned threads) {
    const std::size_t n = data.rows();
    if (k < 1 || n <= k) throw DataError("individual bias needs 1 <= k < rows");
    const std::size_t label_col = data.index_of(label);

    std::vector<tabular::ColumnSpec> schema;
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < data.cols(); ++j)
        if (j != label_col) {
            cols.push_back(j);
            schema.push_back(data.spec(j));
        }
    const std::vector<double> all_ranges = tabular::numeric_ranges(data);
    std::vector<double> ranges;
    for (auto j : cols) ranges.push_back(all_ranges[j]);
    const std::size_t m = cols.size();
    std::vector<double> rows(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) rows[i * m + c] = data.at(i, cols[c]);
    const auto labels = data.column(label_col);

    std::vector<double> share(n);
    auto work = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            dist.clear();
            const std::span<const double> ri(rows.data() + i * m, m);
            for (std::size_t o = 0; o < n; ++o) {
                if (o == i) continue;
                dist.emplace_back(tabular::gower_row_distance(ri, {rows.data() + o * m, m}, schema, ranges), o);
            }
            std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
            std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
            std::size_t differ = 0;
            for (std::size_t q = 0; q < k; ++q) differ += labels[dist[q].second] != labels[i];
            share[i] = static_cast<double>(differ) / static_cast<double>(k);
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || n < 256) {
        work(0, n);
    } else {
        const std::size_t chunk = (n + threads - 1) / threads;
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
            if (lo < hi) pool.emplace_back(work, lo, hi);
        }
    }
    // Summed in row order so the result does not depend on the thread count.
    double total = 0;
    for (double s : share) total += s;
    return total / static_cast<double>(n);
}

double distortion(const Dataset& original, const Dataset& debiased) {
    if (original.schema() != debiased.schema()) throw DataError("distortion needs datasets with the same schema");
    if (original.rows() != debiased.rows()) throw DataError("distortion needs datasets with the same row count");
    const auto ranges = tabular::numeric_ranges(original);
    const std::size_t n = original.rows(), m = original.cols();
    std::vector<double> a(m), b(m);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            a[j] = original.at(i, j);
            b[j] = debiased.at(i, j);
        }
        total += tabular::gower_row_distance(a, b, original.schema(), ranges);
    }
    return total / static_cast<double>(n);
}

void EvalConfig::validate() const {
    learner.validate();
    if (splits < 1) throw DataError("at least one evaluation split is required");
    if (k < 1) throw DataError("k must be at least 1");
}

namespace {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

Split stratified_half(std::span<const int> strata, rng::Stream& stream) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < strata.size(); ++i) (strata[i] ? pos : neg).push_back(i);
    Split s;
    for (auto* cls : {&neg, &pos}) {
        stream.shuffle(*cls);
        const std::size_t half = cls->size() / 2;
        s.test.insert(s.test.end(), cls->begin(), cls->begin() + static_cast<std::ptrdiff_t>(half));
        s.train.insert(s.train.end(), cls->begin() + static_cast<std::ptrdiff_t>(half), cls->end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

struct GroupRates {
    double accuracy = 0, fnr = 0, fpr = 0;
    bool no_positives = false, no_negatives = false;
};

GroupRates rates(std::span<const int> truth, std::span<const int> pred, const std::vector<std::size_t>& rows,
                 const std::vector<char>& member) {
    double n = 0, correct = 0, p = 0, fn = 0, q = 0, fp = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!member[rows[r]]) continue;
        const int t = truth[r], y = pred[r];
        n += 1;
        correct += t == y;
        if (t == 1) {
            p += 1;
            fn += y == 0;
        } else {
            q += 1;
            fp += y == 1;
        }
    }
    GroupRates g;
    g.accuracy = n > 0 ? correct / n : 0.0;
    g.fnr = p > 0 ? fn / p : 0.0;
    g.fpr = q > 0 ? fp / q : 0.0;
    g.no_positives = p == 0;
    g.no_negatives = q == 0;
    return g;
}

struct SplitResult {
    double accuracy = 0, f1 = 0, acc_diff = 0, fnr_diff = 0, fpr_diff = 0;
    std::vector<std::string> warnings;
};

}  // namespace

ClassifierScores classifier_scores(const Dataset& data, std::span<const int> reference, const Groups& groups,
                                   const Outcome& outcome, const std::set<std::string>& drop,
                                   const EvalConfig& cfg) {
    cfg.validate();
    const std::size_t n = data.rows();
    if (reference.size() != n) throw DataError("reference labels do not match the dataset's rows");
    if (groups.a.size() != n || groups.b.size() != n)
        throw DataError("group membership does not match the dataset's rows");
    const auto own = outcome.indicator(data);

    std::vector<std::string> features;
    for (const auto& name : data.column_names())
        if (name != outcome.column && !drop.count(name)) features.push_back(name);
    if (features.empty()) throw DataError("no feature columns remain after dropping the label and group attributes");
    const auto encoded = tabular::encode(data, features, true);
    const Eigen::MatrixXd& x = encoded.values;

    // Draw every split up front from one stream so the result does not
    // depend on how splits are scheduled.
    rng::Stream stream(cfg.seed);
    std::vector<Split> splits;
    for (int s = 0; s < cfg.splits; ++s) {
        int redraws = 0;
        for (;;) {
            Split sp = stratified_half(reference, stream);
            bool a = false, b = false;
            for (auto i : sp.test) {
                a = a || groups.a[i];
                b = b || groups.b[i];
            }
            if (a && b) {
                splits.push_back(std::move(sp));
                break;
            }
            if (++redraws > 10) throw DataError("a group is empty in the test half after 10 redraws");
        }
    }

    auto take = [&](const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
        return out;
    };

    std::vector<SplitResult> results(splits.size());
    auto run = [&](std::size_t s) {
        const Split& sp = splits[s];
        std::vector<int> ytrain(sp.train.size());
        for (std::size_t r = 0; r < sp.train.size(); ++r) ytrain[r] = own[sp.train[r]];
        learners::ClassifierSpec spec = cfg.learner;
        spec.seed = rng::splitmix64(cfg.learner.seed ^ rng::splitmix64(cfg.seed + s));
        auto trained = learners::fit(spec, take(sp.train), ytrain);
        const auto pred = trained.model->predict(take(sp.test));

        SplitResult& res = results[s];
        res.warnings = trained.warnings;
        std::vector<int> ref(sp.test.size()), self(sp.test.size());
        double correct = 0, tp = 0, fp = 0, fn = 0;
        for (std::size_t r = 0; r < sp.test.size(); ++r) {
            ref[r] = reference[sp.test[r]];
            self[r] = own[sp.test[r]];
            correct += ref[r] == pred[r];
            tp += ref[r] == 1 && pred[r] == 1;
            fp += ref[r] == 0 && pred[r] == 1;
            fn += ref[r] == 1 && pred[r] == 0;
        }
        res.accuracy = correct / static_cast<double>(sp.test.size());
        res.f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
        const GroupRates ga = rates(self, pred, sp.test, groups.a);
        const GroupRates gb = rates(self, pred, sp.test, groups.b);
        if (ga.no_positives || gb.no_positives)
            res.warnings.push_back("a group has no favorable rows in a test half; its FNR is taken as 0");
        if (ga.no_negatives || gb.no_negatives)
            res.warnings.push_back("a group has no unfavorable rows in a test half; its FPR is taken as 0");
        res.acc_diff = std::abs(ga.accuracy - gb.accuracy);
        res.fnr_diff = std::abs(ga.fnr - gb.fnr);
        res.fpr_diff = std::abs(ga.fpr - gb.fpr);
    };
    if (cfg.threads > 1 && splits.size() > 1) {
        std::vector<std::jthread> pool;
        for (std::size_t s = 0; s < splits.size(); ++s) pool.emplace_back(run, s);
    } else {
        for (std::size_t s = 0; s < splits.size(); ++s) run(s);
    }

    ClassifierScores out;
    const double k = static_cast<double>(results.size());
    for (const auto& r : results) {
        out.accuracy += r.accuracy / k;
        out.f1 += r.f1 / k;
        out.accuracy_diff += r.acc_diff / k;
        out.fnr_diff += r.fnr_diff / k;
        out.fpr_diff += r.fpr_diff / k;
        for (const auto& w : r.warnings)
            if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
    }
    return out;
}

MetricsReport evaluate(const Dataset& original, const Dataset& candidate, const GroupSpec& spec,
                       const Outcome& outcome, const EvalConfig& cfg) {
    if (original.schema() != candidate.schema() || original.rows() != candidate.rows())
        throw DataError("evaluated dataset must share the original's schema and rows");
    const Groups groups = resolve(original, spec);
    const auto reference = outcome.indicator(original);

    MetricsReport r;
    const auto scores = classifier_scores(candidate, reference, groups, outcome, spec.attributes(), cfg);
    r.accuracy = scores.accuracy;
    r.f1 = scores.f1;
    r.accuracy_diff = scores.accuracy_diff;
    r.fnr_diff = scores.fnr_diff;
    r.fpr_diff = scores.fpr_diff;
    r.warnings = scores.warnings;
    r.fourfold = fourfold(candidate, groups, outcome);
    r.parity_diff = std::abs(r.fourfold.a_favorable - r.fourfold.b_favorable) / 100.0;
    r.individual_bias = individual_bias(candidate, outcome.column, cfg.k, cfg.threads);
    r.distortion = distortion(original, candidate);
    return r;
}

Comparison compare(const Dataset& original, const Dataset& debiased, const GroupSpec& groups, const Outcome& outcome,
                   const EvalConfig& cfg) {
    Comparison c;
    c.original = evaluate(original, original, groups, outcome, cfg);
    c.debiased = evaluate(original, debiased, groups, outcome, cfg);
    c.group_a = groups.name_a(original);
    c.group_b = groups.name_b(original);
    return c;
}

}  // namespace causalfair::metrics
