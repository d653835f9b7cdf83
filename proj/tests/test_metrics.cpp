#include "causalfair/error.hpp"
#include "causalfair/metrics.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace causalfair;
using namespace causalfair::metrics;

namespace {

// Group column g{A,B}, feature x, label y{no,yes}.
tabular::Dataset small(const std::vector<int>& g, const std::vector<double>& x, const std::vector<int>& y) {
    std::vector<std::vector<double>> c(3);
    for (std::size_t i = 0; i < g.size(); ++i) {
        c[0].push_back(g[i]);
        c[1].push_back(x[i]);
        c[2].push_back(y[i]);
    }
    return tabular::Dataset("m", {fixtures::nominal("g", {"A", "B"}), fixtures::numeric("x"),
                                  fixtures::nominal("y", {"no", "yes"}, "yes")},
                            std::move(c), std::string("y"));
}

// Biased toy with one informative feature besides the group.
tabular::Dataset biased(std::size_t n, std::uint64_t seed) {
    rng::Stream s(seed);
    std::vector<int> g, y;
    std::vector<double> x;
    for (std::size_t i = 0; i < n; ++i) {
        g.push_back(s.uniform() < 0.6 ? 1 : 0);
        x.push_back(s.normal());
        const double eta = -0.5 + 1.2 * g.back() + x.back();
        y.push_back(s.uniform() < 1 / (1 + std::exp(-eta)) ? 1 : 0);
    }
    return small(g, x, y);
}

EvalConfig eval_config() {
    EvalConfig c;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("parity and fourfold") {
    const auto d = small({0, 0, 0, 0, 1, 1, 1, 1}, {1, 2, 3, 4, 5, 6, 7, 8}, {1, 1, 1, 0, 1, 0, 0, 0});
    const auto groups = resolve(d, GroupSpec::sensitive("g"));
    const auto outcome = Outcome::of(d);
    CHECK(parity_diff(d, groups, outcome) == doctest::Approx(0.5));
    const auto f = fourfold(d, groups, outcome);
    CHECK(f.a_favorable == doctest::Approx(75.0));
    CHECK(f.b_favorable == doctest::Approx(25.0));
    CHECK(f.a_favorable + f.a_unfavorable == doctest::Approx(100.0));
    CHECK(f.b_favorable + f.b_unfavorable == doctest::Approx(100.0));
    CHECK(std::abs(f.a_favorable - f.b_favorable) / 100.0 == doctest::Approx(parity_diff(d, groups, outcome)));
    CHECK(groups.name_a == "g = A");
    // swapping the groups leaves the gap unchanged
    const Groups swapped{groups.b, groups.a, groups.name_b, groups.name_a};
    CHECK(parity_diff(d, swapped, outcome) == parity_diff(d, groups, outcome));

    const auto same = small({0, 0, 1, 1}, {1, 2, 3, 4}, {1, 0, 1, 0});
    CHECK(parity_diff(same, resolve(same, GroupSpec::sensitive("g")), Outcome::of(same)) == 0.0);
}

TEST_CASE("group resolution errors") {
    const auto d = small({0, 0, 0, 0}, {1, 2, 3, 4}, {1, 0, 1, 0});
    CHECK_THROWS_WITH_AS(resolve(d, GroupSpec::sensitive("g")), doctest::Contains("g = B"), DataError);
    CHECK_THROWS_AS(resolve(d, GroupSpec::sensitive("x")), DataError);
    Predicate a{{Condition{"x", {}, {{1, 3}}}}}, b{{Condition{"x", {}, {{3, 4}}}}};
    CHECK_THROWS_WITH_AS(resolve(d, GroupSpec::custom(a, b)), doctest::Contains("overlap"), DataError);
    Predicate bad{{Condition{"x", {"A"}, {}}}};
    CHECK_THROWS_AS(resolve(d, GroupSpec::custom(bad, b)), DataError);
}

TEST_CASE("custom groups combine attributes") {
    const auto d = small({0, 0, 1, 1, 0, 1}, {20, 30, 35, 50, 45, 25}, {1, 0, 1, 0, 1, 0});
    // A: g=A and 24 <= x <= 40 ; B: g=B or not, x in [41, 60]
    Predicate a{{Condition{"g", {"A"}, {}}, Condition{"x", {}, {{24, 40}}}}};
    Predicate b{{Condition{"x", {}, {{41, 60}}}}};
    const auto gs = GroupSpec::custom(a, b);
    CHECK(gs.attributes() == std::set<std::string>{"g", "x"});
    const auto r = resolve(d, gs);
    CHECK(r.a == std::vector<char>{0, 1, 0, 0, 0, 0});
    CHECK(r.b == std::vector<char>{0, 0, 0, 1, 1, 0});
}

TEST_CASE("outcome must be binary nominal") {
    const auto d = fixtures::five_node_sem(20, 1);
    CHECK_THROWS_AS(Outcome::of(d), DataError);
    CHECK_THROWS_AS(Outcome::of(d, std::string("A"), std::string("x")), DataError);
    const auto g = fixtures::gender_job(20, 1);
    CHECK_THROWS_AS(Outcome::of(g, std::string("Job"), std::string("Maybe")), DataError);
    CHECK(Outcome::of(g).favorable == "Yes");
}

TEST_CASE("individual bias") {
    SUBCASE("identical labels give 0") {
        const auto d = small({0, 1, 0, 1, 0, 1, 0}, {1, 2, 3, 4, 5, 6, 7}, {1, 1, 1, 1, 1, 1, 1});
        CHECK(individual_bias(d, "y", 3) == 0.0);
    }
    SUBCASE("duplicates with equal labels, k = 1") {
        const auto d = small({0, 0, 1, 1, 0, 0}, {1, 1, 5, 5, 9, 9}, {1, 1, 0, 0, 1, 1});
        CHECK(individual_bias(d, "y", 1) == 0.0);
    }
    SUBCASE("interleaved identical features, 50/50 labels") {
        // two clusters of 6 identical rows, labels alternate inside each; every
        // point's 5 neighbours come from its own cluster.
        std::vector<int> g, y;
        std::vector<double> x;
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 6; ++i) g.push_back(c), x.push_back(c * 100.0), y.push_back(i % 2);
        const auto d = small(g, x, y);
        const double b = individual_bias(d, "y", 5);
        CHECK(std::abs(b - 0.5) <= 0.2 + 1e-12);
        // exact: among the 5 others in a cluster of 3 + 3, 3 carry the other label
        CHECK(b == doctest::Approx(0.6));
    }
    SUBCASE("row permutation and thread invariance") {
        // continuous feature, so no distance ties
        const auto d = biased(300, 2);
        std::vector<std::size_t> perm(300);
        std::iota(perm.begin(), perm.end(), 0);
        rng::Stream s(1);
        s.shuffle(perm);
        const double b = individual_bias(d, "y", 5);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
        CHECK(individual_bias(d.select_rows(perm), "y", 5) == doctest::Approx(b).epsilon(1e-12));
        CHECK(individual_bias(d, "y", 5, 4) == b);
    }
    CHECK_THROWS_AS(individual_bias(small({0, 1}, {1, 2}, {0, 1}), "y", 5), DataError);
}

TEST_CASE("distortion") {
    const auto d = fixtures::gender_job(100, 3);
    CHECK(distortion(d, d) == 0.0);
    std::vector<double> flipped(d.column(1).begin(), d.column(1).end());
    for (std::size_t i = 0; i < 50; ++i) flipped[i] = 1 - flipped[i];
    CHECK(distortion(d, d.with_column(1, flipped)) == doctest::Approx(0.5 / 2));
    CHECK_THROWS_AS(distortion(d, fixtures::five_node_sem(100, 1)), DataError);
}

TEST_CASE("perfect predictor has no group gaps") {
    // x equals the label, so every learner predicts it exactly
    std::vector<int> g, y;
    std::vector<double> x;
    rng::Stream s(4);
    for (int i = 0; i < 200; ++i) {
        g.push_back(static_cast<int>(s.index(2)));
        y.push_back(static_cast<int>(s.index(2)));
        x.push_back(y.back());
    }
    const auto d = small(g, x, y);
    const auto groups = resolve(d, GroupSpec::sensitive("g"));
    const auto outcome = Outcome::of(d);
    const auto ref = outcome.indicator(d);
    const auto r = classifier_scores(d, ref, groups, outcome, {"g"}, eval_config());
    CHECK(r.accuracy == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.accuracy_diff == 0.0);
    CHECK(r.fnr_diff == 0.0);
    CHECK(r.fpr_diff == 0.0);
}

TEST_CASE("constant positive classifier") {
    std::vector<int> g, y;
    std::vector<double> x;
    rng::Stream s(5);
    for (int i = 0; i < 100; ++i) g.push_back(i % 2), x.push_back(s.normal()), y.push_back(1);
    const auto d = small(g, x, y);
    const auto groups = resolve(d, GroupSpec::sensitive("g"));
    const auto outcome = Outcome::of(d);
    const auto ref = outcome.indicator(d);
    const auto r = classifier_scores(d, ref, groups, outcome, {"g"}, eval_config());
    CHECK(r.fnr_diff == 0.0);
    CHECK(r.fpr_diff == 0.0);
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("permuted training labels give majority-rate accuracy") {
    rng::Stream s(6);
    std::vector<int> g, y;
    std::vector<double> x;
    for (int i = 0; i < 2000; ++i) {
        g.push_back(static_cast<int>(s.index(2)));
        x.push_back(s.normal());
        y.push_back(s.uniform() < 0.7 ? 1 : 0);
    }
    const auto d = small(g, x, y);
    std::vector<double> shuffled(d.column(2).begin(), d.column(2).end());
    s.shuffle(shuffled);
    const auto train = d.with_column(2, shuffled);
    const auto groups = resolve(d, GroupSpec::sensitive("g"));
    const auto outcome = Outcome::of(d);
    const auto ref = outcome.indicator(d);
    const auto r = classifier_scores(train, ref, groups, outcome, {"g"}, eval_config());
    CHECK(std::abs(r.accuracy - 0.7) <= 0.05);
}

TEST_CASE("evaluation is deterministic and symmetric in group order") {
    const auto d = biased(600, 8);
    const auto outcome = Outcome::of(d);
    const auto a = evaluate(d, d, GroupSpec::sensitive("g"), outcome, eval_config());
    const auto b = evaluate(d, d, GroupSpec::sensitive("g"), outcome, eval_config());
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.fnr_diff == b.fnr_diff);
    CHECK(a.distortion == 0.0);
    CHECK(a.parity_diff == doctest::Approx(std::abs(a.fourfold.a_favorable - a.fourfold.b_favorable) / 100.0));

    Predicate male{{Condition{"g", {"B"}, {}}}}, female{{Condition{"g", {"A"}, {}}}};
    const auto c = evaluate(d, d, GroupSpec::custom(male, female), outcome, eval_config());
    CHECK(c.parity_diff == doctest::Approx(a.parity_diff));
    CHECK(c.accuracy_diff == doctest::Approx(a.accuracy_diff));
    CHECK(c.fpr_diff == doctest::Approx(a.fpr_diff));
}

TEST_CASE("compare reports both sides") {
    const auto d = biased(400, 9);
    std::vector<double> y(d.column(2).begin(), d.column(2).end());
    for (std::size_t i = 0; i < y.size(); i += 7) y[i] = 1 - y[i];
    const auto deb = d.with_column(2, y);
    const auto c = compare(d, deb, GroupSpec::sensitive("g"), Outcome::of(d), eval_config());
    CHECK(c.original.distortion == 0.0);
    CHECK(c.debiased.distortion > 0.0);
    CHECK(c.group_a == "g = A");
    CHECK(c.group_b == "g = B");
}

TEST_CASE("eval config validation") {
    EvalConfig c;
    c.splits = 0;
    CHECK_THROWS_AS(c.validate(), DataError);
}
