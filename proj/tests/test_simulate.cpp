#include "causalfair/error.hpp"
#include "causalfair/simulate.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace causalfair;
using namespace causalfair::simulate;

namespace {

std::pair<double, double> moments(std::span<const double> v) {
    double m = 0, q = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) q += (x - m) * (x - m);
    return {m, std::sqrt(q / static_cast<double>(v.size()))};
}

std::shared_ptr<const tabular::Dataset> five_data(std::size_t n, std::uint64_t seed) {
    rng::Stream r(seed);
    std::vector<std::vector<double>> c(5, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = r.normal(), s = r.uniform() < 0.5 ? 1 : 0;
        const double b = 0.8 * s + r.normal(), cc = -0.6 * s + r.normal();
        const double y = 0.5 * a + 0.7 * b + 0.4 * cc + r.normal() > 0.3 ? 1 : 0;
        c[0][i] = a, c[1][i] = b, c[2][i] = cc, c[3][i] = s, c[4][i] = y;
    }
    return std::make_shared<const tabular::Dataset>(
        "five",
        std::vector<tabular::ColumnSpec>{fixtures::numeric("a"), fixtures::numeric("b"), fixtures::numeric("c"),
                                         fixtures::nominal("s", {"f", "m"}), fixtures::nominal("y", {"no", "yes"})},
        std::move(c), std::string("y"));
}

graph::CausalModel fig2_model(const std::shared_ptr<const tabular::Dataset>& d) {
    return graph::CausalModel(d, fixtures::dag(d->column_names(),
                                               {{"s", "b"}, {"s", "c"}, {"a", "y"}, {"b", "y"}, {"c", "y"}}));
}

}  // namespace

TEST_CASE("config validation") {
    SimulationConfig c;
    CHECK_NOTHROW(c.validate());
    c.rescale_lr = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.rescale_lr = 0.1;
    c.rescale_max_iters = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("alpha 1 reproduces the fitted prediction and consumes no noise") {
    const auto d = fixtures::five_node_sem(300, 1);
    const auto m = sem::fit_node(d, "C", {"A", "B"});
    const auto noise = noise_spec(m, d);
    const auto s1 = simulate_node(m, {{"A", 1.0}, {"B", 1.0}}, d, noise, 1);
    const auto s2 = simulate_node(m, {}, d, noise, 99);
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const double pred = m.intercept(0) + m.coefficients(0, 0) * d.at(i, 0) + m.coefficients(1, 0) * d.at(i, 1);
        CHECK(s1.values[i] == doctest::Approx(pred).epsilon(1e-12));
        CHECK(s1.values[i] == s2.values[i]);
    }
}

TEST_CASE("alpha 0 predicts from noise with the parent's distribution") {
    const auto d = fixtures::five_node_sem(4000, 2);
    const auto m = sem::fit_node(d, "D", {"C"});
    const auto noise = noise_spec(m, d);
    const auto [mc, sc] = moments(d.column(2));
    CHECK(noise.mean[0] == doctest::Approx(mc));
    CHECK(noise.std[0] == doctest::Approx(sc));
    const auto s = simulate_node(m, {{"C", 0.0}}, d, noise, 7);
    const auto [ms, ss] = moments(s.values);
    const double beta = m.coefficients(0, 0);
    CHECK(ms == doctest::Approx(m.intercept(0) + beta * mc).epsilon(0.05));
    CHECK(ss == doctest::Approx(std::abs(beta) * sc).epsilon(0.05));
    // independent of the parent's observed values
    double cov = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) cov += (s.values[i] - ms) * (d.at(i, 2) - mc);
    CHECK(std::abs(cov / 4000.0 / (ss * sc)) < 0.05);
}

TEST_CASE("simulate_node is deterministic and thread independent") {
    const auto d = fixtures::gender_job(3000, 4);
    const auto m = sem::fit_node(d, "Job", {"Gender"});
    const auto noise = noise_spec(m, d);
    const auto a = simulate_node(m, {{"Gender", 0.3}}, d, noise, 5, 1);
    const auto b = simulate_node(m, {{"Gender", 0.3}}, d, noise, 5, 4);
    REQUIRE(a.prob_mat.cols() == 2);
    CHECK(a.prob_mat == b.prob_mat);
    for (Eigen::Index i = 0; i < a.prob_mat.rows(); ++i) CHECK(std::abs(a.prob_mat.row(i).sum() - 1.0) < 1e-12);
    const auto c = simulate_node(m, {{"Gender", 0.3}}, d, noise, 6, 1);
    CHECK(a.prob_mat != c.prob_mat);
}

TEST_CASE("rescale_numeric") {
    const std::vector<double> orig{1, 2, 3, 4, 10};
    const auto same = rescale_numeric(orig, orig);
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(same.values[i] == doctest::Approx(orig[i]).epsilon(1e-12));
    std::vector<double> twice;
    for (double v : orig) twice.push_back(2 * v);
    const auto back = rescale_numeric(twice, orig);
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(back.values[i] == doctest::Approx(orig[i]).epsilon(1e-12));
    const std::vector<double> flat{3, 3, 3, 3, 3};
    const auto deg = rescale_numeric(flat, orig);
    CHECK(deg.degenerate);
    for (double v : deg.values) CHECK(v == 4.0);
}

TEST_CASE("rescale_categorical examples") {
    SimulationConfig cfg;
    SUBCASE("already matching marginal exits at once") {
        Eigen::MatrixXd pm(4, 2);
        pm << 0.9, 0.1, 0.2, 0.8, 0.7, 0.3, 0.4, 0.6;
        const std::vector<double> orig{1, 0, 0, 1};
        const auto r = rescale_categorical(pm, orig, cfg);
        CHECK(r.iterations == 0);
        CHECK(r.labels == argmax_rows(pm));
    }
    SUBCASE("uniform matrix with a skewed original moves toward it") {
        const std::size_t n = 100;
        Eigen::MatrixXd pm = Eigen::MatrixXd::Constant(n, 2, 0.5);
        std::vector<double> orig(n, 0.0);
        for (std::size_t i = 0; i < 10; ++i) orig[i] = 1;
        const auto r = rescale_categorical(pm, orig, cfg);
        const auto dist = distribution(r.labels, 2);
        CHECK(std::abs(dist[0] - 0.9) + std::abs(dist[1] - 0.1) < 0.8);
    }
    SUBCASE("absent level uses the floor and warns") {
        Eigen::MatrixXd pm(10, 2);
        for (int i = 0; i < 10; ++i) pm.row(i) << 0.6 - 0.01 * i, 0.4 + 0.01 * i;
        std::vector<double> orig(10, 0.0);
        for (std::size_t i = 0; i < 5; ++i) orig[i] = 1;
        const auto r = rescale_categorical(pm, orig, cfg);
        CHECK_FALSE(r.warnings.empty());
        CHECK(r.final_l1 <= r.initial_l1);
    }
}

TEST_CASE("argmax ties go to the lowest level") {
    Eigen::MatrixXd m(2, 3);
    m << 0.4, 0.4, 0.2, 0.1, 0.45, 0.45;
    CHECK(argmax_rows(m) == std::vector<double>{0, 1});
    const std::vector<double> codes{0, 2, 2, 1};
    CHECK(distribution(codes, 3) == std::vector<double>{0.25, 0.25, 0.5});
}

TEST_CASE("empty debias log returns the data unchanged") {
    const auto d = five_data(400, 1);
    auto m = fig2_model(d);
    m.enter_debias();
    const auto r = generate_debiased(*d, m, {});
    CHECK(r.data.same_content(*d));
    CHECK(r.simulated.empty());
}

TEST_CASE("edits on the five-node fixture simulate exactly the footprint") {
    const auto d = five_data(2000, 2);
    auto m = fig2_model(d);
    m.enter_debias();
    m.apply_debias(graph::EditOp::remove, "s", "b");
    m.apply_debias(graph::EditOp::set_alpha, "s", "c", -50.0);
    SimulationConfig cfg;
    cfg.seed = 3;
    const auto r = generate_debiased(*d, m, cfg);
    CHECK(r.simulated == std::set<std::string>{"b", "c", "y"});
    for (const char* col : {"a", "s"}) {
        const auto j = d->index_of(col);
        const auto x = d->column(j), y = r.data.column(j);
        CHECK(std::equal(x.begin(), x.end(), y.begin()));
    }
    for (const char* col : {"b", "c", "y"}) {
        const auto j = d->index_of(col);
        const auto x = d->column(j), y = r.data.column(j);
        CHECK_FALSE(std::equal(x.begin(), x.end(), y.begin()));
    }
    for (const char* col : {"b", "c"}) {
        const auto j = d->index_of(col);
        const auto [m0, s0] = moments(d->column(j));
        const auto [m1, s1] = moments(r.data.column(j));
        CHECK(std::abs(m0 - m1) < 1e-9);
        CHECK(std::abs(s0 - s1) < 1e-9);
    }
    // deleting s -> b removes the dependence of b on s
    const auto jb = d->index_of("b"), js = d->index_of("s");
    double m_s1 = 0, m_s0 = 0, n1 = 0;
    for (std::size_t i = 0; i < d->rows(); ++i) {
        if (d->at(i, js) == 1) m_s1 += r.data.at(i, jb), ++n1;
        else m_s0 += r.data.at(i, jb);
    }
    CHECK(std::abs(m_s1 / n1 - m_s0 / (2000 - n1)) < 0.15);

    const auto again = generate_debiased(*d, m, cfg);
    CHECK(again.data.same_content(r.data));
    cfg.threads = 4;
    CHECK(generate_debiased(*d, m, cfg).data.same_content(r.data));
}

TEST_CASE("touching an edge with alpha 1 injects no randomness") {
    const auto d = fixtures::five_node_sem(500, 5);
    auto data = std::make_shared<const tabular::Dataset>(d);
    graph::CausalModel m(data, fixtures::dag(d.column_names(), fixtures::five_node_truth()));
    m.enter_debias();
    m.apply_debias(graph::EditOp::set_alpha, "D", "E", 0.0);
    SimulationConfig c1, c2;
    c1.seed = 1;
    c2.seed = 2;
    const auto r1 = generate_debiased(d, m, c1), r2 = generate_debiased(d, m, c2);
    CHECK(r1.data.same_content(r2.data));
    // E is its model's prediction, rescaled to E's moments
    const auto& em = m.node_models().at("E");
    std::vector<double> pred(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        pred[i] = em.intercept(0);
        for (std::size_t p = 0; p < em.parents.size(); ++p)
            pred[i] += em.coefficients(static_cast<Eigen::Index>(p), 0) * d.at(i, d.index_of(em.parents[p]));
    }
    const auto expected = rescale_numeric(pred, d.column(4)).values;
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK(r1.data.at(i, 4) == doctest::Approx(expected[i]).epsilon(1e-9));
}

TEST_CASE("toy gender/job deletion balances the groups") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto d = std::make_shared<const tabular::Dataset>(fixtures::gender_job(4000, 300 + seed));
        graph::CausalModel m(d, fixtures::dag({"Gender", "Job"}, {{"Gender", "Job"}}));
        m.enter_debias();
        m.apply_debias(graph::EditOp::remove, "Gender", "Job");
        SimulationConfig cfg;
        cfg.seed = seed;
        const auto r = generate_debiased(*d, m, cfg);
        double y[2] = {0, 0}, n[2] = {0, 0};
        for (std::size_t i = 0; i < d->rows(); ++i) {
            const int g = d->code(i, 0);
            n[g] += 1;
            y[g] += r.data.at(i, 1);
        }
        if (std::abs(y[0] / n[0] - y[1] / n[1]) <= 0.05) ++ok;
    }
    CHECK(ok >= 18);
}
