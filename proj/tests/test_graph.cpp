#include "causalfair/error.hpp"
#include "causalfair/graph.hpp"
#include "fixtures.hpp"

#include <doctest.h>

using namespace causalfair;
using namespace causalfair::graph;

namespace {

// Five-node fixture: s -> b, s -> c, a -> y, b -> y, c -> y.
std::shared_ptr<const tabular::Dataset> abcsy(std::size_t n, std::uint64_t seed) {
    rng::Stream r(seed);
    std::vector<std::vector<double>> c(5, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = r.normal(), s = r.uniform() < 0.5 ? 1 : 0;
        const double b = 0.8 * s + r.normal(), cc = -0.6 * s + r.normal();
        const double y = 0.5 * a + 0.7 * b + 0.4 * cc + r.normal();
        c[0][i] = a, c[1][i] = b, c[2][i] = cc, c[3][i] = s, c[4][i] = y;
    }
    return std::make_shared<const tabular::Dataset>(
        "five",
        std::vector<tabular::ColumnSpec>{fixtures::numeric("a"), fixtures::numeric("b"), fixtures::numeric("c"),
                                         fixtures::nominal("s", {"f", "m"}), fixtures::numeric("y")},
        std::move(c));
}

CausalModel five_model(std::uint64_t seed = 1) {
    auto d = abcsy(500, seed);
    return CausalModel(d, fixtures::dag(d->column_names(), {{"s", "b"}, {"s", "c"}, {"a", "y"}, {"b", "y"}, {"c", "y"}}));
}

}  // namespace

TEST_CASE("slider to alpha") {
    CHECK(alpha_from_slider(-35) == doctest::Approx(0.65));
    CHECK(alpha_from_slider(35) == doctest::Approx(1.35));
    CHECK(alpha_from_slider(-100) == 0.0);
    CHECK_THROWS_AS(alpha_from_slider(101), EditError);
    CHECK_THROWS_AS(alpha_from_slider(-100.5), EditError);
}

TEST_CASE("models exist only for endogenous nodes") {
    const auto m = five_model();
    CHECK(m.node_models().size() == 3);
    CHECK(m.node_models().count("y"));
    CHECK_FALSE(m.node_models().count("s"));
    CHECK(m.topological_order().front() == "a");
}

TEST_CASE("refine edits and acyclicity") {
    auto m = five_model();
    SUBCASE("cycle is rejected with a witness") {
        try {
            m.apply_refine(EditOp::add, "y", "s");
            FAIL("expected a cycle rejection");
        } catch (const EditError& e) {
            // closed walk through the proposed edge y -> s
            REQUIRE(e.cycle().size() >= 3);
            CHECK(e.cycle().front() == "y");
            CHECK(e.cycle()[1] == "s");
            CHECK(e.cycle().back() == "y");
        }
        CHECK(m.log().empty());
    }
    SUBCASE("unknown edges and nodes") {
        CHECK_THROWS_AS(m.apply_refine(EditOp::remove, "a", "b"), EditError);
        CHECK_THROWS_AS(m.apply_refine(EditOp::reverse, "y", "a"), EditError);
        CHECK_THROWS_AS(m.apply_refine(EditOp::direct, "s", "b"), EditError);
        CHECK_THROWS_AS(m.apply_refine(EditOp::add, "a", "zz"), Error);
        CHECK_THROWS_AS(m.apply_refine(EditOp::set_alpha, "s", "b"), StageError);
    }
    SUBCASE("add then delete restores the start") {
        const auto start = m.edges();
        const double d1 = m.apply_refine(EditOp::add, "a", "b");
        const double d2 = m.apply_refine(EditOp::remove, "a", "b");
        CHECK(m.edges() == start);
        CHECK(d1 + d2 == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(m.log().size() == 2);
    }
    SUBCASE("reverse swaps direction") {
        m.apply_refine(EditOp::reverse, "s", "b");
        const auto* e = m.find_edge("s", "b");
        REQUIRE(e);
        CHECK(e->source == "b");
        CHECK(e->target == "s");
        CHECK(m.node_models().count("s"));
    }
    SUBCASE("adding a true edge improves BIC") {
        auto d = abcsy(2000, 3);
        CausalModel mm(d, fixtures::dag(d->column_names(), {{"s", "b"}, {"s", "c"}, {"a", "y"}, {"c", "y"}}));
        CHECK(mm.apply_refine(EditOp::add, "b", "y") < 0);
    }
}

TEST_CASE("direct an undirected edge") {
    auto d = abcsy(300, 2);
    discovery::Cpdag g(d->column_names());
    g.add_undirected(g.index_of("a"), g.index_of("y"));
    CausalModel m(d, g);
    CHECK(m.node_models().empty());  // undirected edges are not fitted
    m.apply_refine(EditOp::direct, "a", "y");
    CHECK(m.find_edge("a", "y")->state == EdgeState::directed);
    CHECK(m.node_models().count("y"));
}

TEST_CASE("debias edits") {
    auto m = five_model();
    CHECK_THROWS_AS(m.apply_debias(EditOp::remove, "s", "b"), StageError);
    m.enter_debias();
    CHECK_THROWS_AS(m.apply_refine(EditOp::add, "a", "b"), StageError);
    CHECK_THROWS_AS(m.apply_debias(EditOp::set_alpha, "s", "b"), EditError);  // slider missing
    CHECK_THROWS_AS(m.apply_debias(EditOp::set_alpha, "s", "b", 150.0), EditError);
    CHECK_THROWS_AS(m.apply_debias(EditOp::reverse, "s", "b"), Error);

    m.apply_debias(EditOp::set_alpha, "s", "c", -35.0);
    CHECK(m.find_edge("s", "c")->alpha == doctest::Approx(0.65));
    m.apply_debias(EditOp::set_alpha, "s", "b", -100.0);
    CHECK_FALSE(m.find_edge("s", "b"));
    CHECK(m.log().records().back().op == EditOp::remove);
    CHECK(m.parent_alphas("b").at("s") == 0.0);
    CHECK(m.debias_footprint() == std::set<std::string>{"b", "c", "y"});
}

TEST_CASE("debias on an undirected edge is rejected") {
    auto d = abcsy(300, 2);
    discovery::Cpdag g(d->column_names());
    g.add_undirected(g.index_of("a"), g.index_of("y"));
    CausalModel m(d, g);
    m.enter_debias();
    CHECK_THROWS_AS(m.apply_debias(EditOp::remove, "a", "y"), EditError);
}

TEST_CASE("footprint is empty without debias edits and grows monotonically") {
    auto m = five_model();
    m.enter_debias();
    CHECK(m.debias_footprint().empty());
    m.apply_debias(EditOp::set_alpha, "c", "y", 20.0);
    const auto f1 = m.debias_footprint();
    CHECK(f1 == std::set<std::string>{"y"});
    m.apply_debias(EditOp::remove, "s", "b");
    const auto f2 = m.debias_footprint();
    for (const auto& v : f1) CHECK(f2.count(v));
}

TEST_CASE("find_paths enumerates simple paths in order") {
    auto d = abcsy(200, 5);
    CausalModel m(d, fixtures::dag(d->column_names(), {{"s", "b"}, {"s", "c"}, {"b", "y"}, {"c", "y"}}));
    const auto p = m.find_paths("s", "y");
    REQUIRE(p.size() == 2);
    CHECK(p[0] == std::vector<std::string>{"s", "b", "y"});
    CHECK(p[1] == std::vector<std::string>{"s", "c", "y"});
    CHECK(m.find_paths("y", "s").empty());
    CHECK(m.find_paths("a", "y").empty());
    for (const auto& path : p)
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            const auto* e = m.find_edge(path[i], path[i + 1]);
            REQUIRE(e);
            CHECK(e->source == path[i]);
        }
}

TEST_CASE("replaying the log reproduces the model") {
    auto d = abcsy(400, 9);
    const auto cp = fixtures::dag(d->column_names(), {{"s", "b"}, {"s", "c"}, {"a", "y"}, {"b", "y"}, {"c", "y"}});
    CausalModel m(d, cp);
    m.apply_refine(EditOp::add, "a", "c");
    m.apply_refine(EditOp::remove, "c", "y");
    m.apply_refine(EditOp::reverse, "a", "y");
    m.enter_debias();
    m.apply_debias(EditOp::set_alpha, "s", "b", 40.0);
    m.apply_debias(EditOp::add, "b", "c");
    const auto r = CausalModel::replay(d, cp, m.log());
    CHECK(r.same_structure(m));
    CHECK(r.log() == m.log());
    CHECK(r.fit().total_bic == m.fit().total_bic);
}

TEST_CASE("reset to refined drops debias records") {
    auto m = five_model();
    m.apply_refine(EditOp::add, "a", "b");
    m.enter_debias();
    const auto edges = m.edges();
    m.apply_debias(EditOp::remove, "s", "b");
    m.reset_to_refined();
    CHECK(m.edges() == edges);
    CHECK(m.log().size() == 1);
    CHECK(m.stage() == Stage::debias);
}

TEST_CASE("alpha stays 1 while refining; deleted edges are not stored") {
    auto m = five_model();
    m.apply_refine(EditOp::add, "a", "c");
    for (const auto& e : m.edges()) CHECK(e.alpha == 1.0);
    m.enter_debias();
    m.apply_debias(EditOp::remove, "a", "c");
    for (const auto& e : m.edges()) CHECK(e.alpha != 0.0);
}
