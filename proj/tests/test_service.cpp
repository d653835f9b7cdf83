#include "causalfair/json_io.hpp"
#include "causalfair/service.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <thread>

using namespace causalfair;
using io::Json;
using service::Response;
using service::SessionService;

namespace {

/// Gender -> Job <- Skill; discovery orients both edges from the collider.
std::string hiring_csv(std::size_t n, std::uint64_t seed) {
    rng::Stream s(seed);
    std::vector<std::vector<double>> c(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const bool male = s.uniform() < 0.6;
        const double skill = s.normal();
        const double eta = -0.5 + 1.2 * male + 1.5 * skill;
        c[0][i] = male;
        c[1][i] = skill;
        c[2][i] = s.uniform() < 1.0 / (1.0 + std::exp(-eta));
    }
    tabular::Dataset d("toy",
                       {fixtures::nominal("Gender", {"Female", "Male"}), fixtures::numeric("Skill"),
                        fixtures::nominal("Job", {"No", "Yes"}, "Yes")},
                       std::move(c), std::string("Job"));
    return tabular::to_csv(d);
}

struct Client {
    SessionService& svc;
    std::string id;
    std::int64_t rev = 0;

    Response post(const std::string& action, Json body = Json::object()) {
        body["revision"] = ++rev;
        return svc.handle("POST", "/sessions/" + id + "/" + action, body.dump());
    }
    Response get(const std::string& action) { return svc.handle("GET", "/sessions/" + id + "/" + action, ""); }
};

Json body(const Response& r) { return Json::parse(r.body); }

Client open(SessionService& svc) {
    const Response r = svc.handle("POST", "/sessions", "");
    REQUIRE(r.status == 201);
    return {svc, body(r)["id"].get<std::string>()};
}

/// Session with data loaded and the model discovered.
Client discovered(SessionService& svc, std::uint64_t seed = 1) {
    Client c = open(svc);
    Json schema{{"label", "Job"}, {"favorable", "Yes"}};
    REQUIRE(c.post("dataset", {{"csv", hiring_csv(1500, seed)}, {"schema", schema}}).status == 200);
    REQUIRE(c.post("config", {{"group", "Gender"}, {"seed", 5}, {"splits", 1}}).status == 200);
    const Response r = c.post("discover");
    REQUIRE(r.status == 200);
    return c;
}

const Json* edge(const Json& graph, const std::string& s, const std::string& t) {
    for (const auto& e : graph["edges"])
        if (e["source"] == s && e["target"] == t) return &e;
    return nullptr;
}

}  // namespace

TEST_CASE("session lifecycle") {
    SessionService svc;
    Client c = open(svc);
    CHECK(svc.session_count() == 1);
    const Json status = body(c.svc.handle("GET", "/sessions/" + c.id, ""));
    CHECK(status["stage"] == "empty");
    CHECK(status["revision"] == 0);
    CHECK(body(svc.handle("GET", "/sessions", ""))["sessions"] == Json::array({c.id}));
    CHECK(svc.handle("DELETE", "/sessions/" + c.id, "").status == 200);
    CHECK(svc.session_count() == 0);
    CHECK(svc.handle("GET", "/sessions/" + c.id, "").status == 404);
}

TEST_CASE("status codes") {
    SessionService svc;
    Client c = open(svc);

    const Response unknown = svc.handle("GET", "/sessions/nope/graph", "");
    CHECK(unknown.status == 404);
    CHECK(body(unknown)["status"] == 404);
    CHECK(svc.handle("GET", "/elsewhere", "").status == 404);
    CHECK(c.get("no-such-action").status == 404);
    CHECK(svc.handle("PUT", "/sessions", "").status == 405);
    CHECK(svc.handle("GET", "/sessions/" + c.id + "/discover", "").status == 405);
    CHECK(svc.handle("POST", "/sessions/" + c.id + "/graph", "{}").status == 405);

    CHECK(svc.handle("POST", "/sessions/" + c.id + "/config", "{not json").status == 400);
    CHECK(svc.handle("POST", "/sessions/" + c.id + "/config", "[1]").status == 400);
    CHECK(svc.handle("POST", "/sessions/" + c.id + "/config", "{}").status == 400);  // no revision

    CHECK(c.post("discover").status == 422);  // no data yet
    CHECK(c.post("config", {{"p_value", 2.0}}).status == 422);
    CHECK(c.post("dataset", {{"csv", "a,b\n1\n"}}).status == 422);
}

TEST_CASE("revisions must increase") {
    SessionService svc;
    Client c = open(svc);
    CHECK(c.post("config", {{"seed", 3}}).status == 200);
    c.rev = 0;  // the next post replays revision 1
    const Response stale = c.post("config", {{"seed", 4}});
    CHECK(stale.status == 409);
    CHECK(body(c.svc.handle("GET", "/sessions/" + c.id, ""))["config"]["seed"] == 3);
    c.rev = 10;
    const Response later = c.post("config", {{"seed", 4}});
    CHECK(later.status == 200);
    CHECK(body(later)["revision"] == 11);
    c.rev = 5;
    CHECK(c.post("config", {{"seed", 9}}).status == 409);
}

TEST_CASE("a rejected call changes nothing") {
    SessionService svc;
    Client c = open(svc);
    REQUIRE(c.post("config", {{"seed", 3}, {"k", 7}}).status == 200);
    CHECK(c.post("config", {{"seed", 8}, {"k", 0}}).status == 422);
    const Json cfg = body(c.svc.handle("GET", "/sessions/" + c.id, ""))["config"];
    CHECK(cfg["seed"] == 3);
    CHECK(cfg["k"] == 7);
    // The failed call did not consume its revision.
    CHECK(body(c.svc.handle("GET", "/sessions/" + c.id, ""))["revision"] == 1);
}

TEST_CASE("dataset guardrails") {
    service::ServiceConfig cfg;
    cfg.max_rows = 100;
    SessionService svc(cfg);
    Client c = open(svc);
    const Response r = c.post("dataset", {{"csv", hiring_csv(200, 2)}});
    CHECK(r.status == 422);
    CHECK(body(r)["error"].get<std::string>().find("limit") != std::string::npos);
    CHECK(c.post("dataset", {{"csv", hiring_csv(100, 2)}}).status == 200);

    service::ServiceConfig narrow;
    narrow.max_cols = 2;
    SessionService svc2(narrow);
    Client d = open(svc2);
    CHECK(d.post("dataset", {{"csv", hiring_csv(150, 2)}}).status == 422);
}

TEST_CASE("mutating responses carry the same graph as GET") {
    SessionService svc;
    Client c = discovered(svc);
    const Json g = body(c.get("graph"));
    CHECK(g["stage"] == "discovered");
    REQUIRE(edge(g["graph"], "Gender", "Job"));
    REQUIRE(edge(g["graph"], "Skill", "Job"));
    CHECK((*edge(g["graph"], "Gender", "Job"))["state"] == "directed");

    Response r = c.post("refine", {{"op", "delete"}, {"source", "Skill"}, {"target", "Job"}});
    REQUIRE(r.status == 200);
    Json mutated = body(r);
    CHECK(mutated["graph"]["delta_bic"].get<double>() > 0.0);
    mutated["graph"].erase("delta_bic");
    CHECK(mutated == body(c.get("graph")));

    r = c.post("refine", {{"op", "add"}, {"source", "Skill"}, {"target", "Job"}});
    REQUIRE(r.status == 200);
    CHECK(body(r)["graph"]["delta_bic"].get<double>() < 0.0);

    r = c.post("refine", {{"op", "reverse"}, {"source", "Skill"}, {"target", "Job"}});
    REQUIRE(r.status == 200);
    CHECK(edge(body(r)["graph"], "Job", "Skill"));
    CHECK_FALSE(edge(body(r)["graph"], "Skill", "Job"));
    CHECK(c.post("refine", {{"op", "reverse"}, {"source", "Job"}, {"target", "Skill"}}).status == 200);

    CHECK(c.post("refine", {{"op", "delete"}, {"source", "Skill"}, {"target", "Gender"}}).status == 422);
}

TEST_CASE("slider edits echo the alpha") {
    SessionService svc;
    Client c = discovered(svc);
    CHECK(c.post("debias", {{"op", "delete"}, {"source", "Gender"}, {"target", "Job"}}).status == 422);
    REQUIRE(c.post("stage", {{"stage", "debias"}}).status == 200);

    const Response r = c.post("debias", {{"op", "set_alpha"}, {"source", "Gender"}, {"target", "Job"}, {"slider", -75}});
    REQUIRE(r.status == 200);
    const Json j = body(r);
    CHECK(j["record"]["alpha_after"] == 0.25);
    CHECK(j["record"]["slider"] == -75.0);
    CHECK((*edge(j["graph"], "Gender", "Job"))["alpha"] == 0.25);
    CHECK((*edge(body(c.get("graph"))["graph"], "Gender", "Job"))["alpha"] == 0.25);

    CHECK(c.post("debias", {{"op", "set_alpha"}, {"source", "Gender"}, {"target", "Job"}, {"slider", 140}}).status ==
          422);
    CHECK(c.post("stage", {{"stage", "refine"}}).status == 422);

    const Json edits = body(c.get("edits"));
    REQUIRE(edits.size() == 1);
    CHECK(edits[0]["stage"] == "debias");

    const Json logs = body(c.get("logs"));
    CHECK(logs["records"] == edits);
    CHECK(logs["impacted"] == Json::array({"Job"}));
    CHECK(logs["added"].empty());

    const Json paths = body(svc.handle("GET", "/sessions/" + c.id + "/paths?source=Gender&target=Job", ""));
    REQUIRE(paths["paths"].size() == 1);
    CHECK(paths["paths"][0] == Json::array({"Gender", "Job"}));
    CHECK(c.get("paths").status == 400);

    REQUIRE(c.post("reset").status == 200);
    CHECK(body(c.get("edits")).empty());
    CHECK((*edge(body(c.get("graph"))["graph"], "Gender", "Job"))["alpha"] == 1.0);
}

TEST_CASE("simulate, compare and evaluate") {
    SessionService svc;
    Client c = discovered(svc);
    REQUIRE(c.post("stage", {{"stage", "debias"}}).status == 200);
    REQUIRE(c.post("debias", {{"op", "delete"}, {"source", "Gender"}, {"target", "Job"}}).status == 200);

    const Json before = body(c.get("comparison"));
    CHECK(before["groups"]["a"] == "Gender = Female");
    CHECK(before["debiased"].is_null());

    // Downloading simulates on demand.
    const Response csv = c.get("debiased.csv");
    REQUIRE(csv.status == 200);
    CHECK(csv.content_type == "text/csv");
    CHECK(csv.body.rfind("Gender,Skill,Job\n", 0) == 0);
    CHECK(csv.body == c.get("debiased.csv").body);

    const Json after = body(c.get("comparison"));
    REQUIRE(after["debiased"].is_object());
    auto rate = [](const Json& f, const char* g) {
        const double fav = f[std::string(g) + "_favorable"], unf = f[std::string(g) + "_unfavorable"];
        return fav / (fav + unf);
    };
    const double gap0 = rate(after["original"], "b") - rate(after["original"], "a");
    const double gap1 = rate(after["debiased"], "b") - rate(after["debiased"], "a");
    CHECK(gap0 > 0.15);
    CHECK(std::abs(gap1) < 0.05);

    const Json node = body(svc.handle("GET", "/sessions/" + c.id + "/comparison?node=Job", ""));
    CHECK(node["original"]["counts"]["Yes"].get<int>() + node["original"]["counts"]["No"].get<int>() == 1500);
    const Json skill = body(svc.handle("GET", "/sessions/" + c.id + "/comparison?node=Skill", ""));
    CHECK(skill["original"]["bin_edges"].size() == 11);
    CHECK(skill["original"]["counts"] == skill["debiased"]["counts"]);
    const Json joint = body(svc.handle("GET", "/sessions/" + c.id + "/comparison?source=Gender&target=Job", ""));
    CHECK(joint["original"]["source_levels"] == Json::array({"Female", "Male"}));

    const Response sim = c.post("simulate", {{"seed", 6}});
    REQUIRE(sim.status == 200);
    CHECK(body(sim)["simulated"] == Json::array({"Job"}));
    CHECK(c.get("debiased.csv").body != csv.body);

    const Response ev = c.post("evaluate");
    REQUIRE(ev.status == 200);
    const Json rep = body(ev)["report"];
    CHECK(rep["original"]["distortion"] == 0.0);
    CHECK(rep["debiased"]["parity_diff"].get<double>() < rep["original"]["parity_diff"].get<double>());
}

TEST_CASE("sessions are isolated under concurrent use") {
    SessionService svc;
    std::vector<Json> graphs(4);
    std::vector<std::string> csvs(4);
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&, t] {
            Client c = discovered(svc, 1 + t % 2);
            c.post("stage", {{"stage", "debias"}});
            if (t < 2) c.post("debias", {{"op", "delete"}, {"source", "Gender"}, {"target", "Job"}});
            else c.post("debias", {{"op", "set_alpha"}, {"source", "Gender"}, {"target", "Job"}, {"slider", 50}});
            graphs[t] = body(c.get("graph"))["graph"];
            csvs[t] = c.get("debiased.csv").body;
        });
    pool.clear();
    CHECK(svc.session_count() == 4);
    CHECK(edge(graphs[0], "Gender", "Job") == nullptr);
    CHECK(edge(graphs[1], "Gender", "Job") == nullptr);
    CHECK((*edge(graphs[2], "Gender", "Job"))["alpha"] == 1.5);
    CHECK((*edge(graphs[3], "Gender", "Job"))["alpha"] == 1.5);

    // Rerunning a session alone gives what it gave under contention.
    Client solo = discovered(svc, 1);
    solo.post("stage", {{"stage", "debias"}});
    solo.post("debias", {{"op", "delete"}, {"source", "Gender"}, {"target", "Job"}});
    CHECK(solo.get("debiased.csv").body == csvs[0]);
}

TEST_CASE("snapshots are written per session") {
    const auto dir = fixtures::scratch("snapshots");
    service::ServiceConfig cfg;
    cfg.snapshot_dir = dir.string();
    SessionService svc(cfg);
    Client c = discovered(svc);
    c.post("stage", {{"stage", "debias"}});
    c.post("debias", {{"op", "set_alpha"}, {"source", "Gender"}, {"target", "Job"}, {"slider", -75}});
    const auto path = dir / (c.id + ".json");
    REQUIRE(std::filesystem::exists(path));
    const Json snap = Json::parse(fixtures::slurp(path));
    CHECK(snap["revision"] == c.rev);
    CHECK(snap["config"]["seed"] == 5);
    REQUIRE(snap["edits"].size() == 1);
    CHECK(snap["edits"][0]["alpha_after"] == 0.25);
    std::filesystem::remove_all(dir);
}

TEST_CASE("query strings are percent-decoded") {
    SessionService svc;
    Client c = discovered(svc);
    const Response r = svc.handle("GET", "/sessions/" + c.id + "/comparison?source=Gender&target=J%6Fb", "");
    REQUIRE(r.status == 200);
    CHECK(body(r)["target"] == "Job");
    CHECK(svc.handle("GET", "/sessions/" + c.id + "/comparison?node=Nope", "").status == 422);
}
