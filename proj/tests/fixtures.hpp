#pragma once

// Data generators and scripted user behaviour shared by the unit tests and
// the acceptance binary.

#include "causalfair/discovery.hpp"
#include "causalfair/error.hpp"
#include "causalfair/graph.hpp"
#include "causalfair/rng.hpp"
#include "causalfair/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace fixtures {

using causalfair::tabular::ColumnKind;
using causalfair::tabular::ColumnSpec;
using causalfair::tabular::Dataset;

inline ColumnSpec numeric(std::string name) { return {std::move(name), ColumnKind::numeric, {}, std::nullopt}; }

inline ColumnSpec nominal(std::string name, std::vector<std::string> levels,
                          std::optional<std::string> favorable = std::nullopt) {
    return {std::move(name), ColumnKind::nominal, std::move(levels), std::move(favorable)};
}

/// A -> C <- B, C -> D, D -> E <- B; unit-variance Gaussian noise.
inline Dataset five_node_sem(std::size_t n, std::uint64_t seed) {
    causalfair::rng::Stream s(seed);
    std::vector<std::vector<double>> c(5, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = s.normal(), b = s.normal();
        const double cc = 0.8 * a + 0.8 * b + s.normal();
        const double d = 0.8 * cc + s.normal();
        const double e = 0.6 * d + 0.6 * b + s.normal();
        c[0][i] = a;
        c[1][i] = b;
        c[2][i] = cc;
        c[3][i] = d;
        c[4][i] = e;
    }
    return Dataset("sem5", {numeric("A"), numeric("B"), numeric("C"), numeric("D"), numeric("E")}, std::move(c));
}

inline const std::vector<std::pair<std::string, std::string>>& five_node_truth() {
    static const std::vector<std::pair<std::string, std::string>> t{
        {"A", "C"}, {"B", "C"}, {"C", "D"}, {"D", "E"}, {"B", "E"}};
    return t;
}

/// Binary Gender (P(Male) = 0.6) and Job with P(Yes | Male) = 0.6,
/// P(Yes | Female) = 0.3.
inline Dataset gender_job(std::size_t n, std::uint64_t seed) {
    causalfair::rng::Stream s(seed);
    std::vector<std::vector<double>> c(2, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const bool male = s.uniform() < 0.6;
        const bool yes = s.uniform() < (male ? 0.6 : 0.3);
        c[0][i] = male ? 1 : 0;
        c[1][i] = yes ? 1 : 0;
    }
    return Dataset("toy", {nominal("Gender", {"Female", "Male"}), nominal("Job", {"No", "Yes"}, "Yes")}, std::move(c),
                   std::string("Job"));
}

/// CPDAG with the given directed edges.
inline causalfair::discovery::Cpdag dag(const std::vector<std::string>& nodes,
                                        const std::vector<std::pair<std::string, std::string>>& edges) {
    causalfair::discovery::Cpdag g(nodes);
    for (const auto& [a, b] : edges) {
        g.add_undirected(g.index_of(a), g.index_of(b));
        g.orient(g.index_of(a), g.index_of(b));
    }
    return g;
}

/// Scripted refine stage: make the model's structure equal `truth` by
/// deleting edges absent from it, directing or reversing the rest and
/// adding what is missing. Edits that would transiently close a cycle are
/// replaced by a delete followed by a later add.
inline void refine_to(causalfair::graph::CausalModel& m,
                      const std::vector<std::pair<std::string, std::string>>& truth) {
    using causalfair::graph::EdgeState;
    using causalfair::graph::EditOp;
    std::map<std::pair<std::string, std::string>, std::pair<std::string, std::string>> want;
    for (const auto& [s, t] : truth) want[{std::min(s, t), std::max(s, t)}] = {s, t};

    for (const auto& e : m.edges())
        if (!want.count({std::min(e.source, e.target), std::max(e.source, e.target)}))
            m.apply_refine(EditOp::remove, e.source, e.target);

    for (const auto& e : m.edges()) {
        const auto& [s, t] = want.at({std::min(e.source, e.target), std::max(e.source, e.target)});
        try {
            if (e.state == EdgeState::undirected) m.apply_refine(EditOp::direct, s, t);
            else if (e.source != s) m.apply_refine(EditOp::reverse, e.source, e.target);
        } catch (const causalfair::EditError&) {
            m.apply_refine(EditOp::remove, e.source, e.target);
        }
    }
    for (const auto& [s, t] : truth)
        if (!m.find_edge(s, t)) m.apply_refine(EditOp::add, s, t);
}

/// Orients every edge from the earlier to the later node of `order`;
/// edges among the first `exogenous` nodes are deleted.
inline void refine_by_order(causalfair::graph::CausalModel& m, const std::vector<std::string>& order,
                            std::size_t exogenous) {
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
    std::vector<std::pair<std::string, std::string>> truth;
    for (const auto& e : m.edges()) {
        const auto a = rank.at(e.source), b = rank.at(e.target);
        if (a < exogenous && b < exogenous) continue;
        truth.push_back(a < b ? std::pair{e.source, e.target} : std::pair{e.target, e.source});
    }
    refine_to(m, truth);
}

/// True DAG of the synthetic hiring generator restricted to emitted columns.
inline const std::vector<std::pair<std::string, std::string>>& hiring_truth() {
    static const std::vector<std::pair<std::string, std::string>> t{
        {"Gender", "Major"},     {"Gender", "Job"},        {"Major", "Job"},
        {"Work experience", "Job"}, {"College rank", "Job"}, {"GPA", "Job"},
        {"Race", "Job"},         {"SAT score", "College rank"}, {"Age", "Work experience"}};
    return t;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("causalfair_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Runs a shell command, returning its exit status and combined output.
inline std::pair<int, std::string> run(const std::string& cmd) {
    const std::string full = cmd + " 2>&1";
    std::string out;
    FILE* pipe = ::popen(full.c_str(), "r");
    if (!pipe) return {-1, ""};
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, got);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace fixtures
