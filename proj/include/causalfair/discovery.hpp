#pragma once

#include "causalfair/tabular.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace causalfair::discovery {

struct DiscoveryConfig {
    double alpha = 0.01;
    /// Unbounded when empty.
    std::optional<std::size_t> max_cond_size;
    std::uint64_t seed = 0;
    /// Worker threads for the CI tests of one level; 0 = hardware concurrency.
    unsigned threads = 0;

    void validate() const;
};

/// Partially directed graph over the dataset's columns. Node i is column i.
class Cpdag {
public:
    explicit Cpdag(std::vector<std::string> nodes);

    static Cpdag complete(std::vector<std::string> nodes);

    const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t index_of(const std::string& name) const;

    bool adjacent(std::size_t a, std::size_t b) const { return adj_[a][b]; }
    /// a -> b
    bool directed(std::size_t a, std::size_t b) const { return arrow_[a][b]; }
    bool undirected(std::size_t a, std::size_t b) const { return adj_[a][b] && !arrow_[a][b] && !arrow_[b][a]; }

    void add_undirected(std::size_t a, std::size_t b);
    void remove(std::size_t a, std::size_t b);
    void orient(std::size_t from, std::size_t to);
    void unorient(std::size_t a, std::size_t b);

    std::vector<std::size_t> neighbors(std::size_t a) const;
    std::size_t edge_count() const;
    /// Directed subgraph has no cycle.
    bool acyclic() const;
    /// Directed path from -> ... -> to exists.
    bool reachable(std::size_t from, std::size_t to) const;

    void set_sepset(std::size_t a, std::size_t b, std::vector<std::size_t> z);
    const std::vector<std::size_t>* sepset(std::size_t a, std::size_t b) const;
    const std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>& sepsets() const noexcept {
        return sepsets_;
    }

    struct Edge {
        std::string a;
        std::string b;
        bool directed = false;  // a -> b when true
    };
    /// Sorted by (a, b) names; undirected edges list the smaller name first.
    std::vector<Edge> edges() const;

private:
    std::vector<std::string> nodes_;
    std::vector<std::vector<bool>> adj_;
    std::vector<std::vector<bool>> arrow_;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> sepsets_;
};

/// Symmetric nested-model likelihood-ratio test of x _||_ y | z.
/// Returns max of the two directional p-values.
double ci_test(const tabular::Dataset& data, std::size_t x, std::size_t y, std::span<const std::size_t> z);
double ci_test(const tabular::Dataset& data, const std::string& x, const std::string& y,
               const std::vector<std::string>& z);

struct SkeletonResult {
    Cpdag graph;
    std::size_t tests = 0;
    std::vector<std::string> warnings;
};

/// PC-stable adjacency search.
SkeletonResult pc_skeleton(const tabular::Dataset& data, const DiscoveryConfig& cfg);

/// Collider detection followed by Meek rules R1-R4. Edges demanded in both
/// directions stay undirected.
Cpdag orient(Cpdag skeleton);

struct DiscoveryResult {
    Cpdag graph;
    std::size_t tests = 0;
    std::vector<std::string> warnings;
};

DiscoveryResult discover(const tabular::Dataset& data, const DiscoveryConfig& cfg);

}  // namespace causalfair::discovery
