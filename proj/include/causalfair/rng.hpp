#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace causalfair::rng {

// Platform-stable primitives. std::hash and the std distributions are
// implementation defined, so nothing here relies on them.

std::uint64_t fnv1a(std::string_view text) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based standard normal draw addressed by (seed, a, b, row).
/// The same key always produces the same value, regardless of call order.
double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t row) noexcept;

/// Sequential generator for splits, bagging and SGD.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace causalfair::rng
