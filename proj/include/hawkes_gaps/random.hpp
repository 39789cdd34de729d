#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace hawkes_gaps {

// Purpose tags mixed into derived seeds so independent consumers never share
// a stream. Values are part of the reproducibility contract; do not renumber.
enum class StreamTag : std::uint64_t {
    simulation = 1,
    windows = 2,
    histogram = 3,
    replication = 4,
};

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// stream(master, tag, i, j, ...): a seed that depends on every component and
// on nothing else, so replications can be drawn in any order.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                               std::initializer_list<std::uint64_t> indices = {}) noexcept {
    std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(tag)));
    for (auto idx : indices)
        h = splitmix64(h ^ splitmix64(idx + 0x632BE59BD9B4E019ULL));
    return h;
}

// 64-bit engine with distribution code written against raw bits so draws are
// identical across standard library implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    // Uniform on (lo, hi).
    double uniform(double lo, double hi) noexcept {
        double x;
        do {
            x = uniform();
        } while (x == 0.0);
        return lo + (hi - lo) * x;
    }
    double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

private:
    std::mt19937_64 engine_;
};

}  // namespace hawkes_gaps
