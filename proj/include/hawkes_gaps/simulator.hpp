#pragma once

#include "hawkes_gaps/model.hpp"
#include "hawkes_gaps/random.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace hawkes_gaps {

using WarningSink = std::function<void(std::string_view)>;

// Writes to std::cerr.
void default_warning_sink(std::string_view message);

struct SimConfig {
    ModelParams params;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    // Called when the branching matrix is at or beyond the stationarity edge.
    WarningSink warn = default_warning_sink;
};

// Exact draw by thinning, with lambda_m(0) = u_m. Uses stream(seed, simulation).
[[nodiscard]] EventData simulate(const SimConfig& config);

// Same sampler driven by a caller-owned stream.
[[nodiscard]] EventData simulate(const ModelParams& params, double horizon, RandomStream& rng,
                                 const WarningSink& warn = default_warning_sink);

// counts[m][r]: number of entity-m events in (0, interval_end] for replication r.
// Replication r draws from stream(seed, histogram, r).
[[nodiscard]] std::vector<std::vector<std::size_t>> count_histogram(const SimConfig& config, std::size_t n_reps,
                                                                    double interval_end, unsigned jobs = 1);

}  // namespace hawkes_gaps
