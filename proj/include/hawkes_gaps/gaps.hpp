#pragma once

#include "hawkes_gaps/model.hpp"
#include "hawkes_gaps/random.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hawkes_gaps {

// Observation-window generator settings. `p` is the nominal observation
// fraction; the realized long-run fraction is 2p / (1 + 2p).
struct GapConfig {
    double p = 0.3;
    double tau1 = 0.5;  // shortest window (time)
    double tau2 = 3.0;  // longest window (time)
    double horizon = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Alternating windows and gaps starting at c = 0: window lengths drawn from
// U(tau1, tau2), gap lengths from U(tau1 / 2p, tau2 / 2p). The last window is
// clipped at the horizon; a window that would start at or past it is dropped.
[[nodiscard]] IntervalList generate_windows(const GapConfig& config);
[[nodiscard]] IntervalList generate_windows(const GapConfig& config, RandomStream& rng);

// Independent draws per entity from stream(seed, windows, m).
[[nodiscard]] WindowSet generate_entity_windows(const GapConfig& config, std::size_t n_entities);
// One draw shared by all entities, from stream(seed, windows).
[[nodiscard]] WindowSet generate_shared_windows(const GapConfig& config, std::size_t n_entities);

// Sort and merge touching or overlapping intervals; drops empty ones.
[[nodiscard]] IntervalList canonicalize(IntervalList intervals);

[[nodiscard]] IntervalList intersect(const IntervalList& lhs, const IntervalList& rhs);
[[nodiscard]] IntervalList intersect(std::span<const IntervalList> lists);

// Entity-wise intersection of several window sets over the same horizon.
[[nodiscard]] WindowSet intersect_windows(std::span<const WindowSet> sets);
// Intersection across all entities of one window set, assigned to every entity.
[[nodiscard]] WindowSet common_windows(const WindowSet& windows);

// Events of entity m that fall in some window (c, d] of entity m.
[[nodiscard]] EventData restrict_events(const EventData& events, const WindowSet& windows);

// Sum of window lengths over the horizon, per entity.
[[nodiscard]] std::vector<double> observed_fraction(const WindowSet& windows);

}  // namespace hawkes_gaps
