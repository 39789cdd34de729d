#pragma once

#include "hawkes_gaps/gaps.hpp"
#include "hawkes_gaps/model.hpp"
#include "hawkes_gaps/random.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace hg_test {

using namespace hawkes_gaps;

struct Instance {
    ModelParams params;
    EventData observed;
    WindowSet windows;
    BoundaryIntensities bounds;
};

inline double draw(RandomStream& rng, double lo, double hi) { return rng.uniform(lo, hi); }

// Small gapped instance: per-entity Algorithm-2 windows on (0, horizon],
// uniform event times inside them, boundary values in (u, 3u).
inline Instance random_instance(std::uint64_t seed, std::size_t n = 2, std::size_t max_events = 50,
                                double horizon = 20.0, bool shared = false) {
    RandomStream rng(seed);
    Instance inst;
    inst.params.u.resize(n);
    inst.params.b.resize(n);
    inst.params.a = SquareMatrix(n);
    for (std::size_t m = 0; m < n; ++m) {
        inst.params.u[m] = draw(rng, 0.5, 3.0);
        inst.params.b[m] = draw(rng, 0.5, 5.0);
        for (std::size_t k = 0; k < n; ++k)
            inst.params.a(m, k) = draw(rng, 0.05, 0.6);
    }
    const GapConfig gaps{0.3, 0.5, 3.0, horizon, seed};
    inst.windows = shared ? generate_shared_windows(gaps, n) : generate_entity_windows(gaps, n);

    std::vector<std::vector<double>> times(n);
    const std::size_t per_entity = max_events / n;
    for (std::size_t m = 0; m < n; ++m) {
        const auto& list = inst.windows.windows(m);
        double total = 0.0;
        for (const auto& w : list)
            total += w.length();
        const auto count = static_cast<std::size_t>(rng.uniform() * static_cast<double>(per_entity + 1));
        for (std::size_t i = 0; i < count; ++i) {
            double x = rng.uniform() * total;
            for (const auto& w : list) {
                if (x < w.length()) {
                    // keep strictly inside (c, d]
                    times[m].push_back(w.d - x);
                    break;
                }
                x -= w.length();
            }
        }
        std::sort(times[m].begin(), times[m].end());
        times[m].erase(std::unique(times[m].begin(), times[m].end()), times[m].end());
    }
    inst.observed = EventData(std::move(times), horizon);
    inst.bounds = BoundaryIntensities::at_background(inst.params, inst.windows);
    for (std::size_t m = 0; m < n; ++m)
        for (auto& v : inst.bounds.values[m])
            v = inst.params.u[m] * draw(rng, 1.2, 2.8);
    return inst;
}

}  // namespace hg_test

#include "hawkes_gaps/estimator.hpp"

#include <cmath>

namespace hg_test {

// Largest absolute entrywise difference; infinity on any shape mismatch.
inline double max_stats_diff(const SufficientStats& x, const SufficientStats& y) {
    const double inf = std::numeric_limits<double>::infinity();
    if (x.windows.size() != y.windows.size())
        return inf;
    double worst = 0.0;
    auto cmp = [&](const std::vector<double>& p, const std::vector<double>& q) {
        if (p.size() != q.size()) {
            worst = inf;
            return;
        }
        for (std::size_t i = 0; i < p.size(); ++i)
            worst = std::max(worst, std::abs(p[i] - q[i]));
    };
    for (std::size_t m = 0; m < x.windows.size(); ++m) {
        if (x.windows[m].size() != y.windows[m].size())
            return inf;
        for (std::size_t k = 0; k < x.windows[m].size(); ++k) {
            const auto& p = x.windows[m][k];
            const auto& q = y.windows[m][k];
            if (p.count != q.count || (p.count > 0 && p.first != q.first))
                return inf;
            cmp(p.since_start, q.since_start);
            cmp(p.kernel, q.kernel);
            cmp(p.decay, q.decay);
            cmp(p.lagged_decay, q.lagged_decay);
            cmp(p.compensator, q.compensator);
            cmp(p.compensator_slope, q.compensator_slope);
        }
    }
    return worst;
}

}  // namespace hg_test

namespace hg_test {

inline std::vector<double> flatten_params(const ModelParams& p) {
    std::vector<double> out(p.u);
    out.insert(out.end(), p.a.values().begin(), p.a.values().end());
    out.insert(out.end(), p.b.begin(), p.b.end());
    return out;
}

}  // namespace hg_test
