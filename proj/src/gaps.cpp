#include "hawkes_gaps/gaps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hawkes_gaps {

void GapConfig::validate() const {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("gaps: p must lie in (0, 1)");
    if (!(tau1 > 0.0))
        throw std::invalid_argument("gaps: tau1 must be > 0");
    if (!(tau1 < tau2))
        throw std::invalid_argument("gaps: tau1 must be < tau2");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("gaps: horizon must be finite and > 0");
    if (tau2 > horizon)
        throw std::invalid_argument("gaps: tau2 must not exceed the horizon");
}

IntervalList generate_windows(const GapConfig& config, RandomStream& rng) {
    config.validate();
    IntervalList out;
    const double gap_lo = config.tau1 / (2.0 * config.p);
    const double gap_hi = config.tau2 / (2.0 * config.p);
    double c = 0.0;
    for (;;) {
        const double d = c + rng.uniform(config.tau1, config.tau2);
        if (d >= config.horizon) {
            out.push_back({c, config.horizon});
            break;
        }
        out.push_back({c, d});
        c = d + rng.uniform(gap_lo, gap_hi);
        if (c >= config.horizon)
            break;
    }
    return out;
}

IntervalList generate_windows(const GapConfig& config) {
    RandomStream rng(derive_seed(config.seed, StreamTag::windows));
    return generate_windows(config, rng);
}

WindowSet generate_entity_windows(const GapConfig& config, std::size_t n_entities) {
    std::vector<IntervalList> per_entity(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        RandomStream rng(derive_seed(config.seed, StreamTag::windows, {m}));
        per_entity[m] = generate_windows(config, rng);
    }
    return WindowSet(std::move(per_entity), config.horizon);
}

WindowSet generate_shared_windows(const GapConfig& config, std::size_t n_entities) {
    return WindowSet::shared(n_entities, generate_windows(config), config.horizon);
}

IntervalList canonicalize(IntervalList intervals) {
    std::erase_if(intervals, [](const Interval& w) { return !(w.c < w.d); });
    std::sort(intervals.begin(), intervals.end(), [](const Interval& x, const Interval& y) { return x.c < y.c; });
    IntervalList out;
    for (const auto& w : intervals) {
        if (!out.empty() && w.c <= out.back().d)
            out.back().d = std::max(out.back().d, w.d);
        else
            out.push_back(w);
    }
    return out;
}

IntervalList intersect(const IntervalList& lhs, const IntervalList& rhs) {
    const IntervalList x = canonicalize(lhs);
    const IntervalList y = canonicalize(rhs);
    IntervalList out;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        const double c = std::max(x[i].c, y[j].c);
        const double d = std::min(x[i].d, y[j].d);
        if (c < d)
            out.push_back({c, d});
        if (x[i].d < y[j].d)
            ++i;
        else
            ++j;
    }
    return canonicalize(std::move(out));
}

IntervalList intersect(std::span<const IntervalList> lists) {
    if (lists.empty())
        throw std::invalid_argument("intersect: empty list");
    IntervalList acc = canonicalize(lists.front());
    for (std::size_t i = 1; i < lists.size(); ++i)
        acc = intersect(acc, lists[i]);
    return acc;
}

WindowSet intersect_windows(std::span<const WindowSet> sets) {
    if (sets.empty())
        throw std::invalid_argument("intersect_windows: empty list");
    const std::size_t n = sets.front().dimension();
    const double horizon = sets.front().horizon();
    for (const auto& ws : sets) {
        if (ws.dimension() != n)
            throw std::invalid_argument("intersect_windows: entity counts differ");
        if (ws.horizon() != horizon)
            throw std::invalid_argument("intersect_windows: horizons differ");
    }
    std::vector<IntervalList> out(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::vector<IntervalList> lists;
        lists.reserve(sets.size());
        for (const auto& ws : sets)
            lists.push_back(ws.windows(m));
        out[m] = intersect(lists);
    }
    return WindowSet(std::move(out), horizon);
}

WindowSet common_windows(const WindowSet& windows) {
    if (windows.dimension() == 0)
        throw std::invalid_argument("common_windows: no entities");
    return WindowSet::shared(windows.dimension(), intersect(windows.all()), windows.horizon());
}

EventData restrict_events(const EventData& events, const WindowSet& windows) {
    if (events.dimension() != windows.dimension())
        throw std::invalid_argument("restrict_events: entity counts differ");
    if (events.horizon() != windows.horizon())
        throw std::invalid_argument("restrict_events: horizons differ");
    std::vector<std::vector<double>> kept(events.dimension());
    for (std::size_t m = 0; m < events.dimension(); ++m) {
        const auto ts = events.times(m);
        for (const auto& w : windows.windows(m)) {
            auto first = std::upper_bound(ts.begin(), ts.end(), w.c);
            auto last = std::upper_bound(ts.begin(), ts.end(), w.d);
            kept[m].insert(kept[m].end(), first, last);
        }
    }
    return EventData(std::move(kept), events.horizon());
}

std::vector<double> observed_fraction(const WindowSet& windows) {
    std::vector<double> out(windows.dimension(), 0.0);
    for (std::size_t m = 0; m < windows.dimension(); ++m) {
        double total = 0.0;
        for (const auto& w : windows.windows(m))
            total += w.length();
        out[m] = std::clamp(total / windows.horizon(), 0.0, 1.0);
    }
    return out;
}

}  // namespace hawkes_gaps
