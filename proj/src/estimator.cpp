#include "hawkes_gaps/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hawkes_gaps {

namespace {

std::string intensity_message(std::size_t m, std::size_t k, std::size_t i, double value) {
    std::ostringstream out;
    out << "nonpositive intensity " << value << " at entity " << m << ", window " << k << ", event " << i;
    return out.str();
}

// 1 - exp(-x) without cancellation for small x
double one_minus_exp(double x) { return -std::expm1(-x); }

void check_dimensions(const ModelParams& params, const WindowSet& windows, const SufficientStats& stats) {
    const std::size_t n = params.dimension();
    if (windows.dimension() != n || stats.windows.size() != n || stats.b.size() != n)
        throw std::invalid_argument("dimension mismatch between parameters, windows and stats");
    for (std::size_t m = 0; m < n; ++m)
        if (stats.windows[m].size() != windows.windows(m).size())
            throw std::invalid_argument("stats do not match the window set");
}

double max_relative_change(const ModelParams& before, const BoundaryIntensities& bounds_before,
                           const ModelParams& after, const BoundaryIntensities& bounds_after) {
    double worst = 0.0;
    auto track = [&worst](double x, double y) { worst = std::max(worst, std::abs(y - x) / (1.0 + std::abs(x))); };
    for (std::size_t m = 0; m < before.u.size(); ++m) {
        track(before.u[m], after.u[m]);
        track(before.b[m], after.b[m]);
    }
    const auto av = before.a.values();
    const auto bv = after.a.values();
    for (std::size_t i = 0; i < av.size(); ++i)
        track(av[i], bv[i]);
    for (std::size_t m = 0; m < bounds_before.values.size(); ++m)
        for (std::size_t k = 0; k < bounds_before.values[m].size(); ++k)
            track(bounds_before.values[m][k], bounds_after.values[m][k]);
    return worst;
}

}  // namespace

IntensityError::IntensityError(std::size_t m, std::size_t k, std::size_t i, double v)
    : std::runtime_error(intensity_message(m, k, i, v)), entity(m), window(k), event(i), value(v) {}

BoundaryMode BoundaryMode::box(double C) {
    if (!(C >= 1.0) || !std::isfinite(C))
        throw std::invalid_argument("boundary box: C must be finite and >= 1");
    return {Kind::box, C};
}

SufficientStats precompute_stats(const EventData& observed, const WindowSet& windows, const std::vector<double>& b) {
    const std::size_t n_entities = observed.dimension();
    if (windows.dimension() != n_entities || b.size() != n_entities)
        throw std::invalid_argument("precompute_stats: dimension mismatch");
    for (double x : b)
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument("precompute_stats: decay rates must be finite and > 0");

    SufficientStats stats;
    stats.b = b;
    stats.windows.resize(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        const auto targets = observed.times(m);
        const auto& wins = windows.windows(m);
        const double bm = b[m];
        std::size_t covered = 0;
        auto& out = stats.windows[m];
        out.resize(wins.size());
        for (std::size_t k = 0; k < wins.size(); ++k) {
            const Interval w = wins[k];
            auto& ws = out[k];
            ws.first = static_cast<std::size_t>(std::upper_bound(targets.begin(), targets.end(), w.c) - targets.begin());
            const auto last =
                static_cast<std::size_t>(std::upper_bound(targets.begin(), targets.end(), w.d) - targets.begin());
            ws.count = last - ws.first;
            covered += ws.count;
            ws.since_start.resize(ws.count);
            for (std::size_t i = 0; i < ws.count; ++i)
                ws.since_start[i] = targets[ws.first + i] - w.c;

            ws.kernel.assign(n_entities * ws.count, 0.0);
            ws.decay.assign(n_entities * ws.count, 0.0);
            ws.lagged_decay.assign(n_entities * ws.count, 0.0);
            ws.compensator.assign(n_entities, 0.0);
            ws.compensator_slope.assign(n_entities, 0.0);

            for (std::size_t n = 0; n < n_entities; ++n) {
                const auto sources = observed.times(n);
                auto src = std::upper_bound(sources.begin(), sources.end(), w.c);
                const auto src_end = std::upper_bound(sources.begin(), sources.end(), w.d);

                double plain = 0.0;   // A1 at the previous target
                double lagged = 0.0;  // A2 at the previous target
                double prev = w.c;
                auto cursor = src;
                for (std::size_t i = 0; i < ws.count; ++i) {
                    const double t = targets[ws.first + i];
                    const double step = t - prev;
                    const double carry = std::exp(-bm * step);
                    lagged = carry * (lagged + step * plain);
                    plain *= carry;
                    for (; cursor < src_end && *cursor < t; ++cursor) {
                        const double lag = t - *cursor;
                        const double e = std::exp(-bm * lag);
                        plain += e;
                        lagged += lag * e;
                    }
                    ws.decay[n * ws.count + i] = plain;
                    ws.lagged_decay[n * ws.count + i] = lagged;
                    ws.kernel[n * ws.count + i] = bm * plain;
                    prev = t;
                }

                double mass = 0.0, slope = 0.0;
                for (auto it = src; it < src_end; ++it) {
                    const double lag = w.d - *it;
                    mass += one_minus_exp(bm * lag);
                    slope += lag * std::exp(-bm * lag);
                }
                ws.compensator[n] = mass;
                ws.compensator_slope[n] = slope;
            }
        }
        if (covered != targets.size())
            throw std::invalid_argument("precompute_stats: entity " + std::to_string(m) +
                                        " has observed events outside its windows");
    }
    return stats;
}

EventIntensities event_intensities(const ModelParams& params, const BoundaryIntensities& bounds,
                                   const WindowSet& windows, const SufficientStats& stats, double floor) {
    check_dimensions(params, windows, stats);
    const std::size_t n_entities = params.dimension();
    EventIntensities out;
    out.values.resize(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        const double u = params.u[m];
        const double b = stats.b[m];
        const auto row = params.a.row(m);
        out.values[m].resize(stats.windows[m].size());
        for (std::size_t k = 0; k < stats.windows[m].size(); ++k) {
            const auto& ws = stats.windows[m][k];
            const double offset = bounds(m, k) - u;
            auto& lam = out.values[m][k];
            lam.resize(ws.count);
            for (std::size_t i = 0; i < ws.count; ++i) {
                double value = u + offset * std::exp(-b * ws.since_start[i]);
                for (std::size_t n = 0; n < n_entities; ++n)
                    value += row[n] * ws.A(n, i);
                if (!(value > floor)) {
                    if (floor <= 0.0)
                        throw IntensityError(m, k, i, value);
                    value = floor;
                    out.floor_hit = true;
                }
                lam[i] = value;
            }
        }
    }
    return out;
}

namespace {

double penalty(const ModelParams& params, double mu) {
    double total = 0.0;
    for (double x : params.a.values())
        total += std::abs(x);
    return mu * total;
}

double smooth_objective(const ModelParams& params, const BoundaryIntensities& bounds, const WindowSet& windows,
                        const SufficientStats& stats, const EventIntensities& lambda) {
    const std::size_t n_entities = params.dimension();
    double total = 0.0;
    for (std::size_t m = 0; m < n_entities; ++m) {
        const double u = params.u[m];
        const double b = stats.b[m];
        const auto row = params.a.row(m);
        for (std::size_t k = 0; k < stats.windows[m].size(); ++k) {
            const auto& ws = stats.windows[m][k];
            const double len = windows.windows(m)[k].length();
            double integral = u * len + (bounds(m, k) - u) / b * one_minus_exp(b * len);
            for (std::size_t n = 0; n < n_entities; ++n)
                integral += row[n] * ws.compensator[n];
            double log_sum = 0.0;
            for (double v : lambda.values[m][k])
                log_sum += std::log(v);
            total += integral - log_sum;
        }
    }
    return total;
}

}  // namespace

double objective(const ModelParams& params, const BoundaryIntensities& bounds, const EventData& observed,
                 const WindowSet& windows, const SufficientStats& stats, double mu) {
    if (observed.dimension() != params.dimension())
        throw std::invalid_argument("objective: dimension mismatch");
    const auto lambda = event_intensities(params, bounds, windows, stats, 0.0);
    return penalty(params, mu) + smooth_objective(params, bounds, windows, stats, lambda);
}

namespace {

// Multiplier tying lambda_bar to u on an active constraint face, 0 when interior.
double active_face(double boundary, double u, BoundaryMode mode) {
    if (mode.kind == BoundaryMode::Kind::fixed_at_u || boundary <= u)
        return 1.0;
    if (boundary >= mode.C * u)
        return mode.C;
    return 0.0;
}

}  // namespace

UTerms u_terms(const ModelParams& params, const BoundaryIntensities& bounds, const WindowSet& windows,
               const SufficientStats& stats, const EventIntensities& lambda, BoundaryMode mode) {
    const std::size_t n_entities = params.dimension();
    UTerms terms{std::vector<double>(n_entities, 0.0), std::vector<double>(n_entities, 0.0)};
    for (std::size_t m = 0; m < n_entities; ++m) {
        const double b = stats.b[m];
        for (std::size_t k = 0; k < stats.windows[m].size(); ++k) {
            const auto& ws = stats.windows[m][k];
            const double len = windows.windows(m)[k].length();
            const auto& lam = lambda.values[m][k];
            const double face = active_face(bounds(m, k), params.u[m], mode);
            if (face > 0.0) {
                // lambda_bar = face * u moves with u
                terms.integral[m] += len + (face - 1.0) * one_minus_exp(b * len) / b;
                for (std::size_t i = 0; i < ws.count; ++i)
                    terms.events[m] += (1.0 + (face - 1.0) * std::exp(-b * ws.since_start[i])) / lam[i];
            } else {
                terms.integral[m] += len - one_minus_exp(b * len) / b;
                for (std::size_t i = 0; i < ws.count; ++i)
                    terms.events[m] += one_minus_exp(b * ws.since_start[i]) / lam[i];
            }
        }
    }
    return terms;
}

BTerms b_terms(const ModelParams& params, const BoundaryIntensities& bounds, const WindowSet& windows,
               const SufficientStats& stats, const EventIntensities& lambda) {
    const std::size_t n_entities = params.dimension();
    BTerms terms{std::vector<double>(n_entities, 0.0), std::vector<double>(n_entities, 0.0),
                 std::vector<double>(n_entities, 0.0)};
    for (std::size_t m = 0; m < n_entities; ++m) {
        const double u = params.u[m];
        const double b = stats.b[m];
        const auto row = params.a.row(m);
        for (std::size_t k = 0; k < stats.windows[m].size(); ++k) {
            const auto& ws = stats.windows[m][k];
            const double len = windows.windows(m)[k].length();
            const double offset = bounds(m, k) - u;
            const double tail = std::exp(-b * len);
            terms.A1[m] += offset * (-one_minus_exp(b * len) / (b * b) + len * tail / b);
            for (std::size_t n = 0; n < n_entities; ++n)
                terms.A1[m] += row[n] * ws.compensator_slope[n];
            const auto& lam = lambda.values[m][k];
            for (std::size_t i = 0; i < ws.count; ++i) {
                const double s = ws.since_start[i];
                double plain = -offset * s * std::exp(-b * s);
                double lagged = 0.0;
                for (std::size_t n = 0; n < n_entities; ++n) {
                    plain += row[n] * ws.A1(n, i);
                    lagged += row[n] * ws.A2(n, i);
                }
                terms.A2[m] += plain / lam[i];
                terms.A3[m] += lagged / lam[i];
            }
        }
    }
    return terms;
}

ObjectiveGradient objective_gradient(const ModelParams& params, const BoundaryIntensities& bounds,
                                     const WindowSet& windows, const SufficientStats& stats, BoundaryMode mode) {
    const auto lambda = event_intensities(params, bounds, windows, stats, 0.0);
    const std::size_t n_entities = params.dimension();
    ObjectiveGradient g;
    const auto ut = u_terms(params, bounds, windows, stats, lambda, mode);
    const auto bt = b_terms(params, bounds, windows, stats, lambda);
    g.du.resize(n_entities);
    g.db.resize(n_entities);
    g.da = SquareMatrix(n_entities);
    g.dlambda.resize(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        g.du[m] = ut.integral[m] - ut.events[m];
        g.db[m] = bt.A1[m] - bt.A2[m] + params.b[m] * bt.A3[m];
        const double b = stats.b[m];
        g.dlambda[m].assign(stats.windows[m].size(), 0.0);
        for (std::size_t k = 0; k < stats.windows[m].size(); ++k) {
            const auto& ws = stats.windows[m][k];
            const auto& lam = lambda.values[m][k];
            const double len = windows.windows(m)[k].length();
            double dl = one_minus_exp(b * len) / b;
            for (std::size_t i = 0; i < ws.count; ++i)
                dl -= std::exp(-b * ws.since_start[i]) / lam[i];
            g.dlambda[m][k] = dl;
            for (std::size_t n = 0; n < n_entities; ++n) {
                double da = ws.compensator[n];
                for (std::size_t i = 0; i < ws.count; ++i)
                    da -= ws.A(n, i) / lam[i];
                g.da(m, n) += da;
            }
        }
    }
    return g;
}

FitState make_state(ModelParams params, BoundaryIntensities bounds, const EventData& observed,
                    const WindowSet& windows) {
    params.validate();
    auto stats = precompute_stats(observed, windows, params.b);
    return {std::move(params), std::move(bounds), std::move(stats)};
}

std::vector<double> update_u(const FitState& state, const WindowSet& windows, BoundaryMode mode) {
    const auto lambda = event_intensities(state.params, state.bounds, windows, state.stats, kIntensityFloor);
    const auto terms = u_terms(state.params, state.bounds, windows, state.stats, lambda, mode);
    std::vector<double> u(state.params.u.size());
    for (std::size_t m = 0; m < u.size(); ++m) {
        if (!(terms.integral[m] > 0.0))
            throw NumericalError("update_u: zero observed exposure for entity " + std::to_string(m));
        u[m] = state.params.u[m] * terms.events[m] / terms.integral[m];
    }
    return u;
}

SquareMatrix update_a(const FitState& state, const WindowSet& windows, double mu) {
    if (!(mu >= 0.0))
        throw std::invalid_argument("update_a: mu must be >= 0");
    const auto lambda = event_intensities(state.params, state.bounds, windows, state.stats, kIntensityFloor);
    const std::size_t n_entities = state.params.dimension();
    SquareMatrix next(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        for (std::size_t n = 0; n < n_entities; ++n) {
            const double current = state.params.a(m, n);
            double responsibility = 0.0;
            double exposure = 0.0;
            for (std::size_t k = 0; k < state.stats.windows[m].size(); ++k) {
                const auto& ws = state.stats.windows[m][k];
                const auto& lam = lambda.values[m][k];
                exposure += ws.compensator[n];
                for (std::size_t i = 0; i < ws.count; ++i)
                    responsibility += current * ws.A(n, i) / lam[i];
            }
            if (!(exposure > 0.0)) {
                next(m, n) = 0.0;
                continue;
            }
            next(m, n) = std::max((responsibility - mu) / exposure, 0.0);
        }
    }
    return next;
}

DecayUpdate update_b(const FitState& state, const WindowSet& windows) {
    const auto lambda = event_intensities(state.params, state.bounds, windows, state.stats, kIntensityFloor);
    const auto terms = b_terms(state.params, state.bounds, windows, state.stats, lambda);
    DecayUpdate out{state.params.b, std::vector<bool>(state.params.b.size(), false)};
    for (std::size_t m = 0; m < out.b.size(); ++m) {
        const double step = (terms.A2[m] - terms.A1[m]) / terms.A3[m];
        if (!(terms.A3[m] > 0.0) || !std::isfinite(step) || !(step > 0.0)) {
            out.stalled[m] = true;
            continue;
        }
        out.b[m] = std::clamp(step, kMinDecay, kMaxDecay);
    }
    return out;
}

BoundaryIntensities update_lambda(const FitState& state, const WindowSet& windows, BoundaryMode mode) {
    BoundaryIntensities next = state.bounds;
    const std::size_t n_entities = state.params.dimension();
    if (mode.kind == BoundaryMode::Kind::fixed_at_u) {
        for (std::size_t m = 0; m < n_entities; ++m)
            std::fill(next.values[m].begin(), next.values[m].end(), state.params.u[m]);
        return next;
    }
    const auto lambda = event_intensities(state.params, state.bounds, windows, state.stats, kIntensityFloor);
    for (std::size_t m = 0; m < n_entities; ++m) {
        const double u = state.params.u[m];
        const double b = state.stats.b[m];
        for (std::size_t k = 0; k < state.stats.windows[m].size(); ++k) {
            const auto& ws = state.stats.windows[m][k];
            const auto& lam = lambda.values[m][k];
            const double current = state.bounds(m, k);
            double weight = 0.0;
            for (std::size_t i = 0; i < ws.count; ++i)
                weight += current * std::exp(-b * ws.since_start[i]) / lam[i];
            const double len = windows.windows(m)[k].length();
            const double candidate = b * weight / one_minus_exp(b * len);
            next.values[m][k] = std::clamp(std::isfinite(candidate) ? candidate : u, u, mode.C * u);
        }
    }
    return next;
}

BoundaryIntensities carry_bounds(const BoundaryIntensities& bounds, const std::vector<double>& old_u,
                                 const std::vector<double>& new_u, BoundaryMode mode) {
    BoundaryIntensities next = bounds;
    for (std::size_t m = 0; m < next.values.size(); ++m) {
        for (double& value : next.values[m]) {
            const double face = active_face(value, old_u.at(m), mode);
            if (face > 0.0)
                value = face * new_u.at(m);
            else
                value = std::clamp(value, new_u.at(m), mode.C * new_u.at(m));
        }
    }
    return next;
}

double default_mu(const EventData& observed) {
    const double n = static_cast<double>(observed.dimension());
    if (n == 0.0)
        return 0.0;
    return 0.001 * static_cast<double>(observed.total_count()) / (n * n);
}

ModelParams initial_params(std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("initial_params: at least one entity required");
    return {std::vector<double>(n, 1.0), SquareMatrix(n, 0.5 / static_cast<double>(n)), std::vector<double>(n, 1000.0)};
}

namespace {

constexpr std::size_t kPersistentAscent = 25;

void check_config(const FitConfig& config) {
    if (!(config.mu >= 0.0) || !std::isfinite(config.mu))
        throw std::invalid_argument("fit: mu must be finite and >= 0");
    if (!(config.tol > 0.0))
        throw std::invalid_argument("fit: tol must be > 0");
    if (config.max_iter == 0)
        throw std::invalid_argument("fit: max_iter must be positive");
}

std::string describe(const ModelParams& p) {
    std::ostringstream out;
    out.precision(17);
    out << "u=[";
    for (double x : p.u)
        out << x << ' ';
    out << "] a=[";
    for (double x : p.a.values())
        out << x << ' ';
    out << "] b=[";
    for (double x : p.b)
        out << x << ' ';
    out << ']';
    return out.str();
}

// Shared bookkeeping for the per-iteration trace.
struct TraceMonitor {
    FitResult& result;
    std::size_t consecutive_ascent = 0;

    void record(double value, std::size_t iteration, const ModelParams& params) {
        if (!std::isfinite(value))
            throw NumericalError("objective became non-finite at iteration " + std::to_string(iteration) + ": " +
                                 describe(params));
        if (!result.objective_trace.empty()) {
            const double prev = result.objective_trace.back();
            if (value > prev + 1e-8 * (1.0 + std::abs(prev))) {
                ++result.ascent_steps;
                ++consecutive_ascent;
            } else {
                consecutive_ascent = 0;
            }
        }
        result.objective_trace.push_back(value);
    }

    // Rises that are still going on when the iteration limit is hit.
    void finish(const ModelParams& params) const {
        if (!result.converged && consecutive_ascent >= kPersistentAscent)
            throw NumericalError("objective still increasing after " + std::to_string(consecutive_ascent) +
                                 " consecutive iterations at the iteration limit: " + describe(params));
    }
};

}  // namespace

FitResult fit(const EventData& observed, const WindowSet& windows, const FitConfig& config) {
    check_config(config);
    const std::size_t n_entities = observed.dimension();
    if (windows.dimension() != n_entities)
        throw std::invalid_argument("fit: events and windows have different entity counts");
    ModelParams start = config.init ? *config.init : initial_params(n_entities);
    if (start.dimension() != n_entities)
        throw std::invalid_argument("fit: initial parameters have the wrong dimension");
    BoundaryIntensities bounds =
        config.init_bounds ? *config.init_bounds : BoundaryIntensities::at_background(start, windows);
    const BoundaryMode mode = config.boundary;
    if (mode.kind == BoundaryMode::Kind::fixed_at_u)
        bounds = BoundaryIntensities::at_background(start, windows);

    FitState state = make_state(std::move(start), std::move(bounds), observed, windows);
    FitResult result;
    TraceMonitor monitor{result};

    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        const ModelParams before = state.params;
        const BoundaryIntensities bounds_before = state.bounds;

        auto next_u = update_u(state, windows, mode);
        state.bounds = carry_bounds(state.bounds, state.params.u, next_u, mode);
        state.params.u = std::move(next_u);
        state.params.a = update_a(state, windows, config.mu);
        auto decay = update_b(state, windows);
        result.stalled_b_steps += static_cast<std::size_t>(std::count(decay.stalled.begin(), decay.stalled.end(), true));
        if (decay.b != state.params.b) {
            state.params.b = std::move(decay.b);
            state.stats = precompute_stats(observed, windows, state.params.b);
        }
        state.bounds = update_lambda(state, windows, mode);

        const auto lambda = event_intensities(state.params, state.bounds, windows, state.stats, kIntensityFloor);
        result.intensity_floor_hit = result.intensity_floor_hit || lambda.floor_hit;
        monitor.record(penalty(state.params, config.mu) +
                           smooth_objective(state.params, state.bounds, windows, state.stats, lambda),
                       iter, state.params);
        result.iterations = iter;
        if (max_relative_change(before, bounds_before, state.params, state.bounds) < config.tol) {
            result.converged = true;
            break;
        }
    }
    monitor.finish(state.params);
    result.params = std::move(state.params);
    result.bounds = std::move(state.bounds);
    return result;
}

// ---------------------------------------------------------------------------
// Complete-data baseline. Everything below uses the full history on (0, T]
// and shares no kernel-sum code with the windowed path above.

double mhp_objective(const ModelParams& params, const EventData& events, double mu) {
    params.validate();
    const std::size_t n_entities = params.dimension();
    if (events.dimension() != n_entities)
        throw std::invalid_argument("mhp_objective: dimension mismatch");
    const double horizon = events.horizon();

    // merge all events in time order
    struct Stamp {
        double t;
        std::size_t entity;
    };
    std::vector<Stamp> merged;
    merged.reserve(events.total_count());
    for (std::size_t n = 0; n < n_entities; ++n)
        for (double t : events.times(n))
            merged.push_back({t, n});
    std::stable_sort(merged.begin(), merged.end(), [](const Stamp& x, const Stamp& y) { return x.t < y.t; });

    // excitation[m] = lambda_m - u_m just after the last processed time
    std::vector<double> excitation(n_entities, 0.0);
    double log_sum = 0.0;
    double last = 0.0;
    std::size_t pos = 0;
    while (pos < merged.size()) {
        const double t = merged[pos].t;
        for (std::size_t m = 0; m < n_entities; ++m)
            excitation[m] *= std::exp(-params.b[m] * (t - last));
        last = t;
        // all events at this instant see the same strict past
        std::size_t end = pos;
        while (end < merged.size() && merged[end].t == t)
            ++end;
        for (std::size_t q = pos; q < end; ++q) {
            const std::size_t m = merged[q].entity;
            const double lambda = params.u[m] + excitation[m];
            if (!(lambda > 0.0))
                throw NumericalError("mhp_objective: nonpositive intensity at t=" + std::to_string(t));
            log_sum += std::log(lambda);
        }
        for (std::size_t q = pos; q < end; ++q)
            for (std::size_t m = 0; m < n_entities; ++m)
                excitation[m] += params.a(m, merged[q].entity) * params.b[m];
        pos = end;
    }

    double integral = 0.0;
    for (std::size_t m = 0; m < n_entities; ++m) {
        integral += params.u[m] * horizon;
        for (std::size_t n = 0; n < n_entities; ++n)
            for (double t : events.times(n))
                integral += params.a(m, n) * -std::expm1(-params.b[m] * (horizon - t));
    }
    return integral - log_sum + penalty(params, mu);
}

namespace {

// Full-history kernel sums for one target entity: for every source n and
// target event i, sum over t_nj < t_mi of exp(-b lag) and lag * exp(-b lag).
struct HistorySums {
    std::size_t count = 0;
    std::vector<double> plain;   // source-major
    std::vector<double> lagged;  // source-major
    std::vector<double> mass;    // per source: sum (1 - exp(-b (T - t_nj)))
    std::vector<double> mass_slope;
};

std::vector<HistorySums> history_sums(const EventData& events, const std::vector<double>& b) {
    const std::size_t n_entities = events.dimension();
    const double horizon = events.horizon();
    std::vector<HistorySums> out(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        const auto targets = events.times(m);
        auto& h = out[m];
        h.count = targets.size();
        h.plain.assign(n_entities * h.count, 0.0);
        h.lagged.assign(n_entities * h.count, 0.0);
        h.mass.assign(n_entities, 0.0);
        h.mass_slope.assign(n_entities, 0.0);
        for (std::size_t n = 0; n < n_entities; ++n) {
            const auto sources = events.times(n);
            std::size_t j = 0;
            double plain = 0.0, lagged = 0.0, prev = 0.0;
            for (std::size_t i = 0; i < h.count; ++i) {
                const double t = targets[i];
                const double gap = t - prev;
                const double decay = std::exp(-b[m] * gap);
                lagged = decay * (lagged + gap * plain);
                plain = decay * plain;
                while (j < sources.size() && sources[j] < t) {
                    const double lag = t - sources[j];
                    const double e = std::exp(-b[m] * lag);
                    plain += e;
                    lagged += lag * e;
                    ++j;
                }
                h.plain[n * h.count + i] = plain;
                h.lagged[n * h.count + i] = lagged;
                prev = t;
            }
            for (double s : sources) {
                const double lag = horizon - s;
                h.mass[n] += -std::expm1(-b[m] * lag);
                h.mass_slope[n] += lag * std::exp(-b[m] * lag);
            }
        }
    }
    return out;
}

std::vector<std::vector<double>> history_intensities(const ModelParams& params, const std::vector<HistorySums>& sums,
                                                     bool& floor_hit) {
    const std::size_t n_entities = params.dimension();
    std::vector<std::vector<double>> out(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        const auto& h = sums[m];
        out[m].resize(h.count);
        for (std::size_t i = 0; i < h.count; ++i) {
            double lambda = params.u[m];
            for (std::size_t n = 0; n < n_entities; ++n)
                lambda += params.a(m, n) * params.b[m] * h.plain[n * h.count + i];
            if (!(lambda > kIntensityFloor)) {
                lambda = kIntensityFloor;
                floor_hit = true;
            }
            out[m][i] = lambda;
        }
    }
    return out;
}

double history_objective(const ModelParams& params, const std::vector<HistorySums>& sums,
                         const std::vector<std::vector<double>>& lambda, double horizon, double mu) {
    double total = penalty(params, mu);
    for (std::size_t m = 0; m < params.dimension(); ++m) {
        total += params.u[m] * horizon;
        for (std::size_t n = 0; n < params.dimension(); ++n)
            total += params.a(m, n) * sums[m].mass[n];
        for (double v : lambda[m])
            total -= std::log(v);
    }
    return total;
}

}  // namespace

FitResult fit_mhp(const EventData& events, const FitConfig& config) {
    check_config(config);
    const std::size_t n_entities = events.dimension();
    ModelParams params = config.init ? *config.init : initial_params(n_entities);
    if (params.dimension() != n_entities)
        throw std::invalid_argument("fit_mhp: initial parameters have the wrong dimension");
    params.validate();
    const double horizon = events.horizon();

    auto sums = history_sums(events, params.b);
    FitResult result;
    TraceMonitor monitor{result};
    bool floor_hit = false;

    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        const ModelParams before = params;

        auto lambda = history_intensities(params, sums, floor_hit);
        for (std::size_t m = 0; m < n_entities; ++m) {
            double inv = 0.0;
            for (double v : lambda[m])
                inv += 1.0 / v;
            params.u[m] *= inv / horizon;
        }

        lambda = history_intensities(params, sums, floor_hit);
        SquareMatrix next_a(n_entities);
        for (std::size_t m = 0; m < n_entities; ++m) {
            const auto& h = sums[m];
            for (std::size_t n = 0; n < n_entities; ++n) {
                if (!(h.mass[n] > 0.0))
                    continue;
                double responsibility = 0.0;
                for (std::size_t i = 0; i < h.count; ++i)
                    responsibility += params.a(m, n) * params.b[m] * h.plain[n * h.count + i] / lambda[m][i];
                next_a(m, n) = std::max((responsibility - config.mu) / h.mass[n], 0.0);
            }
        }
        params.a = std::move(next_a);

        lambda = history_intensities(params, sums, floor_hit);
        bool decay_changed = false;
        for (std::size_t m = 0; m < n_entities; ++m) {
            const auto& h = sums[m];
            double slope = 0.0, excited = 0.0, curvature = 0.0;
            for (std::size_t n = 0; n < n_entities; ++n)
                slope += params.a(m, n) * h.mass_slope[n];
            for (std::size_t i = 0; i < h.count; ++i) {
                double p = 0.0, q = 0.0;
                for (std::size_t n = 0; n < n_entities; ++n) {
                    p += params.a(m, n) * h.plain[n * h.count + i];
                    q += params.a(m, n) * h.lagged[n * h.count + i];
                }
                excited += p / lambda[m][i];
                curvature += q / lambda[m][i];
            }
            const double step = (excited - slope) / curvature;
            if (!(curvature > 0.0) || !std::isfinite(step) || !(step > 0.0)) {
                ++result.stalled_b_steps;
                continue;
            }
            const double clamped = std::clamp(step, kMinDecay, kMaxDecay);
            if (clamped != params.b[m]) {
                params.b[m] = clamped;
                decay_changed = true;
            }
        }
        if (decay_changed)
            sums = history_sums(events, params.b);

        {
            const auto current = history_intensities(params, sums, floor_hit);
            monitor.record(history_objective(params, sums, current, horizon, config.mu), iter, params);
        }
        result.iterations = iter;
        if (max_relative_change(before, {}, params, {}) < config.tol) {
            result.converged = true;
            break;
        }
    }
    monitor.finish(params);
    result.intensity_floor_hit = floor_hit;
    result.bounds.values.resize(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m)
        result.bounds.values[m] = {params.u[m]};
    result.params = std::move(params);
    return result;
}

}  // namespace hawkes_gaps
