#include "hawkes_gaps/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hawkes_gaps::oracle {

namespace {

// Direct evaluation at t of the gapped intensity on window w, summing over
// every observed source event in (w.c, t).
double direct_intensity(const ModelParams& params, const EventData& observed, Interval w, double boundary,
                        std::size_t m, double t) {
    const double b = params.b[m];
    double value = params.u[m] + (boundary - params.u[m]) * std::exp(-b * (t - w.c));
    for (std::size_t n = 0; n < observed.dimension(); ++n)
        for (double s : observed.times(n))
            if (s > w.c && s < t)
                value += params.a(m, n) * b * std::exp(-b * (t - s));
    return value;
}

}  // namespace

double quad_integrated_cif(const ModelParams& params, const EventData& observed, const WindowSet& windows,
                           const BoundaryIntensities& bounds, std::size_t m, std::size_t k, QuadratureSpec spec) {
    if (m >= windows.dimension() || k >= windows.windows(m).size())
        throw std::invalid_argument("quad_integrated_cif: invalid window index");
    const Interval w = windows.windows(m)[k];
    if (!(spec.dt > 0.0) || spec.dt > w.length() / 100.0 * (1.0 + 1e-12))
        throw std::invalid_argument("quad_integrated_cif: dt must be in (0, window length / 100]");
    const double steps_total = w.length() / spec.dt;
    if (steps_total * static_cast<double>(observed.total_count() + 1) > 50.0 * kMaxPairEvaluations)
        throw std::invalid_argument("quad_integrated_cif: instance too large for the oracle");

    // breakpoints: window ends plus every observed event strictly inside
    std::vector<double> cuts{w.c, w.d};
    for (std::size_t n = 0; n < observed.dimension(); ++n)
        for (double s : observed.times(n))
            if (s > w.c && s < w.d)
                cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const double boundary = bounds(m, k);
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p];
        const double hi = cuts[p + 1];
        const auto pieces = static_cast<std::size_t>(std::ceil((hi - lo) / spec.dt));
        const double h = (hi - lo) / static_cast<double>(pieces);
        double piece_sum = 0.0;
        for (std::size_t q = 0; q < pieces; ++q)
            piece_sum += direct_intensity(params, observed, w, boundary, m, lo + (static_cast<double>(q) + 0.5) * h);
        total += piece_sum * h;
    }
    return total;
}

SufficientStats brute_force_stats(const EventData& observed, const WindowSet& windows, const std::vector<double>& b) {
    const std::size_t n_entities = observed.dimension();
    if (windows.dimension() != n_entities || b.size() != n_entities)
        throw std::invalid_argument("brute_force_stats: dimension mismatch");
    const double total = static_cast<double>(observed.total_count());
    if (total * total * static_cast<double>(n_entities) > kMaxPairEvaluations)
        throw std::invalid_argument("brute_force_stats: instance too large for the oracle");

    SufficientStats stats;
    stats.b = b;
    stats.windows.resize(n_entities);
    for (std::size_t m = 0; m < n_entities; ++m) {
        const auto targets = observed.times(m);
        const double bm = b[m];
        for (const Interval& w : windows.windows(m)) {
            WindowStats ws;
            std::vector<double> inside;
            for (std::size_t i = 0; i < targets.size(); ++i) {
                if (w.contains(targets[i])) {
                    if (inside.empty())
                        ws.first = i;
                    inside.push_back(targets[i]);
                }
            }
            ws.count = inside.size();
            for (double t : inside)
                ws.since_start.push_back(t - w.c);
            ws.kernel.assign(n_entities * ws.count, 0.0);
            ws.decay.assign(n_entities * ws.count, 0.0);
            ws.lagged_decay.assign(n_entities * ws.count, 0.0);
            ws.compensator.assign(n_entities, 0.0);
            ws.compensator_slope.assign(n_entities, 0.0);
            for (std::size_t n = 0; n < n_entities; ++n) {
                for (std::size_t i = 0; i < ws.count; ++i) {
                    double a = 0.0, a1 = 0.0, a2 = 0.0;
                    for (double s : observed.times(n)) {
                        if (!(s > w.c && s < inside[i]))
                            continue;
                        const double lag = inside[i] - s;
                        a += bm * std::exp(-bm * lag);
                        a1 += std::exp(-bm * lag);
                        a2 += lag * std::exp(-bm * lag);
                    }
                    ws.kernel[n * ws.count + i] = a;
                    ws.decay[n * ws.count + i] = a1;
                    ws.lagged_decay[n * ws.count + i] = a2;
                }
                for (double s : observed.times(n)) {
                    if (!w.contains(s))
                        continue;
                    ws.compensator[n] += 1.0 - std::exp(-bm * (w.d - s));
                    ws.compensator_slope[n] += (w.d - s) * std::exp(-bm * (w.d - s));
                }
            }
            stats.windows[m].push_back(std::move(ws));
        }
    }
    return stats;
}

double fd_gradient(const ScalarFunction& f, std::span<const double> point, std::size_t coordinate, double h) {
    if (!(h > 0.0))
        throw std::invalid_argument("fd_gradient: h must be > 0");
    if (coordinate >= point.size())
        throw std::invalid_argument("fd_gradient: coordinate out of range");
    std::vector<double> probe(point.begin(), point.end());
    probe[coordinate] = point[coordinate] + h;
    const double up = f(probe);
    probe[coordinate] = point[coordinate] - h;
    const double down = f(probe);
    if (!std::isfinite(up) || !std::isfinite(down))
        throw std::domain_error("fd_gradient: objective not finite at probe points");
    return (up - down) / (2.0 * h);
}

std::vector<double> poisson_mle(const EventData& observed, const WindowSet& windows) {
    if (observed.dimension() != windows.dimension())
        throw std::invalid_argument("poisson_mle: dimension mismatch");
    std::vector<double> rates(observed.dimension());
    for (std::size_t m = 0; m < observed.dimension(); ++m) {
        double exposure = 0.0;
        std::size_t count = 0;
        for (const Interval& w : windows.windows(m)) {
            exposure += w.length();
            for (double t : observed.times(m))
                count += w.contains(t) ? 1 : 0;
        }
        if (!(exposure > 0.0))
            throw std::domain_error("poisson_mle: entity " + std::to_string(m) + " has zero observed time");
        rates[m] = static_cast<double>(count) / exposure;
    }
    return rates;
}

}  // namespace hawkes_gaps::oracle
