#include "hawkes_gaps/simulator.hpp"

#include "hawkes_gaps/parallel.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

namespace hawkes_gaps {

void default_warning_sink(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

EventData simulate(const ModelParams& params, double horizon, RandomStream& rng, const WarningSink& warn) {
    params.validate();
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("simulate: horizon must be finite and > 0");
    const double rho = spectral_radius(params.a);
    if (rho >= 1.0 - 1e-9 && warn) {
        std::ostringstream msg;
        msg << "spectral radius of a is " << rho << "; the process is not stationary";
        warn(msg.str());
    }

    const std::size_t n = params.dimension();
    std::vector<std::vector<double>> times(n);
    // excitation[m] = lambda_m(t) - u_m, right-continuous after accepted events
    std::vector<double> excitation(n, 0.0);
    double background = 0.0;
    for (double x : params.u)
        background += x;

    double t = 0.0;
    double bound = background;
    while (bound > 0.0) {
        const double wait = rng.exponential(bound);
        t += wait;
        if (t > horizon)
            break;
        double total = background;
        for (std::size_t m = 0; m < n; ++m) {
            excitation[m] *= std::exp(-params.b[m] * wait);
            total += excitation[m];
        }
        const double draw = rng.uniform() * bound;
        if (draw < total) {
            // pick the entity whose intensity slice contains the draw
            std::size_t which = n - 1;
            double acc = 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                acc += params.u[m] + excitation[m];
                if (draw < acc) {
                    which = m;
                    break;
                }
            }
            if (times[which].empty() || t > times[which].back())
                times[which].push_back(t);
            for (std::size_t m = 0; m < n; ++m) {
                const double jump = params.a(m, which) * params.b[m];
                excitation[m] += jump;
                total += jump;
            }
        }
        // intensity only decays until the next event, so its current value bounds it
        bound = total;
    }
    return EventData(std::move(times), horizon);
}

EventData simulate(const SimConfig& config) {
    RandomStream rng(derive_seed(config.seed, StreamTag::simulation));
    return simulate(config.params, config.horizon, rng, config.warn);
}

std::vector<std::vector<std::size_t>> count_histogram(const SimConfig& config, std::size_t n_reps,
                                                      double interval_end, unsigned jobs) {
    if (n_reps == 0)
        throw std::invalid_argument("count_histogram: n_reps must be positive");
    if (!(interval_end > 0.0) || interval_end > config.horizon)
        throw std::invalid_argument("count_histogram: interval end must lie in (0, T]");
    config.params.validate();
    const std::size_t n = config.params.dimension();
    std::vector<std::vector<std::size_t>> counts(n, std::vector<std::size_t>(n_reps, 0));
    // warn once, not per replication
    if (config.warn && spectral_radius(config.params.a) >= 1.0 - 1e-9)
        config.warn("count_histogram: spectral radius of a is at or above 1");
    parallel_for(n_reps, jobs, [&](std::size_t r) {
        RandomStream rng(derive_seed(config.seed, StreamTag::histogram, {r}));
        const auto events = simulate(config.params, interval_end, rng, nullptr);
        for (std::size_t m = 0; m < n; ++m)
            counts[m][r] = events.times(m).size();
    });
    return counts;
}

}  // namespace hawkes_gaps
