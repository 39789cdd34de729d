#include "hawkes_gaps/estimator.hpp"
#include "hawkes_gaps/oracle.hpp"
#include "hawkes_gaps/simulator.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace hawkes_gaps;

namespace {

double rel_diff(double x, double y) { return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-8}); }

// J with everything but one scalar frozen.
struct Probe {
    const hg_test::Instance& inst;
    double mu = 0.0;

    double at(const ModelParams& p, const BoundaryIntensities& bounds) const {
        const auto stats = precompute_stats(inst.observed, inst.windows, p.b);
        return objective(p, bounds, inst.observed, inst.windows, stats, mu);
    }
};

EventData poisson_events(double rate, double horizon, std::uint64_t seed, std::size_t n = 1) {
    const ModelParams p{std::vector<double>(n, rate), SquareMatrix(n), std::vector<double>(n, 1.0)};
    return simulate(SimConfig{p, horizon, seed});
}

}  // namespace

TEST_CASE("statistics edge cases") {
    const WindowSet w({{{0, 2}}, {{0, 2}}}, 4.0);
    SUBCASE("no source events in the window") {
        const auto s = precompute_stats(EventData({{0.5, 1.0}, {}}, 4.0), w, {2.0, 2.0});
        const auto& ws = s.windows[0][0];
        for (std::size_t i = 0; i < ws.count; ++i)
            CHECK(ws.A(1, i) == 0.0);
        CHECK(ws.compensator[1] == 0.0);
    }
    SUBCASE("source event at the right endpoint") {
        const auto s = precompute_stats(EventData({{}, {2.0}}, 4.0), w, {2.0, 2.0});
        CHECK(s.windows[0][0].compensator[1] == 0.0);
    }
    SUBCASE("events outside the windows are rejected") {
        CHECK_THROWS_AS(precompute_stats(EventData({{3.0}, {}}, 4.0), w, {2.0, 2.0}), std::invalid_argument);
    }
}

TEST_CASE("objective of a Poisson window set") {
    const WindowSet w({{{0, 3}, {5, 7}}}, 8.0);
    const EventData e({{1.0, 2.0, 5.5, 6.0}}, 8.0);
    const ModelParams p{{1.3}, SquareMatrix(1), {2.0}};
    const auto bounds = BoundaryIntensities::at_background(p, w);
    const auto stats = precompute_stats(e, w, p.b);
    CHECK(objective(p, bounds, e, w, stats, 0.0) == doctest::Approx(1.3 * 5 - 4 * std::log(1.3)).epsilon(1e-14));
    const oracle::ScalarFunction J = [&](std::span<const double> x) {
        ModelParams q{{x[0]}, SquareMatrix(1), {2.0}};
        return objective(q, BoundaryIntensities::at_background(q, w), e, w, stats, 0.0);
    };
    const std::vector<double> at{0.8};
    CHECK(std::abs(oracle::fd_gradient(J, at, 0, 1e-5)) < 1e-8);
}

TEST_CASE("nonpositive intensity at an event is reported with its location") {
    const WindowSet w({{{0, 3}}}, 3.0);
    const EventData e({{1.0, 2.0}}, 3.0);
    const ModelParams p{{0.0}, SquareMatrix(1), {2.0}};
    const auto bounds = BoundaryIntensities::at_background(p, w);
    const auto stats = precompute_stats(e, w, p.b);
    try {
        (void)objective(p, bounds, e, w, stats, 0.0);
        FAIL("expected IntensityError");
    } catch (const IntensityError& err) {
        CHECK(err.entity == 0);
        CHECK(err.window == 0);
        CHECK(err.event == 0);
        CHECK(err.value == 0.0);
    }
    const auto floored = event_intensities(p, bounds, w, stats, kIntensityFloor);
    CHECK(floored.floor_hit);
}

TEST_CASE("full-window objective equals the complete-data objective") {
    const ModelParams truth{{1, 2}, SquareMatrix::from_rows({{0.4, 0.3}, {0.1, 0.4}}), {3, 5}};
    const auto events = simulate(SimConfig{truth, 100.0, 12});
    const auto full = WindowSet::full(2, 100.0);
    RandomStream rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        ModelParams p{{rng.uniform(0.2, 3), rng.uniform(0.2, 3)},
                      SquareMatrix(2, {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)}),
                      {rng.uniform(0.5, 8), rng.uniform(0.5, 8)}};
        const auto stats = precompute_stats(events, full, p.b);
        const double gapped = objective(p, BoundaryIntensities::at_background(p, full), events, full, stats, 0.7);
        CHECK(rel_diff(gapped, mhp_objective(p, events, 0.7)) < 1e-10);
    }
}

TEST_CASE("analytic derivatives match finite differences") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto inst = hg_test::random_instance(seed, 2, 60);
        const Probe probe{inst};
        const auto stats = precompute_stats(inst.observed, inst.windows, inst.params.b);
        const auto mode = BoundaryMode::box(20.0);
        const auto grad = objective_gradient(inst.params, inst.bounds, inst.windows, stats, mode);
        const auto lambda = event_intensities(inst.params, inst.bounds, inst.windows, stats);
        const auto uterms = u_terms(inst.params, inst.bounds, inst.windows, stats, lambda, mode);
        const auto bterms = b_terms(inst.params, inst.bounds, inst.windows, stats, lambda);
        const double h = 1e-5;
        for (std::size_t m = 0; m < 2; ++m) {
            auto fu = [&](std::span<const double> x) {
                auto p = inst.params;
                p.u[m] = x[0];
                return probe.at(p, inst.bounds);
            };
            const std::vector<double> u0{inst.params.u[m]};
            const double du = oracle::fd_gradient(fu, u0, 0, h);
            CHECK(rel_diff(grad.du[m], du) < 1e-4);
            CHECK(rel_diff(uterms.integral[m] - uterms.events[m], du) < 1e-4);

            auto fb = [&](std::span<const double> x) {
                auto p = inst.params;
                p.b[m] = x[0];
                return probe.at(p, inst.bounds);
            };
            const std::vector<double> b0{inst.params.b[m]};
            const double db = oracle::fd_gradient(fb, b0, 0, h);
            CHECK(rel_diff(grad.db[m], db) < 1e-4);
            CHECK(rel_diff(bterms.A1[m] - bterms.A2[m] + inst.params.b[m] * bterms.A3[m], db) < 1e-4);

            for (std::size_t n = 0; n < 2; ++n) {
                auto fa = [&](std::span<const double> x) {
                    auto p = inst.params;
                    p.a(m, n) = x[0];
                    return probe.at(p, inst.bounds);
                };
                const std::vector<double> a0{inst.params.a(m, n)};
                CHECK(rel_diff(grad.da(m, n), oracle::fd_gradient(fa, a0, 0, h)) < 1e-4);
            }
            for (std::size_t k = 0; k < inst.bounds.values[m].size(); k += 4) {
                auto fl = [&](std::span<const double> x) {
                    auto bounds = inst.bounds;
                    bounds.values[m][k] = x[0];
                    return probe.at(inst.params, bounds);
                };
                const std::vector<double> l0{inst.bounds.values[m][k]};
                CHECK(rel_diff(grad.dlambda[m][k], oracle::fd_gradient(fl, l0, 0, h)) < 1e-4);
            }
        }
    }
}

TEST_CASE("u update") {
    const WindowSet w({{{0, 10}, {20, 30}}, {{0, 30}}}, 30.0);
    std::vector<double> t;
    for (int i = 1; i <= 8; ++i)
        t.push_back(i * 1.1);
    const EventData e({t, {}}, 30.0);
    ModelParams p{{1.0, 1.0}, SquareMatrix(2), {2.0, 2.0}};

    SUBCASE("entity without events drops to zero") {
        auto state = make_state(p, BoundaryIntensities::at_background(p, w), e, w);
        CHECK(update_u(state, w, BoundaryMode::fixed_at_u())[1] == 0.0);
    }
    SUBCASE("Poisson fixed point is count over observed time") {
        for (auto mode : {BoundaryMode::fixed_at_u(), BoundaryMode::box(20.0)}) {
            auto state = make_state(p, BoundaryIntensities::at_background(p, w), e, w);
            for (int it = 0; it < 200; ++it) {
                auto next = update_u(state, w, mode);
                state.bounds = carry_bounds(state.bounds, state.params.u, next, mode);
                state.params.u = next;
            }
            CHECK(state.params.u[0] == doctest::Approx(8.0 / 20.0).epsilon(1e-6));
            const auto again = update_u(state, w, mode);
            CHECK(std::abs(again[0] - state.params.u[0]) < 1e-12);
        }
    }
    SUBCASE("degenerate windows") {
        const WindowSet empty({{}, {}}, 30.0);
        auto state = make_state(p, BoundaryIntensities::at_background(p, empty), EventData({{}, {}}, 30.0), empty);
        CHECK_THROWS_AS(update_u(state, empty, BoundaryMode::fixed_at_u()), NumericalError);
    }
}

TEST_CASE("a update") {
    const auto inst = hg_test::random_instance(4);
    const auto state = make_state(inst.params, inst.bounds, inst.observed, inst.windows);
    const auto big = update_a(state, inst.windows, 1e9);
    for (double v : big.values())
        CHECK(v == 0.0);
    const auto plain = update_a(state, inst.windows, 0.0);
    for (double v : plain.values())
        CHECK(v >= 0.0);
    CHECK_THROWS_AS(update_a(state, inst.windows, -1.0), std::invalid_argument);

    // source entity 1 silent: nothing to attribute
    const WindowSet w({{{0, 5}}, {{0, 5}}}, 5.0);
    const EventData e({{1.0, 2.0, 3.0}, {}}, 5.0);
    const ModelParams p{{1, 1}, SquareMatrix(2, 0.3), {2, 2}};
    const auto s2 = make_state(p, BoundaryIntensities::at_background(p, w), e, w);
    const auto a = update_a(s2, w, 0.0);
    CHECK(a(0, 1) == 0.0);
    CHECK(a(1, 1) == 0.0);
}

TEST_CASE("b update") {
    const WindowSet w({{{0, 5}}}, 5.0);
    const EventData e({{1.0, 2.0, 3.0}}, 5.0);
    const ModelParams p{{1}, SquareMatrix(1), {2}};
    const auto state = make_state(p, BoundaryIntensities::at_background(p, w), e, w);
    const auto step = update_b(state, w);
    CHECK(step.stalled[0]);
    CHECK(step.b[0] == 2.0);
}

TEST_CASE("boundary update") {
    const auto inst = hg_test::random_instance(8);
    const auto state = make_state(inst.params, inst.bounds, inst.observed, inst.windows);
    const auto fixed = update_lambda(state, inst.windows, BoundaryMode::fixed_at_u());
    const auto boxed = update_lambda(state, inst.windows, BoundaryMode::box(3.0));
    for (std::size_t m = 0; m < 2; ++m) {
        for (std::size_t k = 0; k < fixed.values[m].size(); ++k) {
            CHECK(fixed.values[m][k] == inst.params.u[m]);
            CHECK(boxed.values[m][k] >= inst.params.u[m]);
            CHECK(boxed.values[m][k] <= 3.0 * inst.params.u[m] * (1 + 1e-15));
        }
    }
    const WindowSet w({{{0, 1}, {2, 3}}}, 3.0);
    const EventData e({{0.5}}, 3.0);
    const ModelParams p{{1}, SquareMatrix(1, 0.2), {2}};
    BoundaryIntensities b{{{3.0, 3.0}}};
    const auto s = make_state(p, b, e, w);
    CHECK(update_lambda(s, w, BoundaryMode::box(20.0)).values[0][1] == 1.0);
    CHECK_THROWS_AS(BoundaryMode::box(0.5), std::invalid_argument);
}

TEST_CASE("boundary values rise after dense activity") {
    const ModelParams truth{{1, 2}, SquareMatrix::from_rows({{0.9, 0.75}, {0, 0.9}}), {10, 10}};
    const auto events = simulate(SimConfig{truth, 200.0, 21});
    const auto windows = generate_shared_windows(GapConfig{0.3, 0.5, 3.0, 200.0, 22}, 2);
    const auto observed = restrict_events(events, windows);
    FitConfig config;
    config.mu = default_mu(observed);
    config.max_iter = 200;
    const auto result = fit(observed, windows, config);
    std::size_t lifted = 0;
    for (std::size_t k = 0; k < result.bounds.values[0].size(); ++k)
        lifted += result.bounds.values[0][k] > result.params.u[0] * (1 + 1e-9) ? 1 : 0;
    CHECK(lifted > 0);
}

TEST_CASE("fit on Poisson data with a forced to zero") {
    const auto events = poisson_events(5.0, 200.0, 3, 2);
    const auto full = WindowSet::full(2, 200.0);
    FitConfig config;
    config.mu = 1e6;
    const auto result = fit(events, full, config);
    for (std::size_t m = 0; m < 2; ++m)
        CHECK(result.params.u[m] ==
              doctest::Approx(static_cast<double>(events.times(m).size()) / 200.0).epsilon(1e-4));
    for (double v : result.params.a.values())
        CHECK(v == 0.0);
    CHECK(result.converged);
}

TEST_CASE("fixed boundary on one full window reproduces the baseline fit") {
    const ModelParams truth{{1, 1}, SquareMatrix::from_rows({{0.4, 0.2}, {0.0, 0.3}}), {4, 4}};
    const auto events = simulate(SimConfig{truth, 300.0, 31});
    FitConfig config;
    config.mu = 0.5;
    config.boundary = BoundaryMode::fixed_at_u();
    config.tol = 1e-10;
    config.max_iter = 3000;
    const auto gapped = fit(events, WindowSet::full(2, 300.0), config);
    const auto blind = fit_mhp(events, config);
    const auto x = hg_test::flatten_params(gapped.params);
    const auto y = hg_test::flatten_params(blind.params);
    for (std::size_t q = 0; q < x.size(); ++q)
        CHECK(std::abs(x[q] - y[q]) < 1e-8 * (1 + std::abs(y[q])));
    REQUIRE(gapped.objective_trace.size() == blind.objective_trace.size());
    for (std::size_t i = 0; i < gapped.objective_trace.size(); ++i)
        CHECK(rel_diff(gapped.objective_trace[i], blind.objective_trace[i]) < 1e-10);
}

TEST_CASE("univariate recovery on complete data") {
    const ModelParams truth{{5}, SquareMatrix(1, 0.5), {10}};
    const auto events = simulate(SimConfig{truth, 1000.0, 41});
    FitConfig config;
    config.mu = 0.0;
    const auto result = fit(events, WindowSet::full(1, 1000.0), config);
    CHECK(std::abs(result.params.a(0, 0) - 0.5) < 0.05);
    CHECK(result.params.u[0] == doctest::Approx(5.0).epsilon(0.15));
    CHECK(result.params.b[0] == doctest::Approx(10.0).epsilon(0.25));
}

TEST_CASE("baseline on an empty record") {
    FitConfig config;
    const auto result = fit_mhp(EventData({{}, {}}, 10.0), config);
    for (double u : result.params.u)
        CHECK(u == 0.0);
    for (double a : result.params.a.values())
        CHECK(a == 0.0);
}

TEST_CASE("fit trace, invariants and box feasibility") {
    const ModelParams truth{{5, 5}, SquareMatrix::from_rows({{0.5, 0.5}, {0, 0.5}}), {10, 10}};
    const auto events = simulate(SimConfig{truth, 300.0, 51});
    const auto windows = generate_shared_windows(GapConfig{0.3, 0.5, 3.0, 300.0, 52}, 2);
    const auto observed = restrict_events(events, windows);
    FitConfig config;
    config.mu = default_mu(observed);
    const auto result = fit(observed, windows, config);
    CHECK(result.objective_trace.size() == result.iterations);
    std::size_t rises = 0;
    for (std::size_t i = 1; i < result.objective_trace.size(); ++i) {
        const double prev = result.objective_trace[i - 1];
        rises += result.objective_trace[i] > prev + 1e-8 * (1 + std::abs(prev)) ? 1 : 0;
    }
    CHECK(rises == result.ascent_steps);
    CHECK(result.objective_trace.back() < result.objective_trace.front());
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(result.params.u[m] >= 0.0);
        CHECK(result.params.b[m] > 0.0);
        for (double v : result.bounds.values[m]) {
            CHECK(v >= result.params.u[m] * (1 - 1e-12));
            CHECK(v <= 20.0 * result.params.u[m] * (1 + 1e-12));
        }
    }
    for (double v : result.params.a.values())
        CHECK(v >= 0.0);
}

TEST_CASE("fit configuration errors") {
    const auto events = poisson_events(1.0, 10.0, 1);
    FitConfig config;
    config.tol = 0.0;
    CHECK_THROWS_AS(fit(events, WindowSet::full(1, 10.0), config), std::invalid_argument);
    config = FitConfig{};
    config.mu = -1.0;
    CHECK_THROWS_AS(fit(events, WindowSet::full(1, 10.0), config), std::invalid_argument);
    config = FitConfig{};
    CHECK_THROWS_AS(fit(events, WindowSet::full(2, 10.0), config), std::invalid_argument);
}
