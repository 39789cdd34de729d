#pragma once

// Reference implementations for tests and acceptance runs. None of these
// reuse the kernel-sum recursion or the closed-form integrals they check.

#include "hawkes_gaps/estimator.hpp"
#include "hawkes_gaps/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace hawkes_gaps::oracle {

// Composite midpoint rule with step at most dt on every smooth piece.
struct QuadratureSpec {
    double dt = 1e-4;
};

// Inputs above this many kernel-pair evaluations are rejected.
constexpr double kMaxPairEvaluations = 1e7;

// Integral of the gapped intensity over window k of entity m. The window is
// split at observed event times so the integrand is smooth on each piece.
[[nodiscard]] double quad_integrated_cif(const ModelParams& params, const EventData& observed,
                                         const WindowSet& windows, const BoundaryIntensities& bounds,
                                         std::size_t m, std::size_t k, QuadratureSpec spec);

// Every A, A1, A2, B and dB/db entry from its defining double sum.
[[nodiscard]] SufficientStats brute_force_stats(const EventData& observed, const WindowSet& windows,
                                                const std::vector<double>& b);

using ScalarFunction = std::function<double(std::span<const double>)>;

// (f(x + h e_i) - f(x - h e_i)) / 2h
[[nodiscard]] double fd_gradient(const ScalarFunction& f, std::span<const double> point, std::size_t coordinate,
                                 double h);

// count / total observed time, per entity.
[[nodiscard]] std::vector<double> poisson_mle(const EventData& observed, const WindowSet& windows);

}  // namespace hawkes_gaps::oracle
