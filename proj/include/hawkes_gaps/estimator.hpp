#pragma once

#include "hawkes_gaps/model.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hawkes_gaps {

// Per-event intensity that is zero or negative at an observed event.
class IntensityError : public std::runtime_error {
public:
    IntensityError(std::size_t entity, std::size_t window, std::size_t event, double value);
    std::size_t entity;
    std::size_t window;
    std::size_t event;  // index within the window
    double value;
};

// Non-finite objective, degenerate denominators and similar.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Kernel sums for window k of target entity m at fixed decay b_m. Target
// events are observed.times(m)[first, first + count). Per-source arrays are
// source-major: value(n, i) = data[n * count + i].
struct WindowStats {
    std::size_t first = 0;
    std::size_t count = 0;
    // t_mi - c for each target event
    std::vector<double> since_start;
    // A:   sum_{c < t_nj < t_mi} b exp(-b (t_mi - t_nj))
    std::vector<double> kernel;
    // A1:  same sum without the b factor
    std::vector<double> decay;
    // A2:  sum (t_mi - t_nj) exp(-b (t_mi - t_nj))
    std::vector<double> lagged_decay;
    // B:   sum_{c < t_nj <= d} (1 - exp(-b (d - t_nj))), per source n
    std::vector<double> compensator;
    // dB/db = sum (d - t_nj) exp(-b (d - t_nj)), per source n
    std::vector<double> compensator_slope;

    [[nodiscard]] double A(std::size_t n, std::size_t i) const { return kernel[n * count + i]; }
    [[nodiscard]] double A1(std::size_t n, std::size_t i) const { return decay[n * count + i]; }
    [[nodiscard]] double A2(std::size_t n, std::size_t i) const { return lagged_decay[n * count + i]; }
};

struct SufficientStats {
    std::vector<double> b;
    // windows[m][k]
    std::vector<std::vector<WindowStats>> windows;
};

// Left-to-right recursion over the target events of every window. Throws
// std::invalid_argument when an observed event of entity m lies outside all of
// m's windows.
[[nodiscard]] SufficientStats precompute_stats(const EventData& observed, const WindowSet& windows,
                                               const std::vector<double>& b);

struct BoundaryMode {
    enum class Kind { fixed_at_u, box };
    Kind kind = Kind::box;
    double C = 20.0;

    static BoundaryMode fixed_at_u() { return {Kind::fixed_at_u, 1.0}; }
    static BoundaryMode box(double C);
};

// Intensities at observed events: values[m][k][i].
struct EventIntensities {
    std::vector<std::vector<std::vector<double>>> values;
    bool floor_hit = false;
};

// With floor > 0, intensities below it are replaced by it and flagged; with
// floor == 0 a nonpositive intensity throws IntensityError.
[[nodiscard]] EventIntensities event_intensities(const ModelParams& params, const BoundaryIntensities& bounds,
                                                 const WindowSet& windows, const SufficientStats& stats,
                                                 double floor = 0.0);

// mu * sum |a| + sum_m sum_k [Lambda_mk - sum_i log lambda_mk(t_i)].
[[nodiscard]] double objective(const ModelParams& params, const BoundaryIntensities& bounds,
                               const EventData& observed, const WindowSet& windows, const SufficientStats& stats,
                               double mu);

// Partial derivatives of the unpenalized objective. du is taken along the
// active boundary constraint: a boundary value sitting at u (always, for
// fixed_at_u) or at C * u moves with u; interior boundary values are held.
struct ObjectiveGradient {
    std::vector<double> du;
    SquareMatrix da;
    std::vector<double> db;
    std::vector<std::vector<double>> dlambda;
};

[[nodiscard]] ObjectiveGradient objective_gradient(const ModelParams& params, const BoundaryIntensities& bounds,
                                                   const WindowSet& windows, const SufficientStats& stats,
                                                   BoundaryMode mode);

// dJ/du_m = integral[m] - events[m]; the fixed-point step is u * events / integral.
struct UTerms {
    std::vector<double> integral;
    std::vector<double> events;
};

// dJ/db_m = A1[m] - A2[m] + b_m * A3[m]; the fixed-point step is (A2 - A1) / A3.
struct BTerms {
    std::vector<double> A1;
    std::vector<double> A2;
    std::vector<double> A3;
};

[[nodiscard]] UTerms u_terms(const ModelParams& params, const BoundaryIntensities& bounds, const WindowSet& windows,
                             const SufficientStats& stats, const EventIntensities& lambda, BoundaryMode mode);
[[nodiscard]] BTerms b_terms(const ModelParams& params, const BoundaryIntensities& bounds, const WindowSet& windows,
                             const SufficientStats& stats, const EventIntensities& lambda);

struct FitState {
    ModelParams params;
    BoundaryIntensities bounds;
    SufficientStats stats;  // always evaluated at params.b
};

[[nodiscard]] FitState make_state(ModelParams params, BoundaryIntensities bounds, const EventData& observed,
                                  const WindowSet& windows);

constexpr double kMinDecay = 1e-6;
constexpr double kMaxDecay = 1e6;
constexpr double kIntensityFloor = 1e-12;

// Fixed-point step for u along the active boundary constraints.
[[nodiscard]] std::vector<double> update_u(const FitState& state, const WindowSet& windows, BoundaryMode mode);

// Boundary values after u changes from old_u to new_u: values on the lower
// (or upper) face stay at new_u (or C * new_u); interior values are clipped to
// the new box.
[[nodiscard]] BoundaryIntensities carry_bounds(const BoundaryIntensities& bounds, const std::vector<double>& old_u,
                                               const std::vector<double>& new_u, BoundaryMode mode);

// Multiplicative step followed by soft-thresholding at mu / sum_k B.
[[nodiscard]] SquareMatrix update_a(const FitState& state, const WindowSet& windows, double mu);

struct DecayUpdate {
    std::vector<double> b;
    std::vector<bool> stalled;  // A3 <= 0 or non-finite step; previous b kept
};

[[nodiscard]] DecayUpdate update_b(const FitState& state, const WindowSet& windows);

[[nodiscard]] BoundaryIntensities update_lambda(const FitState& state, const WindowSet& windows, BoundaryMode mode);

struct FitConfig {
    double mu = 0.0;
    BoundaryMode boundary = BoundaryMode::box(20.0);
    double tol = 1e-6;
    std::size_t max_iter = 500;
    // Defaults: u = 1, a = 0.5 / N, b = 1000, lambda_bar = u.
    std::optional<ModelParams> init;
    std::optional<BoundaryIntensities> init_bounds;
};

struct FitResult {
    ModelParams params;
    BoundaryIntensities bounds;
    std::vector<double> objective_trace;  // J after each iteration
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t stalled_b_steps = 0;
    std::size_t ascent_steps = 0;  // iterations where J rose beyond 1e-8 (1 + |J|)
    bool intensity_floor_hit = false;
};

// 0.001 * (observed events) / N^2.
[[nodiscard]] double default_mu(const EventData& observed);

[[nodiscard]] ModelParams initial_params(std::size_t n);

// Cycles update_u, update_a, update_b, update_lambda until the largest
// relative parameter change |delta| / (1 + |theta|) drops below tol.
[[nodiscard]] FitResult fit(const EventData& observed, const WindowSet& windows, const FitConfig& config);

// Gap-blind baseline: the complete-data likelihood on (0, T], computed by its
// own full-history recursion. The boundary mode in config is ignored.
[[nodiscard]] double mhp_objective(const ModelParams& params, const EventData& events, double mu);
[[nodiscard]] FitResult fit_mhp(const EventData& events, const FitConfig& config);

}  // namespace hawkes_gaps
