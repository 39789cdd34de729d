#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hawkes_gaps {

// Dense row-major N x N matrix of branching weights.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
    SquareMatrix(std::size_t n, std::vector<double> row_major);

    static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double operator()(std::size_t row, std::size_t col) const { return data_[row * n_ + col]; }
    [[nodiscard]] double& operator()(std::size_t row, std::size_t col) { return data_[row * n_ + col]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * n_, n_}; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::vector<std::vector<double>> rows() const;

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

// Background rates u (events/time), branching matrix a, decay rates b (1/time).
struct ModelParams {
    std::vector<double> u;
    SquareMatrix a;
    std::vector<double> b;

    [[nodiscard]] std::size_t dimension() const noexcept { return u.size(); }
    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Per-entity strictly increasing timestamps in (0, horizon].
class EventData {
public:
    EventData() = default;
    EventData(std::vector<std::vector<double>> times, double horizon);

    [[nodiscard]] std::size_t dimension() const noexcept { return times_.size(); }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::span<const double> times(std::size_t m) const { return times_.at(m); }
    [[nodiscard]] const std::vector<std::vector<double>>& all_times() const noexcept { return times_; }
    [[nodiscard]] std::size_t total_count() const noexcept;

    friend bool operator==(const EventData&, const EventData&) = default;

private:
    std::vector<std::vector<double>> times_;
    double horizon_ = 0.0;
};

// Half-open observation interval (c, d].
struct Interval {
    double c = 0.0;
    double d = 0.0;

    [[nodiscard]] double length() const noexcept { return d - c; }
    [[nodiscard]] bool contains(double t) const noexcept { return c < t && t <= d; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

using IntervalList = std::vector<Interval>;

// Per-entity disjoint, ordered observation windows inside (0, horizon].
class WindowSet {
public:
    WindowSet() = default;
    WindowSet(std::vector<IntervalList> windows, double horizon);

    // The same window list for every one of `n` entities.
    static WindowSet shared(std::size_t n, IntervalList windows, double horizon);
    // One window (0, horizon] per entity.
    static WindowSet full(std::size_t n, double horizon);

    [[nodiscard]] std::size_t dimension() const noexcept { return windows_.size(); }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] const IntervalList& windows(std::size_t m) const { return windows_.at(m); }
    [[nodiscard]] const std::vector<IntervalList>& all() const noexcept { return windows_; }
    // Index of the window of entity m containing t, or -1.
    [[nodiscard]] std::ptrdiff_t find(std::size_t m, double t) const;
    [[nodiscard]] std::size_t total_windows() const noexcept;

    friend bool operator==(const WindowSet&, const WindowSet&) = default;

private:
    std::vector<IntervalList> windows_;
    double horizon_ = 0.0;
};

// lambda_bar[m][k]: intensity at the left endpoint of window k of entity m.
struct BoundaryIntensities {
    std::vector<std::vector<double>> values;

    // All boundary values equal to the background rate.
    static BoundaryIntensities at_background(const ModelParams& params, const WindowSet& windows);

    [[nodiscard]] double operator()(std::size_t m, std::size_t k) const { return values.at(m).at(k); }

    friend bool operator==(const BoundaryIntensities&, const BoundaryIntensities&) = default;
};

// Largest absolute eigenvalue. Power iteration on the shifted matrix for
// nonnegative input; dense eigensolve when that does not settle (N <= 16) or
// when the matrix has negative entries.
[[nodiscard]] double spectral_radius(const SquareMatrix& a);
[[nodiscard]] double spectral_radius(const std::vector<std::vector<double>>& a);

[[nodiscard]] inline bool is_stationary(const ModelParams& params) {
    return spectral_radius(params.a) < 1.0;
}

// lambda_m(t) = u_m + sum_n a_{m,n} sum_{t_{n,j} < t} b_m exp(-b_m (t - t_{n,j})).
[[nodiscard]] double cif_full(const ModelParams& params, const EventData& events, std::size_t m, double t);

// Gapped intensity on the window of entity m that contains t, driven by the
// boundary value at the window's left endpoint and by observed events inside it.
[[nodiscard]] double cif_gapped(const ModelParams& params, const EventData& observed, const WindowSet& windows,
                                const BoundaryIntensities& bounds, std::size_t m, double t);

// Closed-form integral of cif_gapped over window k of entity m.
[[nodiscard]] double integrated_cif_window(const ModelParams& params, const EventData& observed,
                                           const WindowSet& windows, const BoundaryIntensities& bounds,
                                           std::size_t m, std::size_t k);

}  // namespace hawkes_gaps
