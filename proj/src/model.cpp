#include "hawkes_gaps/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hawkes_gaps {

namespace {

constexpr double kPowerTolerance = 1e-10;
constexpr int kPowerMaxIter = 10000;
constexpr std::size_t kDenseFallbackMax = 16;

std::string entity_label(std::size_t m) { return "entity " + std::to_string(m); }

double dense_spectral_radius(const SquareMatrix& a) {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd dense(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            dense(r, c) = a(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("spectral_radius: eigensolver failed");
    double rho = 0.0;
    for (const auto& ev : solver.eigenvalues())
        rho = std::max(rho, std::abs(ev));
    return rho;
}

// Collatz-Wielandt bracketing on (a + I); both bounds converge to rho + 1.
struct PowerResult {
    double lower;
    double upper;
    bool converged;
};

PowerResult shifted_power_iteration(const SquareMatrix& a) {
    const std::size_t n = a.size();
    std::vector<double> x(n, 1.0), y(n);
    double lower = 0.0, upper = 0.0;
    for (int it = 0; it < kPowerMaxIter; ++it) {
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = a.row(r);
            y[r] = x[r] + std::inner_product(row.begin(), row.end(), x.begin(), 0.0);
        }
        lower = std::numeric_limits<double>::infinity();
        upper = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double ratio = y[r] / x[r];
            lower = std::min(lower, ratio);
            upper = std::max(upper, ratio);
        }
        if (upper - lower <= kPowerTolerance * upper)
            return {lower, upper, true};
        const double scale = *std::max_element(y.begin(), y.end());
        for (std::size_t r = 0; r < n; ++r)
            x[r] = y[r] / scale;
    }
    return {lower, upper, false};
}

}  // namespace

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> row_major) : n_(n), data_(std::move(row_major)) {
    if (data_.size() != n * n)
        throw std::invalid_argument("a: expected " + std::to_string(n * n) + " entries, got " +
                                    std::to_string(data_.size()));
}

SquareMatrix SquareMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    SquareMatrix out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size())
            throw std::invalid_argument("a: matrix is not square (row " + std::to_string(r) + ")");
        std::copy(rows[r].begin(), rows[r].end(), out.data_.begin() + static_cast<std::ptrdiff_t>(r * rows.size()));
    }
    return out;
}

std::vector<std::vector<double>> SquareMatrix::rows() const {
    std::vector<std::vector<double>> out(n_);
    for (std::size_t r = 0; r < n_; ++r) {
        const auto rr = row(r);
        out[r].assign(rr.begin(), rr.end());
    }
    return out;
}

void ModelParams::validate() const {
    const std::size_t n = u.size();
    if (n == 0)
        throw std::invalid_argument("u: at least one entity required");
    if (a.size() != n)
        throw std::invalid_argument("a: dimension " + std::to_string(a.size()) + " does not match u (" +
                                    std::to_string(n) + ")");
    if (b.size() != n)
        throw std::invalid_argument("b: length " + std::to_string(b.size()) + " does not match u (" +
                                    std::to_string(n) + ")");
    for (std::size_t m = 0; m < n; ++m) {
        if (!std::isfinite(u[m]) || u[m] < 0.0)
            throw std::invalid_argument("u: entry " + std::to_string(m) + " must be finite and >= 0");
        if (!std::isfinite(b[m]) || b[m] <= 0.0)
            throw std::invalid_argument("b: entry " + std::to_string(m) + " must be finite and > 0");
        for (std::size_t k = 0; k < n; ++k)
            if (!std::isfinite(a(m, k)) || a(m, k) < 0.0)
                throw std::invalid_argument("a: entry (" + std::to_string(m) + "," + std::to_string(k) +
                                            ") must be finite and >= 0");
    }
}

EventData::EventData(std::vector<std::vector<double>> times, double horizon)
    : times_(std::move(times)), horizon_(horizon) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
        throw std::invalid_argument("events: horizon must be finite and > 0");
    for (std::size_t m = 0; m < times_.size(); ++m) {
        const auto& ts = times_[m];
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (!(ts[i] > 0.0 && ts[i] <= horizon_))
                throw std::invalid_argument("events: " + entity_label(m) + " timestamp " + std::to_string(ts[i]) +
                                            " outside (0, T]");
            if (i > 0 && !(ts[i] > ts[i - 1]))
                throw std::invalid_argument("events: " + entity_label(m) + " timestamps not strictly increasing");
        }
    }
}

std::size_t EventData::total_count() const noexcept {
    std::size_t total = 0;
    for (const auto& ts : times_)
        total += ts.size();
    return total;
}

WindowSet::WindowSet(std::vector<IntervalList> windows, double horizon)
    : windows_(std::move(windows)), horizon_(horizon) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
        throw std::invalid_argument("windows: horizon must be finite and > 0");
    for (std::size_t m = 0; m < windows_.size(); ++m) {
        const auto& ws = windows_[m];
        for (std::size_t k = 0; k < ws.size(); ++k) {
            if (!(ws[k].c >= 0.0 && ws[k].c < ws[k].d && ws[k].d <= horizon_))
                throw std::invalid_argument("windows: " + entity_label(m) + " window " + std::to_string(k) +
                                            " violates 0 <= c < d <= T");
            if (k > 0 && ws[k].c < ws[k - 1].d)
                throw std::invalid_argument("windows: " + entity_label(m) + " windows overlap or are unordered");
        }
    }
}

WindowSet WindowSet::shared(std::size_t n, IntervalList windows, double horizon) {
    return WindowSet(std::vector<IntervalList>(n, std::move(windows)), horizon);
}

WindowSet WindowSet::full(std::size_t n, double horizon) {
    return shared(n, IntervalList{{0.0, horizon}}, horizon);
}

std::ptrdiff_t WindowSet::find(std::size_t m, double t) const {
    const auto& ws = windows_.at(m);
    // first window with d >= t
    auto it = std::lower_bound(ws.begin(), ws.end(), t, [](const Interval& w, double v) { return w.d < v; });
    if (it != ws.end() && it->contains(t))
        return it - ws.begin();
    return -1;
}

std::size_t WindowSet::total_windows() const noexcept {
    std::size_t total = 0;
    for (const auto& ws : windows_)
        total += ws.size();
    return total;
}

BoundaryIntensities BoundaryIntensities::at_background(const ModelParams& params, const WindowSet& windows) {
    BoundaryIntensities out;
    out.values.resize(windows.dimension());
    for (std::size_t m = 0; m < windows.dimension(); ++m)
        out.values[m].assign(windows.windows(m).size(), params.u.at(m));
    return out;
}

double spectral_radius(const SquareMatrix& a) {
    const auto v = a.values();
    if (v.size() != a.size() * a.size())
        throw std::invalid_argument("spectral_radius: matrix is not square");
    if (a.size() == 0)
        return 0.0;
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }))
        throw std::invalid_argument("spectral_radius: non-finite entry");
    const bool nonnegative = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
    if (!nonnegative)
        return dense_spectral_radius(a);
    const auto power = shifted_power_iteration(a);
    if (power.converged)
        return std::max(0.0, 0.5 * (power.lower + power.upper) - 1.0);
    if (a.size() <= kDenseFallbackMax)
        return dense_spectral_radius(a);
    return std::max(0.0, power.upper - 1.0);
}

double spectral_radius(const std::vector<std::vector<double>>& a) {
    for (const auto& row : a)
        if (row.size() != a.size())
            throw std::invalid_argument("spectral_radius: matrix is not square");
    return spectral_radius(SquareMatrix::from_rows(a));
}

namespace {

void check_entity(const ModelParams& params, std::size_t m, std::size_t n_events) {
    if (m >= params.dimension())
        throw std::invalid_argument("entity index " + std::to_string(m) + " out of range");
    if (n_events != params.dimension())
        throw std::invalid_argument("event data dimension does not match parameters");
}

// sum over events of entity n with lo < t_j < hi of b exp(-b (t - t_j))
double kernel_sum(std::span<const double> ts, double lo, double hi, double t, double b) {
    auto first = std::upper_bound(ts.begin(), ts.end(), lo);
    auto last = std::lower_bound(ts.begin(), ts.end(), hi);
    double s = 0.0;
    for (auto it = first; it < last; ++it)
        s += b * std::exp(-b * (t - *it));
    return s;
}

}  // namespace

double cif_full(const ModelParams& params, const EventData& events, std::size_t m, double t) {
    check_entity(params, m, events.dimension());
    if (!(t > 0.0 && t <= events.horizon()))
        throw std::invalid_argument("cif_full: t outside (0, T]");
    double lambda = params.u[m];
    const double b = params.b[m];
    for (std::size_t n = 0; n < params.dimension(); ++n) {
        if (params.a(m, n) == 0.0)
            continue;
        lambda += params.a(m, n) * kernel_sum(events.times(n), -std::numeric_limits<double>::infinity(), t, t, b);
    }
    return lambda;
}

double cif_gapped(const ModelParams& params, const EventData& observed, const WindowSet& windows,
                  const BoundaryIntensities& bounds, std::size_t m, double t) {
    check_entity(params, m, observed.dimension());
    const auto k = windows.find(m, t);
    if (k < 0)
        throw std::invalid_argument("cif_gapped: t lies in no window of entity " + std::to_string(m));
    const auto ku = static_cast<std::size_t>(k);
    const Interval w = windows.windows(m)[ku];
    const double u = params.u[m];
    const double b = params.b[m];
    double lambda = u + (bounds(m, ku) - u) * std::exp(-b * (t - w.c));
    for (std::size_t n = 0; n < params.dimension(); ++n) {
        if (params.a(m, n) == 0.0)
            continue;
        lambda += params.a(m, n) * kernel_sum(observed.times(n), w.c, t, t, b);
    }
    return lambda;
}

double integrated_cif_window(const ModelParams& params, const EventData& observed, const WindowSet& windows,
                             const BoundaryIntensities& bounds, std::size_t m, std::size_t k) {
    check_entity(params, m, observed.dimension());
    if (m >= windows.dimension() || k >= windows.windows(m).size())
        throw std::invalid_argument("integrated_cif_window: invalid window index (" + std::to_string(m) + ", " +
                                    std::to_string(k) + ")");
    const Interval w = windows.windows(m)[k];
    const double u = params.u[m];
    const double b = params.b[m];
    const double len = w.length();
    double total = u * len + (bounds(m, k) - u) / b * -std::expm1(-b * len);
    for (std::size_t n = 0; n < params.dimension(); ++n) {
        if (params.a(m, n) == 0.0)
            continue;
        const auto ts = observed.times(n);
        auto first = std::upper_bound(ts.begin(), ts.end(), w.c);
        auto last = std::upper_bound(ts.begin(), ts.end(), w.d);
        double mass = 0.0;
        for (auto it = first; it < last; ++it)
            mass += -std::expm1(-b * (w.d - *it));
        total += params.a(m, n) * mass;
    }
    return total;
}

}  // namespace hawkes_gaps
