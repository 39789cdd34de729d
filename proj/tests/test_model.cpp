#include "hawkes_gaps/model.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace hawkes_gaps;

namespace {

ModelParams univariate(double u, double a, double b) { return {{u}, SquareMatrix(1, a), {b}}; }

ModelParams example1() { return {{5, 5}, SquareMatrix::from_rows({{0.5, 0.5}, {0, 0.5}}), {10, 10}}; }

}  // namespace

TEST_CASE("square matrix construction") {
    const auto a = SquareMatrix::from_rows({{1, 2}, {3, 4}});
    CHECK(a.size() == 2);
    CHECK(a(1, 0) == 3);
    CHECK(a.rows() == std::vector<std::vector<double>>{{1, 2}, {3, 4}});
    CHECK_THROWS_AS(SquareMatrix::from_rows({{1, 2}, {3}}), std::invalid_argument);
    CHECK_THROWS_AS(SquareMatrix(2, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("parameter validation names the field") {
    auto p = example1();
    CHECK_NOTHROW(p.validate());
    p.u[1] = -1;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("u"), std::invalid_argument);
    p = example1();
    p.a(0, 1) = -0.1;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("a"), std::invalid_argument);
    p = example1();
    p.b[0] = 0.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("b"), std::invalid_argument);
    p = example1();
    p.b.pop_back();
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("event data invariants") {
    CHECK_NOTHROW(EventData({{0.5, 1.0}, {1.0}}, 1.0));
    CHECK_THROWS_AS(EventData({{1.0, 1.0}}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(EventData({{0.0}}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(EventData({{2.5}}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(EventData({{0.3, 0.2}}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(EventData({{0.5}}, 0.0), std::invalid_argument);
    const EventData e({{0.5, 1.0}, {}, {0.7}}, 1.0);
    CHECK(e.total_count() == 3);
}

TEST_CASE("window set invariants and lookup") {
    const WindowSet w({{{0, 1}, {2, 3}}, {{0.5, 4}}}, 4.0);
    CHECK(w.total_windows() == 3);
    CHECK(w.find(0, 0.0) == -1);
    CHECK(w.find(0, 1.0) == 0);
    CHECK(w.find(0, 1.5) == -1);
    CHECK(w.find(0, 2.5) == 1);
    CHECK(w.find(1, 4.0) == 0);
    CHECK_THROWS_AS(WindowSet({{{0, 2}, {1, 3}}}, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(WindowSet({{{2, 1}}}, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(WindowSet({{{0, 5}}}, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(WindowSet({{{-1, 1}}}, 4.0), std::invalid_argument);
    CHECK_NOTHROW(WindowSet({{{0, 1}, {1, 2}}}, 4.0));
    CHECK(WindowSet::full(2, 3.0).windows(1) == IntervalList{{0, 3}});
}

TEST_CASE("spectral radius") {
    CHECK(spectral_radius(SquareMatrix::from_rows({{0.5, 0.5}, {0, 0.5}})) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(spectral_radius(SquareMatrix(2, 0.0)) == 0.0);
    CHECK(spectral_radius(SquareMatrix::from_rows({{0.9, 0.75}, {0, 0.9}})) == doctest::Approx(0.9).epsilon(1e-9));
    // periodic permutation: plain power iteration would oscillate
    CHECK(spectral_radius(SquareMatrix::from_rows({{0, 1}, {1, 0}})) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(spectral_radius(SquareMatrix::from_rows({{0, -2}, {2, 0}})) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(spectral_radius(SquareMatrix::from_rows({{1, 2}, {3, 4}})) ==
          doctest::Approx((5 + std::sqrt(33.0)) / 2).epsilon(1e-9));
    CHECK_THROWS_AS(spectral_radius(std::vector<std::vector<double>>{{1, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(spectral_radius(SquareMatrix::from_rows({{std::nan(""), 0}, {0, 1}})), std::invalid_argument);
    CHECK(is_stationary(example1()));
    CHECK_FALSE(is_stationary(univariate(1, 1.0, 1)));
}

TEST_CASE("full intensity") {
    const auto p = univariate(1, 0.5, 2);
    const EventData one({{1.0}}, 5.0);
    CHECK(cif_full(p, one, 0, 2.0) == doctest::Approx(1 + 0.5 * 2 * std::exp(-2.0)).epsilon(1e-14));
    CHECK(cif_full(p, one, 0, 2.0) == doctest::Approx(1.135335).epsilon(1e-6));
    CHECK(cif_full(p, one, 0, 1.0) == 1.0);
    CHECK(cif_full(p, EventData({{}}, 5.0), 0, 3.0) == 1.0);
    CHECK_THROWS_AS(cif_full(p, one, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(cif_full(p, one, 0, 5.5), std::invalid_argument);

    // jump of entity 0 across an entity-1 event is a_{0,1} b_0
    ModelParams fig{{1, 2}, SquareMatrix::from_rows({{0.9, 0.75}, {0, 0.9}}), {10, 10}};
    const EventData e({{}, {1.0}}, 2.0);
    const double right = cif_full(fig, e, 0, std::nextafter(1.0, 2.0));
    CHECK(right - cif_full(fig, e, 0, 1.0) == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("gapped intensity") {
    const auto p = univariate(2, 0.5, 3);
    const WindowSet w({{{1, 3}, {4, 6}}}, 6.0);
    BoundaryIntensities bounds{{{2.0, 5.0}}};
    const EventData none({{}}, 6.0);
    CHECK(cif_gapped(p, none, w, bounds, 0, 2.0) == 2.0);
    CHECK(cif_gapped(p, none, w, bounds, 0, std::nextafter(4.0, 5.0)) == doctest::Approx(5.0));
    CHECK(cif_gapped(p, none, w, bounds, 0, 5.0) == doctest::Approx(2 + 3 * std::exp(-3.0)));
    CHECK_THROWS_AS(cif_gapped(p, none, w, bounds, 0, 3.5), std::invalid_argument);
    CHECK_THROWS_AS(cif_gapped(p, none, w, bounds, 0, 1.0), std::invalid_argument);

    const EventData ev({{4.5}}, 6.0);
    CHECK(cif_gapped(p, ev, w, bounds, 0, 5.0) ==
          doctest::Approx(2 + 3 * std::exp(-3.0) + 0.5 * 3 * std::exp(-1.5)));
    // the event itself is not part of its own strict past
    CHECK(cif_gapped(p, ev, w, bounds, 0, 4.5) == doctest::Approx(2 + 3 * std::exp(-1.5)));
}

TEST_CASE("gapped intensity equals full intensity on one full window") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto inst = hg_test::random_instance(seed);
        const auto full = WindowSet::full(2, inst.observed.horizon());
        const auto bounds = BoundaryIntensities::at_background(inst.params, full);
        RandomStream rng(seed + 100);
        for (int q = 0; q < 20; ++q) {
            const double t = rng.uniform(0.0, inst.observed.horizon());
            for (std::size_t m = 0; m < 2; ++m)
                CHECK(cif_gapped(inst.params, inst.observed, full, bounds, m, t) ==
                      doctest::Approx(cif_full(inst.params, inst.observed, m, t)).epsilon(1e-13));
        }
    }
}

TEST_CASE("exponential relaxation between events") {
    const auto p = univariate(1, 0.5, 2);
    const EventData e({{1.0, 4.0}}, 5.0);
    const double s = 1.5, t = 3.0;
    CHECK(cif_full(p, e, 0, t) - 1 == doctest::Approx((cif_full(p, e, 0, s) - 1) * std::exp(-2 * (t - s))));
}

TEST_CASE("closed-form window integral") {
    const auto p = univariate(2, 0.5, 3);
    const WindowSet w({{{1, 3}}}, 6.0);
    const EventData none({{}}, 6.0);
    BoundaryIntensities at_u{{{2.0}}};
    CHECK(integrated_cif_window(p, none, w, at_u, 0, 0) == doctest::Approx(4.0));

    BoundaryIntensities lifted{{{5.0}}};
    const EventData one({{2.0}}, 6.0);
    const double expected = 2 * 2 + (3.0 / 3) * (1 - std::exp(-6.0)) + 0.5 * (1 - std::exp(-3.0));
    CHECK(integrated_cif_window(p, one, w, lifted, 0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(integrated_cif_window(p, one, w, lifted, 0, 1), std::invalid_argument);
}
