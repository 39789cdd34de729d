#include "hawkes_gaps/estimator.hpp"
#include "hawkes_gaps/experiment.hpp"
#include "hawkes_gaps/gaps.hpp"
#include "hawkes_gaps/io.hpp"
#include "hawkes_gaps/simulator.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace hawkes_gaps;

namespace {

py::dict fit_to_dict(const FitResult& r, const std::string& method, double mu) {
    py::dict out;
    out["method"] = method;
    out["mu"] = mu;
    out["params"] = r.params;
    out["lambda_bar"] = r.bounds.values;
    out["objective_trace"] = r.objective_trace;
    out["iterations"] = r.iterations;
    out["converged"] = r.converged;
    out["ascent_steps"] = r.ascent_steps;
    out["stalled_b_steps"] = r.stalled_b_steps;
    return out;
}

py::dict run_fit(const EventData& events, const std::optional<WindowSet>& windows, const std::string& method,
                 double C, std::optional<double> mu, double tol, std::size_t max_iter) {
    const auto spec = MethodSpec::parse(method, C);
    if (spec.kind != MethodSpec::Kind::mhp && !windows)
        throw std::invalid_argument("method " + method + " needs observation windows");
    const auto observed = windows ? restrict_events(events, *windows) : events;
    FitConfig config;
    config.mu = mu ? *mu : default_mu(observed);
    config.tol = tol;
    config.max_iter = max_iter;
    FitResult result;
    {
        py::gil_scoped_release release;
        switch (spec.kind) {
        case MethodSpec::Kind::mhp:
            result = fit_mhp(observed, config);
            break;
        case MethodSpec::Kind::mhpg_fixed:
            config.boundary = BoundaryMode::fixed_at_u();
            result = fit(observed, *windows, config);
            break;
        case MethodSpec::Kind::mhpg_box:
            config.boundary = BoundaryMode::box(C);
            result = fit(observed, *windows, config);
            break;
        }
    }
    return fit_to_dict(result, spec.name(), config.mu);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multivariate Hawkes processes observed through gaps";

    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IntensityError>(m, "IntensityError", PyExc_ArithmeticError);

    py::class_<ModelParams>(m, "Params")
        .def(py::init([](std::vector<double> u, std::vector<std::vector<double>> a, std::vector<double> b) {
                 ModelParams p{std::move(u), SquareMatrix::from_rows(a), std::move(b)};
                 p.validate();
                 return p;
             }),
             py::arg("u"), py::arg("a"), py::arg("b"))
        .def_property_readonly("u", [](const ModelParams& p) { return p.u; })
        .def_property_readonly("a", [](const ModelParams& p) { return p.a.rows(); })
        .def_property_readonly("b", [](const ModelParams& p) { return p.b; })
        .def_property_readonly("dimension", &ModelParams::dimension)
        .def("spectral_radius", [](const ModelParams& p) { return spectral_radius(p.a); })
        .def("to_json", [](const ModelParams& p) { return io::params_to_json(p); })
        .def_static("from_json", &io::params_from_json, py::arg("text"))
        .def("__eq__", [](const ModelParams& x, const ModelParams& y) { return x == y; })
        .def("__repr__", [](const ModelParams& p) { return "Params(" + io::params_to_json(p) + ")"; });

    py::class_<EventData>(m, "Events")
        .def(py::init<std::vector<std::vector<double>>, double>(), py::arg("times"), py::arg("horizon"))
        .def("times", [](const EventData& e, std::size_t m) { auto t = e.times(m); return std::vector<double>(t.begin(), t.end()); },
             py::arg("entity"))
        .def_property_readonly("horizon", &EventData::horizon)
        .def_property_readonly("dimension", &EventData::dimension)
        .def_property_readonly("total_count", &EventData::total_count)
        .def("__eq__", [](const EventData& x, const EventData& y) { return x == y; });

    py::class_<WindowSet>(m, "Windows")
        .def(py::init([](const std::vector<std::vector<std::pair<double, double>>>& lists, double horizon) {
                 std::vector<IntervalList> w;
                 for (const auto& list : lists) {
                     IntervalList l;
                     for (const auto& [c, d] : list)
                         l.push_back({c, d});
                     w.push_back(std::move(l));
                 }
                 return WindowSet(std::move(w), horizon);
             }),
             py::arg("windows"), py::arg("horizon"))
        .def_static("full", &WindowSet::full, py::arg("n"), py::arg("horizon"))
        .def("windows",
             [](const WindowSet& w, std::size_t m) {
                 std::vector<std::pair<double, double>> out;
                 for (const auto& iv : w.windows(m))
                     out.emplace_back(iv.c, iv.d);
                 return out;
             },
             py::arg("entity"))
        .def_property_readonly("horizon", &WindowSet::horizon)
        .def_property_readonly("dimension", &WindowSet::dimension)
        .def("observed_fraction", [](const WindowSet& w) { return observed_fraction(w); })
        .def("__eq__", [](const WindowSet& x, const WindowSet& y) { return x == y; });

    m.def(
        "simulate",
        [](const ModelParams& params, double horizon, std::uint64_t seed) {
            py::gil_scoped_release release;
            return simulate(SimConfig{params, horizon, seed});
        },
        py::arg("params"), py::arg("horizon"), py::arg("seed") = 0, "Draw events on (0, horizon] with lambda(0) = u.");

    m.def(
        "generate_windows",
        [](std::size_t n, double horizon, double p, double tau1, double tau2, std::uint64_t seed, bool per_entity,
           bool intersect) {
            if (intersect && !per_entity)
                throw std::invalid_argument("intersect requires per_entity");
            const GapConfig config{p, tau1, tau2, horizon, seed};
            auto w = per_entity ? generate_entity_windows(config, n) : generate_shared_windows(config, n);
            return intersect ? common_windows(w) : w;
        },
        py::arg("n"), py::arg("horizon"), py::arg("p") = 0.3, py::arg("tau1") = 0.5, py::arg("tau2") = 3.0,
        py::arg("seed") = 0, py::arg("per_entity") = false, py::arg("intersect") = false,
        "Alternating observation windows and gaps; realized fraction 2p / (1 + 2p).");

    m.def("restrict_events", &restrict_events, py::arg("events"), py::arg("windows"));
    m.def("cif_full", &cif_full, py::arg("params"), py::arg("events"), py::arg("entity"), py::arg("t"));

    m.def("fit", &run_fit, py::arg("events"), py::arg("windows") = py::none(), py::arg("method") = "mhpg-box",
          py::arg("C") = 20.0, py::arg("mu") = py::none(), py::arg("tol") = 1e-6, py::arg("max_iter") = 500,
          "Estimate parameters; events outside the windows are dropped first.");

    m.def(
        "count_histogram",
        [](const ModelParams& params, std::size_t n_reps, double interval, std::uint64_t seed, unsigned jobs) {
            py::gil_scoped_release release;
            return count_histogram(SimConfig{params, interval, seed, nullptr}, n_reps, interval, jobs);
        },
        py::arg("params"), py::arg("n_reps") = 500, py::arg("interval") = 20.0, py::arg("seed") = 0,
        py::arg("jobs") = 1);

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& out_dir, unsigned jobs) {
            const auto config = experiment_config_from_json(config_json);
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_experiment(config, jobs);
                write_experiment(result, out_dir);
            }
            py::dict out;
            out["attempts"] = result.attempts;
            out["failures"] = result.failures;
            out["config_hash"] = config_hash(config);
            return out;
        },
        py::arg("config_json"), py::arg("out_dir"), py::arg("jobs") = 1);
}
