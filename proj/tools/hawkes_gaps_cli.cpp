#include "hawkes_gaps/estimator.hpp"
#include "hawkes_gaps/experiment.hpp"
#include "hawkes_gaps/gaps.hpp"
#include "hawkes_gaps/io.hpp"
#include "hawkes_gaps/simulator.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

namespace hg = hawkes_gaps;

namespace {

constexpr int kUsage = 1;
constexpr int kNumerical = 2;

unsigned default_jobs() {
    if (const char* env = std::getenv("HAWKES_GAPS_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring HAWKES_GAPS_JOBS=" << env << " (expected a positive integer)\n";
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Writes to the named file, or stdout for "" and "-".
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw hg::io::FormatError("cannot write " + path);
    fn(out);
}

struct SimulateOpts {
    std::string params;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int run_simulate(const SimulateOpts& o) {
    const auto params = hg::io::read_params(o.params);
    const auto events = hg::simulate(hg::SimConfig{params, o.horizon, o.seed});
    const auto hash = hg::io::fnv1a_hex(hg::io::params_to_json(params) + "T=" + hg::io::format_double(o.horizon));
    emit(o.out, [&](std::ostream& out) {
        hg::io::write_events(out, events, hg::io::provenance_line("simulate", hash, o.seed));
    });
    return 0;
}

struct WindowsOpts {
    double p = 0.3;
    double tau1 = 0.5;
    double tau2 = 3.0;
    double horizon = 0.0;
    std::size_t entities = 1;
    bool per_entity = false;
    bool intersect = false;
    std::uint64_t seed = 0;
    std::string out;
};

int run_windows(const WindowsOpts& o) {
    if (o.intersect && !o.per_entity)
        throw std::invalid_argument("--intersect requires --per-entity");
    if (o.entities == 0)
        throw std::invalid_argument("--entities must be positive");
    const hg::GapConfig config{o.p, o.tau1, o.tau2, o.horizon, o.seed};
    auto windows = o.per_entity ? hg::generate_entity_windows(config, o.entities)
                                : hg::generate_shared_windows(config, o.entities);
    if (o.intersect)
        windows = hg::common_windows(windows);
    const auto fractions = hg::observed_fraction(windows);
    for (std::size_t m = 0; m < fractions.size(); ++m)
        std::cerr << "entity " << m << ": " << windows.windows(m).size() << " windows, observed fraction "
                  << fractions[m] << '\n';
    const std::string canon = "p=" + hg::io::format_double(o.p) + " tau1=" + hg::io::format_double(o.tau1) +
                              " tau2=" + hg::io::format_double(o.tau2) + " T=" + hg::io::format_double(o.horizon) +
                              " N=" + std::to_string(o.entities) + " per_entity=" + std::to_string(o.per_entity) +
                              " intersect=" + std::to_string(o.intersect);
    emit(o.out, [&](std::ostream& out) {
        hg::io::write_windows(out, windows, hg::io::provenance_line("windows", hg::io::fnv1a_hex(canon), o.seed));
    });
    return 0;
}

struct FitOpts {
    std::string events;
    std::string windows;
    std::string method = "mhpg-box";
    double C = 20.0;
    std::optional<double> mu;
    double tol = 1e-6;
    std::size_t max_iter = 500;
    std::string init;
    std::string out;
};

int run_fit(const FitOpts& o) {
    const auto method = hg::MethodSpec::parse(o.method, o.C);
    if (method.kind != hg::MethodSpec::Kind::mhp && o.windows.empty())
        throw std::invalid_argument("method " + o.method + " needs observation windows: pass --windows FILE");
    const auto events = hg::io::read_events(o.events);
    std::optional<hg::WindowSet> windows;
    if (!o.windows.empty())
        windows = hg::io::read_windows(o.windows, std::nullopt, events.dimension());
    if (windows && windows->horizon() != events.horizon())
        throw std::invalid_argument("events and windows files disagree on the horizon");
    const auto observed = windows ? hg::restrict_events(events, *windows) : events;

    hg::io::FitReport report;
    report.method = method.name();
    for (std::size_t m = 0; m < events.dimension(); ++m) {
        report.events_in.push_back(events.times(m).size());
        report.events_kept.push_back(observed.times(m).size());
        std::cerr << "entity " << m << ": " << report.events_in[m] << " events, " << report.events_kept[m]
                  << " kept, " << report.events_in[m] - report.events_kept[m] << " dropped outside windows\n";
    }
    hg::FitConfig config;
    config.mu = o.mu ? *o.mu : hg::default_mu(observed);
    config.tol = o.tol;
    config.max_iter = o.max_iter;
    if (!o.init.empty())
        config.init = hg::io::read_params(o.init);
    report.mu = config.mu;
    switch (method.kind) {
    case hg::MethodSpec::Kind::mhp:
        report.result = hg::fit_mhp(observed, config);
        break;
    case hg::MethodSpec::Kind::mhpg_fixed:
        config.boundary = hg::BoundaryMode::fixed_at_u();
        report.result = hg::fit(observed, *windows, config);
        report.windows = &*windows;
        break;
    case hg::MethodSpec::Kind::mhpg_box:
        config.boundary = hg::BoundaryMode::box(method.C);
        report.C = method.C;
        report.result = hg::fit(observed, *windows, config);
        report.windows = &*windows;
        break;
    }
    if (!report.result.converged)
        std::cerr << "warning: not converged after " << report.result.iterations << " iterations\n";
    emit(o.out, [&](std::ostream& out) { out << hg::io::fit_report_to_json(report); });
    return 0;
}

struct ExperimentOpts {
    std::string config;
    std::string out = "experiment-out";
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
};

int run_experiment(const ExperimentOpts& o) {
    auto config = hg::load_experiment_config(o.config);
    if (o.seed)
        config.seed = *o.seed;
    const auto result = hg::run_experiment(config, o.jobs);
    hg::write_experiment(result, o.out);
    std::cerr << "fits: " << result.attempts - result.failures << " of " << result.attempts << " succeeded\n";
    if (result.too_many_failures()) {
        std::cerr << "error: more than 10% of fits failed; see failures.csv\n";
        return kNumerical;
    }
    return 0;
}

struct HistogramOpts {
    std::string params;
    double interval = 20.0;
    std::size_t reps = 500;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string out;
};

int run_histogram(const HistogramOpts& o) {
    const auto params = hg::io::read_params(o.params);
    const auto counts = hg::count_histogram(hg::SimConfig{params, o.interval, o.seed}, o.reps, o.interval, o.jobs);
    const auto hash = hg::io::fnv1a_hex(hg::io::params_to_json(params) + "interval=" +
                                        hg::io::format_double(o.interval) + " reps=" + std::to_string(o.reps));
    emit(o.out, [&](std::ostream& out) {
        out << hg::io::provenance_line("histogram", hash, o.seed) << "\nentity,count,frequency\n";
        for (std::size_t m = 0; m < counts.size(); ++m) {
            std::map<std::size_t, std::size_t> freq;
            for (auto c : counts[m])
                ++freq[c];
            for (const auto& [c, k] : freq)
                out << m << ',' << c << ',' << k << '\n';
        }
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate Hawkes processes observed through gaps: simulation, windows, estimation"};
    app.require_subcommand(1);
    const unsigned jobs = default_jobs();

    SimulateOpts sim;
    auto* simulate = app.add_subcommand("simulate", "Draw events from a Hawkes process by thinning");
    simulate->add_option("--params", sim.params, "Parameter JSON (u, a, b)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--horizon,-T", sim.horizon, "Horizon T (time units)")->required();
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--out,-o", sim.out, "Events CSV (default stdout)");

    WindowsOpts win;
    auto* windows = app.add_subcommand("windows", "Generate observation windows");
    windows->add_option("--p", win.p, "Nominal observation fraction in (0, 1)")->capture_default_str();
    windows->add_option("--tau1", win.tau1, "Shortest window (time units)")->capture_default_str();
    windows->add_option("--tau2", win.tau2, "Longest window (time units)")->capture_default_str();
    windows->add_option("--horizon,-T", win.horizon, "Horizon T (time units)")->required();
    windows->add_option("--entities,-N", win.entities, "Number of entities")->capture_default_str();
    windows->add_flag("--per-entity", win.per_entity, "Independent windows for each entity");
    windows->add_flag("--intersect", win.intersect, "Replace per-entity windows by their common intersection");
    windows->add_option("--seed", win.seed, "Master seed");
    windows->add_option("--out,-o", win.out, "Windows CSV (default stdout)");

    FitOpts fo;
    auto* fitcmd = app.add_subcommand("fit", "Estimate parameters from observed events");
    fitcmd->add_option("--events", fo.events, "Events CSV")->required()->check(CLI::ExistingFile);
    fitcmd->add_option("--windows", fo.windows, "Windows CSV (required for mhpg-*)")->check(CLI::ExistingFile);
    fitcmd->add_option("--method", fo.method, "mhp, mhpg-fixed or mhpg-box")
        ->check(CLI::IsMember({"mhp", "mhpg-fixed", "mhpg-box"}))
        ->capture_default_str();
    fitcmd->add_option("--C", fo.C, "Upper bound factor for mhpg-box (boundary <= C u)")->capture_default_str();
    fitcmd->add_option("--mu", fo.mu, "LASSO weight on a (default 0.001 * events / N^2)");
    fitcmd->add_option("--tol", fo.tol, "Relative parameter change for convergence")->capture_default_str();
    fitcmd->add_option("--max-iter", fo.max_iter, "Iteration limit")->capture_default_str();
    fitcmd->add_option("--init", fo.init, "Initial parameter JSON")->check(CLI::ExistingFile);
    fitcmd->add_option("--out,-o", fo.out, "Result JSON (default stdout)");

    ExperimentOpts eo;
    eo.jobs = jobs;
    auto* experiment = app.add_subcommand("experiment", "Replicated simulate/gap/fit study");
    experiment->add_option("--config", eo.config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    experiment->add_option("--out,-o", eo.out, "Output directory")->capture_default_str();
    experiment->add_option("--seed", eo.seed, "Override the config's master seed");
    experiment->add_option("--jobs,-j", eo.jobs, "Worker threads (default $HAWKES_GAPS_JOBS or all cores)");

    HistogramOpts ho;
    ho.jobs = jobs;
    auto* histogram = app.add_subcommand("histogram", "Event-count histogram over (0, interval]");
    histogram->add_option("--params", ho.params, "Parameter JSON")->required()->check(CLI::ExistingFile);
    histogram->add_option("--interval", ho.interval, "Interval end (time units)")->capture_default_str();
    histogram->add_option("--reps", ho.reps, "Replications")->capture_default_str();
    histogram->add_option("--seed", ho.seed, "Master seed");
    histogram->add_option("--jobs,-j", ho.jobs, "Worker threads (default $HAWKES_GAPS_JOBS or all cores)");
    histogram->add_option("--out,-o", ho.out, "Histogram CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (*simulate)
            return run_simulate(sim);
        if (*windows)
            return run_windows(win);
        if (*fitcmd)
            return run_fit(fo);
        if (*experiment)
            return run_experiment(eo);
        if (*histogram)
            return run_histogram(ho);
    } catch (const hg::IntensityError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n  entity " << e.entity << ", window " << e.window
                  << ", event " << e.event << ", intensity " << e.value << '\n';
        return kNumerical;
    } catch (const hg::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
