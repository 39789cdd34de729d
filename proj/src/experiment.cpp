#include "hawkes_gaps/experiment.hpp"

#include "hawkes_gaps/gaps.hpp"
#include "hawkes_gaps/io.hpp"
#include "hawkes_gaps/parallel.hpp"
#include "hawkes_gaps/random.hpp"
#include "hawkes_gaps/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hawkes_gaps {

using nlohmann::json;
using io::format_double;

std::string MethodSpec::name() const {
    switch (kind) {
    case Kind::mhp:
        return "mhp";
    case Kind::mhpg_fixed:
        return "mhpg-fixed";
    case Kind::mhpg_box:
        return "mhpg-box";
    }
    return "unknown";
}

MethodSpec MethodSpec::parse(const std::string& name, double C) {
    if (name == "mhp")
        return {Kind::mhp, 1.0};
    if (name == "mhpg-fixed")
        return {Kind::mhpg_fixed, 1.0};
    if (name == "mhpg-box") {
        if (!(C >= 1.0))
            throw std::invalid_argument("methods: C must be >= 1 for mhpg-box");
        return {Kind::mhpg_box, C};
    }
    throw std::invalid_argument("methods: unknown method '" + name + "' (expected mhp, mhpg-fixed or mhpg-box)");
}

void ExperimentConfig::validate() const {
    truth.validate();
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("T: must be positive and finite");
    GapConfig{p, tau1, tau2, horizon, seed}.validate();
    if (intersect && !per_entity)
        throw std::invalid_argument("gaps.intersect: requires gaps.per_entity");
    if (methods.empty())
        throw std::invalid_argument("methods: at least one method required");
    const auto labels = method_labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (labels[i] == labels[j])
                throw std::invalid_argument("methods: duplicate method '" + labels[i] + "'");
    if (mu && !(*mu >= 0.0))
        throw std::invalid_argument("mu: must be nonnegative");
    if (!(tol > 0.0))
        throw std::invalid_argument("tol: must be positive");
    if (max_iter == 0)
        throw std::invalid_argument("max_iter: must be positive");
    if (n_param_reps == 0)
        throw std::invalid_argument("n_param_reps: must be positive");
    if (!(hist_interval > 0.0) || !std::isfinite(hist_interval))
        throw std::invalid_argument("hist_interval: must be positive and finite");
}

std::vector<std::string> ExperimentConfig::method_labels() const {
    std::vector<std::string> labels;
    for (const auto& m : methods) {
        const auto shared = std::count_if(methods.begin(), methods.end(),
                                          [&](const MethodSpec& o) { return o.kind == m.kind; });
        if (m.kind == MethodSpec::Kind::mhpg_box && shared > 1)
            labels.push_back(m.name() + "(C=" + format_double(m.C) + ")");
        else
            labels.push_back(m.name());
    }
    return labels;
}

namespace {

json config_json(const ExperimentConfig& c) {
    json methods = json::array();
    for (const auto& m : c.methods) {
        if (m.kind == MethodSpec::Kind::mhpg_box)
            methods.push_back({{"name", m.name()}, {"C", m.C}});
        else
            methods.push_back(m.name());
    }
    json doc{{"name", c.name},
             {"truth", json::parse(io::params_to_json(c.truth))},
             {"T", c.horizon},
             {"gaps", {{"p", c.p}, {"tau1", c.tau1}, {"tau2", c.tau2}, {"per_entity", c.per_entity},
                       {"intersect", c.intersect}}},
             {"methods", methods},
             {"tol", c.tol},
             {"max_iter", c.max_iter},
             {"n_param_reps", c.n_param_reps},
             {"n_hist_reps", c.n_hist_reps},
             {"hist_interval", c.hist_interval},
             {"seed", c.seed}};
    if (c.mu)
        doc["mu"] = *c.mu;
    return doc;
}

template <typename T>
T get_or(const json& node, const char* key, T fallback) {
    if (!node.contains(key))
        return fallback;
    try {
        return node.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string(key) + ": wrong type");
    }
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw std::invalid_argument("config: expected a JSON object");
    if (!doc.contains("truth"))
        throw std::invalid_argument("truth: missing field");
    ExperimentConfig c;
    c.name = get_or<std::string>(doc, "name", c.name);
    c.truth = io::params_from_json(doc["truth"].dump());
    c.horizon = get_or(doc, "T", c.horizon);
    if (doc.contains("gaps")) {
        const auto& g = doc["gaps"];
        c.p = get_or(g, "p", c.p);
        c.tau1 = get_or(g, "tau1", c.tau1);
        c.tau2 = get_or(g, "tau2", c.tau2);
        c.per_entity = get_or(g, "per_entity", c.per_entity);
        c.intersect = get_or(g, "intersect", c.intersect);
    }
    if (doc.contains("methods")) {
        c.methods.clear();
        for (const auto& m : doc["methods"]) {
            if (m.is_string())
                c.methods.push_back(MethodSpec::parse(m.get<std::string>()));
            else if (m.is_object() && m.contains("name"))
                c.methods.push_back(MethodSpec::parse(m["name"].get<std::string>(), get_or(m, "C", 20.0)));
            else
                throw std::invalid_argument("methods: entries must be names or {\"name\", \"C\"} objects");
        }
    }
    if (doc.contains("mu") && !doc["mu"].is_null())
        c.mu = get_or(doc, "mu", 0.0);
    c.tol = get_or(doc, "tol", c.tol);
    c.max_iter = get_or(doc, "max_iter", c.max_iter);
    c.n_param_reps = get_or(doc, "n_param_reps", c.n_param_reps);
    c.n_hist_reps = get_or(doc, "n_hist_reps", c.n_hist_reps);
    c.hist_interval = get_or(doc, "hist_interval", c.hist_interval);
    c.seed = get_or(doc, "seed", c.seed);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return experiment_config_from_json(buf.str());
}

std::string config_hash(const ExperimentConfig& config) { return io::fnv1a_hex(config_json(config).dump()); }

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw std::invalid_argument("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BoxStats box_stats(const std::vector<double>& values, std::size_t converged) {
    BoxStats s;
    s.n = values.size();
    s.converged = converged;
    if (values.empty())
        return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.q1 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q3 = quantile(values, 0.75);
    return s;
}

std::vector<std::string> parameter_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t m = 0; m < n; ++m)
        names.push_back("u[" + std::to_string(m) + "]");
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k)
            names.push_back("a[" + std::to_string(m) + "][" + std::to_string(k) + "]");
    for (std::size_t m = 0; m < n; ++m)
        names.push_back("b[" + std::to_string(m) + "]");
    return names;
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> out(params.u);
    out.insert(out.end(), params.a.values().begin(), params.a.values().end());
    out.insert(out.end(), params.b.begin(), params.b.end());
    return out;
}

namespace {

ModelParams unflatten(const std::vector<double>& flat, std::size_t n) {
    ModelParams p;
    p.u.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n));
    p.a = SquareMatrix(n, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(n),
                                              flat.begin() + static_cast<std::ptrdiff_t>(n + n * n)));
    p.b.assign(flat.begin() + static_cast<std::ptrdiff_t>(n + n * n), flat.end());
    return p;
}

std::vector<double> lengths(const WindowSet& windows) {
    std::vector<double> out;
    for (const auto& list : windows.all())
        for (const auto& w : list)
            out.push_back(w.length());
    return out;
}

Replication run_replication(const ExperimentConfig& config, std::size_t r) {
    Replication rep;
    const std::size_t n = config.truth.dimension();
    const std::uint64_t rep_seed = derive_seed(config.seed, StreamTag::replication, {r});
    EventData events;
    WindowSet windows;
    try {
        events = simulate(SimConfig{config.truth, config.horizon, rep_seed, nullptr});
        const GapConfig gaps{config.p, config.tau1, config.tau2, config.horizon, rep_seed};
        if (config.per_entity) {
            windows = generate_entity_windows(gaps, n);
            if (config.intersect) {
                rep.prior_lengths = lengths(windows);
                windows = common_windows(windows);
            }
        } else {
            windows = generate_shared_windows(gaps, n);
        }
    } catch (const std::exception& e) {
        rep.error = e.what();
        rep.fits.resize(config.methods.size());
        for (auto& f : rep.fits)
            f.error = rep.error;
        return rep;
    }
    rep.window_lengths = lengths(windows);
    const auto observed = restrict_events(events, windows);
    for (std::size_t m = 0; m < n; ++m) {
        rep.events_total.push_back(events.times(m).size());
        rep.events_observed.push_back(observed.times(m).size());
    }
    const auto fractions = observed_fraction(windows);
    for (double f : fractions)
        rep.observed_fraction += f / static_cast<double>(fractions.size());
    rep.mu = config.mu ? *config.mu : default_mu(observed);

    for (const auto& method : config.methods) {
        ReplicationFit out;
        FitConfig fc;
        fc.mu = rep.mu;
        fc.tol = config.tol;
        fc.max_iter = config.max_iter;
        try {
            switch (method.kind) {
            case MethodSpec::Kind::mhp:
                out.result = fit_mhp(observed, fc);
                break;
            case MethodSpec::Kind::mhpg_fixed:
                fc.boundary = BoundaryMode::fixed_at_u();
                out.result = fit(observed, windows, fc);
                break;
            case MethodSpec::Kind::mhpg_box:
                fc.boundary = BoundaryMode::box(method.C);
                out.result = fit(observed, windows, fc);
                break;
            }
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        rep.fits.push_back(std::move(out));
    }
    return rep;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned jobs) {
    config.validate();
    ExperimentResult result;
    result.config = config;
    const auto labels = config.method_labels();
    const std::size_t n = config.truth.dimension();
    const std::size_t n_methods = config.methods.size();
    if (spectral_radius(config.truth.a) >= 1.0 - 1e-9)
        default_warning_sink("experiment: spectral radius of the true a is at or above 1");

    result.replications.resize(config.n_param_reps);
    parallel_for(config.n_param_reps, jobs,
                 [&](std::size_t r) { result.replications[r] = run_replication(config, r); });

    result.medians.resize(n_methods);
    for (std::size_t j = 0; j < n_methods; ++j) {
        std::vector<std::vector<double>> samples(flatten(config.truth).size());
        for (const auto& rep : result.replications) {
            ++result.attempts;
            if (!rep.fits[j].ok) {
                ++result.failures;
                continue;
            }
            const auto flat = flatten(rep.fits[j].result.params);
            for (std::size_t q = 0; q < flat.size(); ++q)
                samples[q].push_back(flat[q]);
        }
        if (samples.front().empty())
            continue;
        std::vector<double> med;
        for (const auto& s : samples)
            med.push_back(quantile(s, 0.5));
        result.medians[j] = unflatten(med, n);
    }

    if (config.n_hist_reps > 0) {
        std::vector<ModelParams> sources{config.truth};
        result.hist_sources.push_back("truth");
        for (std::size_t j = 0; j < n_methods; ++j) {
            if (!result.medians[j])
                continue;
            sources.push_back(*result.medians[j]);
            result.hist_sources.push_back(labels[j]);
        }
        for (std::size_t s = 0; s < sources.size(); ++s) {
            SimConfig sim{sources[s], config.hist_interval, derive_seed(config.seed, StreamTag::histogram, {s}),
                          default_warning_sink};
            result.hist_counts.push_back(count_histogram(sim, config.n_hist_reps, config.hist_interval, jobs));
        }
    }
    return result;
}

namespace {

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::string& provenance, const char* header)
        : out_(path, std::ios::binary) {
        if (!out_)
            throw std::runtime_error("cannot write " + path.string());
        out_ << provenance << '\n' << header << '\n';
    }
    std::ofstream& operator*() { return out_; }

private:
    std::ofstream out_;
};

std::string csv_text(const std::string& s) {
    std::string out;
    for (char ch : s)
        out += (ch == ',' || ch == '\n' || ch == '\r') ? ' ' : ch;
    return out;
}

}  // namespace

void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir) {
    const auto& config = result.config;
    const auto labels = config.method_labels();
    std::filesystem::create_directories(out_dir);
    const std::string provenance =
        io::provenance_line("experiment=" + csv_text(config.name), config_hash(config), config.seed);
    const std::size_t n = config.truth.dimension();
    const auto names = parameter_names(n);
    const auto truth = flatten(config.truth);

    {
        std::ofstream out(out_dir / "config.json", std::ios::binary);
        out << config_json(config).dump(2) << '\n';
    }
    {
        CsvFile f(out_dir / "replications.csv", provenance,
                  "replication,entity,events_total,events_observed,events_dropped,observed_fraction,mu");
        for (std::size_t r = 0; r < result.replications.size(); ++r) {
            const auto& rep = result.replications[r];
            for (std::size_t m = 0; m < rep.events_total.size(); ++m)
                *f << r << ',' << m << ',' << rep.events_total[m] << ',' << rep.events_observed[m] << ','
                   << rep.events_total[m] - rep.events_observed[m] << ',' << format_double(rep.observed_fraction)
                   << ',' << format_double(rep.mu) << '\n';
        }
    }
    {
        CsvFile f(out_dir / "estimates.csv", provenance,
                  "replication,method,parameter,value,converged,iterations");
        for (std::size_t r = 0; r < result.replications.size(); ++r) {
            for (std::size_t j = 0; j < config.methods.size(); ++j) {
                const auto& fit = result.replications[r].fits[j];
                if (!fit.ok)
                    continue;
                const auto flat = flatten(fit.result.params);
                for (std::size_t q = 0; q < flat.size(); ++q)
                    *f << r << ',' << labels[j] << ',' << names[q] << ',' << format_double(flat[q])
                       << ',' << (fit.result.converged ? 1 : 0) << ',' << fit.result.iterations << '\n';
            }
        }
    }
    {
        CsvFile f(out_dir / "failures.csv", provenance, "replication,method,error");
        for (std::size_t r = 0; r < result.replications.size(); ++r)
            for (std::size_t j = 0; j < config.methods.size(); ++j)
                if (!result.replications[r].fits[j].ok)
                    *f << r << ',' << labels[j] << ','
                       << csv_text(result.replications[r].fits[j].error) << '\n';
    }
    {
        CsvFile box(out_dir / "boxplot.csv", provenance,
                    "method,parameter,truth,n,converged,min,q1,median,q3,max");
        CsvFile med(out_dir / "medians.csv", provenance, "method,parameter,truth,median");
        for (std::size_t j = 0; j < config.methods.size(); ++j) {
            std::vector<std::vector<double>> samples(truth.size());
            std::size_t converged = 0;
            for (const auto& rep : result.replications) {
                if (!rep.fits[j].ok)
                    continue;
                converged += rep.fits[j].result.converged ? 1 : 0;
                const auto flat = flatten(rep.fits[j].result.params);
                for (std::size_t q = 0; q < flat.size(); ++q)
                    samples[q].push_back(flat[q]);
            }
            for (std::size_t q = 0; q < truth.size(); ++q) {
                const auto s = box_stats(samples[q], converged);
                if (s.n == 0)
                    continue;
                *box << labels[j] << ',' << names[q] << ',' << format_double(truth[q]) << ',' << s.n
                     << ',' << s.converged << ',' << format_double(s.min) << ',' << format_double(s.q1) << ','
                     << format_double(s.median) << ',' << format_double(s.q3) << ',' << format_double(s.max)
                     << '\n';
                *med << labels[j] << ',' << names[q] << ',' << format_double(truth[q]) << ','
                     << format_double(s.median) << '\n';
            }
        }
    }
    if (!result.hist_counts.empty()) {
        CsvFile hist(out_dir / "histogram.csv", provenance, "source,entity,count,frequency");
        CsvFile summary(out_dir / "histogram_summary.csv", provenance, "source,entity,reps,mean,variance");
        for (std::size_t s = 0; s < result.hist_counts.size(); ++s) {
            for (std::size_t m = 0; m < result.hist_counts[s].size(); ++m) {
                const auto& counts = result.hist_counts[s][m];
                std::map<std::size_t, std::size_t> freq;
                double mean = 0.0;
                for (auto c : counts) {
                    ++freq[c];
                    mean += static_cast<double>(c);
                }
                mean /= static_cast<double>(counts.size());
                double var = 0.0;
                for (auto c : counts)
                    var += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
                var /= counts.size() > 1 ? static_cast<double>(counts.size() - 1) : 1.0;
                for (const auto& [count, k] : freq)
                    *hist << result.hist_sources[s] << ',' << m << ',' << count << ',' << k << '\n';
                *summary << result.hist_sources[s] << ',' << m << ',' << counts.size() << ',' << format_double(mean)
                         << ',' << format_double(var) << '\n';
            }
        }
    }
    if (config.intersect) {
        CsvFile f(out_dir / "window_lengths.csv", provenance, "stage,bin_lo,bin_hi,count");
        constexpr std::size_t kBins = 30;
        const double width = config.tau2 / kBins;
        auto emit = [&](const char* stage, auto member) {
            std::vector<std::size_t> bins(kBins, 0);
            for (const auto& rep : result.replications)
                for (double len : rep.*member)
                    ++bins[std::min(kBins - 1, static_cast<std::size_t>(len / width))];
            for (std::size_t i = 0; i < kBins; ++i)
                *f << stage << ',' << format_double(i * width) << ',' << format_double((i + 1) * width) << ','
                   << bins[i] << '\n';
        };
        emit("prior", &Replication::prior_lengths);
        emit("posterior", &Replication::window_lengths);
    }
}

}  // namespace hawkes_gaps
