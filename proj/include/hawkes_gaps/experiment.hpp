#pragma once

#include "hawkes_gaps/estimator.hpp"
#include "hawkes_gaps/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hawkes_gaps {

struct MethodSpec {
    enum class Kind { mhp, mhpg_fixed, mhpg_box };
    Kind kind = Kind::mhpg_box;
    double C = 20.0;

    // "mhp", "mhpg-fixed", "mhpg-box"
    [[nodiscard]] std::string name() const;
    [[nodiscard]] static MethodSpec parse(const std::string& name, double C = 20.0);
};

struct ExperimentConfig {
    std::string name = "experiment";
    ModelParams truth;
    double horizon = 1000.0;
    double p = 0.3;
    double tau1 = 0.5;
    double tau2 = 3.0;
    bool per_entity = false;  // independent windows per entity instead of one shared draw
    bool intersect = false;   // per-entity windows replaced by their common intersection
    std::vector<MethodSpec> methods{{MethodSpec::Kind::mhp}, {MethodSpec::Kind::mhpg_fixed},
                                    {MethodSpec::Kind::mhpg_box, 20.0}};
    std::optional<double> mu;  // default_mu of each replication's observed data when absent
    double tol = 1e-6;
    std::size_t max_iter = 500;
    std::size_t n_param_reps = 100;
    std::size_t n_hist_reps = 500;
    double hist_interval = 20.0;
    std::uint64_t seed = 0;

    void validate() const;
    // Method names, with the bound appended ("mhpg-box(C=20)") when several box methods share a name.
    [[nodiscard]] std::vector<std::string> method_labels() const;
};

// JSON keys mirror the field names; gaps are nested under "gaps" and methods
// are given as ["mhp", "mhpg-fixed", {"name": "mhpg-box", "C": 20}].
[[nodiscard]] ExperimentConfig experiment_config_from_json(const std::string& text);
[[nodiscard]] ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON of the config, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& config);

struct ReplicationFit {
    bool ok = false;
    std::string error;
    FitResult result;
};

struct Replication {
    std::vector<std::size_t> events_total;
    std::vector<std::size_t> events_observed;
    double observed_fraction = 0.0;  // averaged over entities
    double mu = 0.0;
    std::vector<double> prior_lengths;      // per-entity windows before intersection
    std::vector<double> window_lengths;     // windows used for fitting
    std::vector<ReplicationFit> fits;       // one per method
    std::string error;                      // simulation or window failure
};

struct BoxStats {
    std::size_t n = 0;
    std::size_t converged = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Quantile with linear interpolation between order statistics.
[[nodiscard]] double quantile(std::vector<double> values, double q);
[[nodiscard]] BoxStats box_stats(const std::vector<double>& values, std::size_t converged);

// "u[0]", "a[0][1]", "b[1]" in the order u, a (row-major), b.
[[nodiscard]] std::vector<std::string> parameter_names(std::size_t n);
[[nodiscard]] std::vector<double> flatten(const ModelParams& params);

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<Replication> replications;
    // per method: parameter-wise medians over successful fits
    std::vector<std::optional<ModelParams>> medians;
    // sources: "truth" followed by method names with medians; counts[source][m][r]
    std::vector<std::string> hist_sources;
    std::vector<std::vector<std::vector<std::size_t>>> hist_counts;
    std::size_t failures = 0;
    std::size_t attempts = 0;

    [[nodiscard]] bool too_many_failures() const { return failures * 10 > attempts; }
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config, unsigned jobs = 1);

// Writes estimates.csv, boxplot.csv, medians.csv, histogram.csv,
// histogram_summary.csv, replications.csv, failures.csv and, when windows are
// intersected, window_lengths.csv into out_dir.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir);

}  // namespace hawkes_gaps
