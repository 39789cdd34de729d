#pragma once

#include "hawkes_gaps/estimator.hpp"
#include "hawkes_gaps/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hawkes_gaps::io {

// Malformed input; the message names the offending field or line.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 17 significant digits, locale independent.
[[nodiscard]] std::string format_double(double x);

// 64-bit FNV-1a as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view text);

// "# hawkes-gaps <what> config_hash=<hash> seed=<seed>"
[[nodiscard]] std::string provenance_line(std::string_view what, std::string_view hash, std::uint64_t seed);

// {"u": [...], "a": [[...], ...], "b": [...]}; "a" may also be a flat
// row-major array of N*N numbers.
[[nodiscard]] ModelParams params_from_json(const std::string& text);
[[nodiscard]] std::string params_to_json(const ModelParams& params);
[[nodiscard]] ModelParams read_params(const std::filesystem::path& path);
void write_params(const std::filesystem::path& path, const ModelParams& params);

// CSV "entity,time" preceded by "# horizon=T" and "# entities=N" comments.
// A horizon/entity count passed explicitly overrides missing comments. A
// nonempty provenance line is written first.
void write_events(std::ostream& out, const EventData& events, const std::string& provenance = {});
[[nodiscard]] EventData read_events(std::istream& in, std::optional<double> horizon = std::nullopt,
                                    std::optional<std::size_t> entities = std::nullopt);
void write_events(const std::filesystem::path& path, const EventData& events, const std::string& provenance = {});
[[nodiscard]] EventData read_events(const std::filesystem::path& path, std::optional<double> horizon = std::nullopt,
                                    std::optional<std::size_t> entities = std::nullopt);

// CSV "entity,c,d" with the same comment header.
void write_windows(std::ostream& out, const WindowSet& windows, const std::string& provenance = {});
[[nodiscard]] WindowSet read_windows(std::istream& in, std::optional<double> horizon = std::nullopt,
                                     std::optional<std::size_t> entities = std::nullopt);
void write_windows(const std::filesystem::path& path, const WindowSet& windows,
                   const std::string& provenance = {});
[[nodiscard]] WindowSet read_windows(const std::filesystem::path& path, std::optional<double> horizon = std::nullopt,
                                     std::optional<std::size_t> entities = std::nullopt);

struct FitReport {
    std::string method;
    double mu = 0.0;
    double C = 0.0;  // 0 unless the box constraint was used
    FitResult result;
    const WindowSet* windows = nullptr;  // for window endpoints in lambda_bar entries
    std::vector<std::size_t> events_in;
    std::vector<std::size_t> events_kept;
};

[[nodiscard]] std::string fit_report_to_json(const FitReport& report);

}  // namespace hawkes_gaps::io
