#include "hawkes_gaps/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hawkes_gaps::io {

using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<double> number_array(const json& node, const char* field) {
    if (!node.is_array())
        throw FormatError(std::string(field) + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(node.size());
    for (const auto& x : node) {
        if (!x.is_number())
            throw FormatError(std::string(field) + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

double parse_number(std::string_view text, const std::string& where) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    while (first < last && (*first == ' ' || *first == '\t'))
        ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r'))
        --last;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw FormatError(where + ": cannot parse number '" + std::string(text) + "'");
    return value;
}

std::size_t parse_index(std::string_view text, const std::string& where) {
    const double v = parse_number(text, where);
    if (v < 0.0 || v != std::floor(v))
        throw FormatError(where + ": entity must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

struct CsvTable {
    std::optional<double> horizon;
    std::optional<std::size_t> entities;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(std::istream& in, std::size_t columns, const std::string& header) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line.front() == '#') {
            std::istringstream tokens(line.substr(1));
            std::string tok;
            while (tokens >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos)
                    continue;
                const auto key = tok.substr(0, eq);
                const auto value = tok.substr(eq + 1);
                const std::string where = "line " + std::to_string(line_no);
                if (key == "horizon")
                    table.horizon = parse_number(value, where);
                else if (key == "entities")
                    table.entities = parse_index(value, where);
            }
            continue;
        }
        if (!header_seen && line == header) {
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != columns)
            throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                              " columns (" + header + ")");
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

void write_header(std::ostream& out, const std::string& provenance, double horizon, std::size_t entities,
                  const char* columns) {
    if (!provenance.empty())
        out << provenance << '\n';
    out << "# horizon=" << format_double(horizon) << " entities=" << entities << '\n' << columns << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return in;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4)
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    return out;
}

std::string provenance_line(std::string_view what, std::string_view hash, std::uint64_t seed) {
    return "# hawkes-gaps " + std::string(what) + " config_hash=" + std::string(hash) + " seed=" + std::to_string(seed);
}

ModelParams params_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("params: invalid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw FormatError("params: expected a JSON object");
    for (const char* field : {"u", "a", "b"})
        if (!doc.contains(field))
            throw FormatError(std::string(field) + ": missing field");
    ModelParams params;
    params.u = number_array(doc["u"], "u");
    params.b = number_array(doc["b"], "b");
    const auto& a = doc["a"];
    if (!a.is_array())
        throw FormatError("a: expected an array");
    if (!a.empty() && a.front().is_array()) {
        std::vector<std::vector<double>> rows;
        for (const auto& row : a)
            rows.push_back(number_array(row, "a"));
        try {
            params.a = SquareMatrix::from_rows(rows);
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
    } else {
        try {
            params.a = SquareMatrix(params.u.size(), number_array(a, "a"));
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
    }
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return params;
}

namespace {

json params_json(const ModelParams& params) {
    return json{{"u", params.u}, {"a", params.a.rows()}, {"b", params.b}};
}

}  // namespace

std::string params_to_json(const ModelParams& params) { return params_json(params).dump(2) + "\n"; }

ModelParams read_params(const std::filesystem::path& path) { return params_from_json(slurp(path)); }

void write_params(const std::filesystem::path& path, const ModelParams& params) {
    auto out = open_out(path);
    out << params_to_json(params);
}

void write_events(std::ostream& out, const EventData& events, const std::string& provenance) {
    write_header(out, provenance, events.horizon(), events.dimension(), "entity,time");
    for (std::size_t m = 0; m < events.dimension(); ++m)
        for (double t : events.times(m))
            out << m << ',' << format_double(t) << '\n';
}

EventData read_events(std::istream& in, std::optional<double> horizon, std::optional<std::size_t> entities) {
    auto table = read_csv(in, 2, "entity,time");
    const auto T = horizon ? horizon : table.horizon;
    if (!T)
        throw FormatError("events: horizon unknown (no '# horizon=' line and none given)");
    std::size_t n = entities ? *entities : table.entities.value_or(0);
    std::vector<std::vector<double>> times(n);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string where = "events line " + std::to_string(table.line_numbers[r]);
        const auto m = parse_index(table.rows[r][0], where);
        if (m >= times.size()) {
            if (entities || table.entities)
                throw FormatError(where + ": entity " + std::to_string(m) + " out of range");
            times.resize(m + 1);
        }
        times[m].push_back(parse_number(table.rows[r][1], where));
    }
    try {
        return EventData(std::move(times), *T);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
}

void write_events(const std::filesystem::path& path, const EventData& events, const std::string& provenance) {
    auto out = open_out(path);
    write_events(out, events, provenance);
}

EventData read_events(const std::filesystem::path& path, std::optional<double> horizon,
                      std::optional<std::size_t> entities) {
    auto in = open_in(path);
    return read_events(in, horizon, entities);
}

void write_windows(std::ostream& out, const WindowSet& windows, const std::string& provenance) {
    write_header(out, provenance, windows.horizon(), windows.dimension(), "entity,c,d");
    for (std::size_t m = 0; m < windows.dimension(); ++m)
        for (const auto& w : windows.windows(m))
            out << m << ',' << format_double(w.c) << ',' << format_double(w.d) << '\n';
}

WindowSet read_windows(std::istream& in, std::optional<double> horizon, std::optional<std::size_t> entities) {
    auto table = read_csv(in, 3, "entity,c,d");
    const auto T = horizon ? horizon : table.horizon;
    if (!T)
        throw FormatError("windows: horizon unknown (no '# horizon=' line and none given)");
    std::size_t n = entities ? *entities : table.entities.value_or(0);
    std::vector<IntervalList> lists(n);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string where = "windows line " + std::to_string(table.line_numbers[r]);
        const auto m = parse_index(table.rows[r][0], where);
        if (m >= lists.size()) {
            if (entities || table.entities)
                throw FormatError(where + ": entity " + std::to_string(m) + " out of range");
            lists.resize(m + 1);
        }
        lists[m].push_back({parse_number(table.rows[r][1], where), parse_number(table.rows[r][2], where)});
    }
    try {
        return WindowSet(std::move(lists), *T);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
}

void write_windows(const std::filesystem::path& path, const WindowSet& windows, const std::string& provenance) {
    auto out = open_out(path);
    write_windows(out, windows, provenance);
}

WindowSet read_windows(const std::filesystem::path& path, std::optional<double> horizon,
                       std::optional<std::size_t> entities) {
    auto in = open_in(path);
    return read_windows(in, horizon, entities);
}

std::string fit_report_to_json(const FitReport& report) {
    const auto& r = report.result;
    json doc;
    doc["method"] = report.method;
    doc["mu"] = report.mu;
    if (report.C > 0.0)
        doc["C"] = report.C;
    doc["params"] = params_json(r.params);
    json bounds = json::array();
    for (std::size_t m = 0; m < r.bounds.values.size(); ++m) {
        for (std::size_t k = 0; k < r.bounds.values[m].size(); ++k) {
            json entry{{"entity", m}, {"window", k}, {"value", r.bounds.values[m][k]}};
            if (report.windows && m < report.windows->dimension() && k < report.windows->windows(m).size()) {
                entry["c"] = report.windows->windows(m)[k].c;
                entry["d"] = report.windows->windows(m)[k].d;
            }
            bounds.push_back(std::move(entry));
        }
    }
    doc["lambda_bar"] = std::move(bounds);
    doc["objective_trace"] = r.objective_trace;
    doc["iterations"] = r.iterations;
    doc["converged"] = r.converged;
    doc["stalled_b_steps"] = r.stalled_b_steps;
    doc["ascent_steps"] = r.ascent_steps;
    doc["intensity_floor_hit"] = r.intensity_floor_hit;
    if (!report.events_in.empty()) {
        json accounting = json::array();
        for (std::size_t m = 0; m < report.events_in.size(); ++m)
            accounting.push_back({{"entity", m},
                                  {"events_in", report.events_in[m]},
                                  {"events_kept", report.events_kept[m]},
                                  {"events_dropped", report.events_in[m] - report.events_kept[m]}});
        doc["event_accounting"] = std::move(accounting);
    }
    return doc.dump(2) + "\n";
}

}  // namespace hawkes_gaps::io
