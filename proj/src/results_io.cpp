#include "driftlab/results_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "driftlab/numerics.hpp"

namespace driftlab {
namespace {

using nlohmann::json;

constexpr const char* kColumns[] = {"model_id",      "family",        "hyperparams",
                                    "acc_id",        "acc_id_ci_lo",  "acc_id_ci_hi",
                                    "acc_ood",       "acc_ood_ci_lo", "acc_ood_ci_hi",
                                    "n_id",          "n_ood",         "status"};

std::string prob9(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    if (ec != std::errc{}) throw std::runtime_error("probability formatting failed");
    return std::string(buf, end);
}

void append_cell(std::string& row, const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") != std::string::npos)
        throw std::logic_error("results cell contains a reserved character: " + cell);
    if (!row.empty()) row += ',';
    row += cell;
}

std::string hyperparam_string(const std::map<std::string, std::string>& hp) {
    std::string out;
    for (const auto& [key, value] : hp) {
        if (!out.empty()) out += ';';
        out += key;
        out += '=';
        out += value;
    }
    return out;
}

[[noreturn]] void cell_error(int line, const std::string& column, const std::string& what) {
    throw SchemaError("row " + std::to_string(line) + ", column " + column + ": " + what);
}

// Splits one CSV line; double-quoted cells may carry commas and doubled
// quotes, everything else is taken verbatim.
std::vector<std::string> split_row(const std::string& line, int line_no) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    if (quoted)
        throw SchemaError("row " + std::to_string(line_no) + ": unterminated quoted cell");
    cells.push_back(std::move(cell));
    return cells;
}

double parse_prob(const std::string& cell, int line, const std::string& column) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        cell_error(line, column, "expected a number, got '" + cell + "'");
    if (!(out >= 0.0 && out <= 1.0))
        cell_error(line, column, "probability out of [0, 1]: '" + cell + "'");
    return out;
}

std::optional<long long> parse_count(const std::string& cell, int line,
                                     const std::string& column) {
    if (cell.empty()) return std::nullopt;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || out < 1)
        cell_error(line, column, "expected a positive integer or blank, got '" + cell + "'");
    return out;
}

std::map<std::string, std::string> parse_hyperparams(const std::string& cell, int line) {
    std::map<std::string, std::string> hp;
    if (cell.empty()) return hp;
    std::size_t pos = 0;
    while (pos <= cell.size()) {
        std::size_t semi = cell.find(';', pos);
        std::string item = cell.substr(pos, semi == std::string::npos ? semi : semi - pos);
        std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            cell_error(line, "hyperparams", "expected 'key=value' items, got '" + item + "'");
        hp[item.substr(0, eq)] = item.substr(eq + 1);
        if (semi == std::string::npos) break;
        pos = semi + 1;
    }
    return hp;
}

// Interval columns are optional as a pair per axis; a present n column may
// still hold blanks row by row.
MetricEstimate assemble_metric(double value, std::optional<double> lo, std::optional<double> hi,
                               std::optional<long long> n, int line, const std::string& axis) {
    MetricEstimate m;
    m.value = value;
    m.n = n;
    if (lo && hi) {
        m.ci_lo = *lo;
        m.ci_hi = *hi;
    } else if (n) {
        long long k = std::llround(value * static_cast<double>(*n));
        auto [ci_lo, ci_hi] = clopper_pearson(k, *n, 0.95);
        m.ci_lo = ci_lo;
        m.ci_hi = ci_hi;
    } else {
        m.ci_lo = m.ci_hi = value;
    }
    if (!(m.ci_lo <= m.value && m.value <= m.ci_hi))
        cell_error(line, axis, "interval does not contain the value");
    return m;
}

json fit_to_json(const FitSummary& s) {
    json j;
    j["transform"] = to_string(s.fit.transform);
    j["slope"] = s.fit.slope;
    j["intercept"] = s.fit.intercept;
    j["r_squared"] = s.fit.r_squared;
    j["n_points"] = s.fit.n_points;
    if (s.theoretical_slope) j["theoretical_slope"] = *s.theoretical_slope;
    if (s.theorem_bound) j["theorem_bound"] = *s.theorem_bound;
    j["scenario"] = s.scenario;
    j["seed"] = s.seed;
    return j;
}

FitSummary fit_from_json(const json& j) {
    FitSummary s;
    std::string transform = j.at("transform").get<std::string>();
    auto kind = parse_transform(transform);
    if (!kind) throw SchemaError("fit.json: unknown transform '" + transform + "'");
    s.fit.transform = *kind;
    s.fit.slope = j.at("slope").get<double>();
    s.fit.intercept = j.at("intercept").get<double>();
    s.fit.r_squared = j.at("r_squared").get<double>();
    s.fit.n_points = j.at("n_points").get<std::size_t>();
    if (j.contains("theoretical_slope"))
        s.theoretical_slope = j.at("theoretical_slope").get<double>();
    if (j.contains("theorem_bound")) s.theorem_bound = j.at("theorem_bound").get<double>();
    s.scenario = j.at("scenario").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

std::string write_records_csv(const std::vector<EvalRecord>& records) {
    std::vector<const EvalRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const EvalRecord* a, const EvalRecord* b) {
        return a->model_id < b->model_id;
    });

    std::string out = "# driftlab-results v" + std::to_string(kResultsSchemaVersion) + "\n";
    std::string header;
    for (const char* col : kColumns) append_cell(header, col);
    out += header;
    out += '\n';
    for (const EvalRecord* r : sorted) {
        std::string row;
        append_cell(row, r->model_id);
        append_cell(row, r->family);
        append_cell(row, hyperparam_string(r->hyperparams));
        append_cell(row, prob9(r->acc_id.value));
        append_cell(row, prob9(r->acc_id.ci_lo));
        append_cell(row, prob9(r->acc_id.ci_hi));
        append_cell(row, prob9(r->acc_ood.value));
        append_cell(row, prob9(r->acc_ood.ci_lo));
        append_cell(row, prob9(r->acc_ood.ci_hi));
        append_cell(row, r->acc_id.n ? std::to_string(*r->acc_id.n) : "");
        append_cell(row, r->acc_ood.n ? std::to_string(*r->acc_ood.n) : "");
        append_cell(row, r->status);
        out += row;
        out += '\n';
    }
    return out;
}

void save_records_csv(const std::vector<EvalRecord>& records, const std::string& path) {
    write_file(path, write_records_csv(records));
}

std::vector<EvalRecord> read_records_csv(std::string_view text) {
    std::vector<std::pair<int, std::string>> lines; // physical line number, content
    {
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            std::string raw(text.substr(pos, eol == std::string_view::npos ? eol : eol - pos));
            pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
            ++line_no;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            if (raw.empty()) continue;
            if (raw.front() == '#') {
                if (line_no == 1 &&
                    raw.rfind("# driftlab-results v", 0) == 0 &&
                    raw != "# driftlab-results v" + std::to_string(kResultsSchemaVersion))
                    throw SchemaError("unsupported results schema version: " + raw.substr(2));
                continue;
            }
            lines.emplace_back(line_no, std::move(raw));
        }
    }
    if (lines.empty()) throw SchemaError("results file has no header row");

    std::map<std::string, std::size_t> col;
    {
        std::vector<std::string> cells = split_row(lines.front().second, lines.front().first);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (col.count(cells[i]))
                throw SchemaError("row " + std::to_string(lines.front().first) +
                                  ": duplicate column '" + cells[i] + "'");
            col[cells[i]] = i;
        }
        for (const char* required : {"model_id", "family", "hyperparams", "acc_id", "acc_ood"})
            if (!col.count(required))
                throw SchemaError("missing required column '" + std::string(required) + "'");
        for (const char* axis : {"acc_id", "acc_ood"}) {
            bool lo = col.count(std::string(axis) + "_ci_lo");
            bool hi = col.count(std::string(axis) + "_ci_hi");
            if (lo != hi)
                throw SchemaError("columns " + std::string(axis) + "_ci_lo and " + axis +
                                  "_ci_hi must be present together");
        }
    }
    auto get = [&](const std::vector<std::string>& cells, const char* name,
                   int line) -> const std::string* {
        auto it = col.find(name);
        if (it == col.end()) return nullptr;
        if (it->second >= cells.size())
            throw SchemaError("row " + std::to_string(line) + ": too few cells");
        return &cells[it->second];
    };

    std::vector<EvalRecord> records;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        int line = lines[li].first;
        std::vector<std::string> cells = split_row(lines[li].second, line);
        if (cells.size() != col.size())
            throw SchemaError("row " + std::to_string(line) + ": expected " +
                              std::to_string(col.size()) + " cells, got " +
                              std::to_string(cells.size()));
        EvalRecord rec;
        rec.model_id = *get(cells, "model_id", line);
        if (rec.model_id.empty()) cell_error(line, "model_id", "must not be empty");
        rec.family = *get(cells, "family", line);
        rec.hyperparams = parse_hyperparams(*get(cells, "hyperparams", line), line);

        auto axis_metric = [&](const char* axis) {
            std::string name(axis);
            double value = parse_prob(*get(cells, axis, line), line, name);
            std::optional<double> lo, hi;
            if (const std::string* c = get(cells, (name + "_ci_lo").c_str(), line))
                lo = parse_prob(*c, line, name + "_ci_lo");
            if (const std::string* c = get(cells, (name + "_ci_hi").c_str(), line))
                hi = parse_prob(*c, line, name + "_ci_hi");
            std::optional<long long> n;
            std::string n_col = axis == std::string("acc_id") ? "n_id" : "n_ood";
            if (const std::string* c = get(cells, n_col.c_str(), line))
                n = parse_count(*c, line, n_col);
            return assemble_metric(value, lo, hi, n, line, name);
        };
        rec.acc_id = axis_metric("acc_id");
        rec.acc_ood = axis_metric("acc_ood");

        if (const std::string* c = get(cells, "status", line)) {
            if (*c != "ok" && *c != "non_converged" && *c != "degenerate")
                cell_error(line, "status", "unknown status '" + *c + "'");
            rec.status = *c;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<EvalRecord> load_records_csv(const std::string& path) {
    return read_records_csv(read_file(path));
}

std::string write_fit_json(const std::map<std::string, FitSummary>& groups) {
    json j;
    j["schema_version"] = kResultsSchemaVersion;
    json g = json::object();
    for (const auto& [name, summary] : groups) g[name] = fit_to_json(summary);
    j["groups"] = g;
    return j.dump(2) + "\n";
}

void save_fit_json(const std::map<std::string, FitSummary>& groups, const std::string& path) {
    write_file(path, write_fit_json(groups));
}

std::map<std::string, FitSummary> read_fit_json(std::string_view text) {
    try {
        json j = json::parse(text);
        std::map<std::string, FitSummary> out;
        for (const auto& [name, value] : j.at("groups").items())
            out[name] = fit_from_json(value);
        return out;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("fit.json: ") + e.what());
    }
}

std::map<std::string, FitSummary> load_fit_json(const std::string& path) {
    return read_fit_json(read_file(path));
}

} // namespace driftlab
