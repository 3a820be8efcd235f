#include "driftlab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "driftlab/numerics.hpp"

namespace driftlab {
namespace {

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(const Entry& e, const std::string& what) {
    throw ConfigError("line " + std::to_string(e.line) + ": '" + e.section + "." + e.key +
                      "' " + what);
}

long long to_int(const Entry& e, std::string_view token) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        fail(e, "expects an integer, got '" + std::string(token) + "'");
    return out;
}

std::uint64_t to_uint(const Entry& e, std::string_view token) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        fail(e, "expects a nonnegative integer, got '" + std::string(token) + "'");
    return out;
}

double to_double(const Entry& e, std::string_view token) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        fail(e, "expects a number, got '" + std::string(token) + "'");
    return out;
}

bool to_bool(const Entry& e, std::string_view token) {
    if (token == "true" || token == "1") return true;
    if (token == "false" || token == "0") return false;
    fail(e, "expects true or false, got '" + std::string(token) + "'");
}

// Comma-separated list; an empty value yields an empty list, which clears
// the corresponding grid.
std::vector<std::string_view> split_list(const Entry& e) {
    std::vector<std::string_view> out;
    std::string_view rest = e.value;
    if (trim(rest).empty()) return out;
    while (true) {
        std::size_t comma = rest.find(',');
        std::string_view item = trim(rest.substr(0, comma));
        if (item.empty()) fail(e, "has an empty list item");
        out.push_back(item);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

std::vector<double> to_double_list(const Entry& e) {
    std::vector<double> out;
    for (std::string_view item : split_list(e)) out.push_back(to_double(e, item));
    return out;
}

std::vector<long long> to_int_list(const Entry& e) {
    std::vector<long long> out;
    for (std::string_view item : split_list(e)) out.push_back(to_int(e, item));
    return out;
}

void apply_entry(ScenarioConfig& cfg, const Entry& e) {
    const std::string& s = e.section;
    const std::string& k = e.key;
    if (s == "scenario") {
        if (k == "kind") return; // consumed up front to pick the defaults
        if (k == "seed") {
            cfg.seed = to_uint(e, e.value);
        } else if (k == "threads") {
            long long t = to_int(e, e.value);
            if (t < 1 || t > 4096) fail(e, "must lie in [1, 4096]");
            cfg.threads = static_cast<int>(t);
        } else if (k == "transform") {
            auto t = parse_transform(e.value);
            if (!t) fail(e, "expects linear, probit, or logit, got '" + e.value + "'");
            cfg.transform = *t;
        } else {
            fail(e, "is not a recognized key");
        }
    } else if (s == "task") {
        if (k == "d") cfg.d = to_int(e, e.value);
        else if (k == "sigma") cfg.sigma = to_double(e, e.value);
        else if (k == "n_train") cfg.n_train = to_int(e, e.value);
        else if (k == "cov_small_count") cfg.cov_small_count = to_int(e, e.value);
        else if (k == "cov_var_big") cfg.cov_var_big = to_double(e, e.value);
        else if (k == "cov_var_small") cfg.cov_var_small = to_double(e, e.value);
        else fail(e, "is not a recognized key");
    } else if (s == "shift") {
        if (k == "alpha") cfg.alpha = to_double(e, e.value);
        else if (k == "beta") cfg.beta = to_double(e, e.value);
        else if (k == "gamma") cfg.gamma = to_double(e, e.value);
        else if (k == "sigma_aux") cfg.sigma_aux = to_double(e, e.value);
        else if (k == "adv_scale") cfg.adv_scale = to_double(e, e.value);
        else if (k == "adv_target") cfg.adv_target = e.value;
        else if (k == "cov_s2") cfg.cov_s2 = to_double(e, e.value);
        else if (k == "cov_scale_control") cfg.cov_scale_control = to_bool(e, e.value);
        else if (k == "matched_kappa") cfg.matched_kappa = to_double(e, e.value);
        else fail(e, "is not a recognized key");
    } else if (s == "grid") {
        if (k == "logistic_l2_c") cfg.grid.logistic_l2_c = to_double_list(e);
        else if (k == "logistic_l1_c") cfg.grid.logistic_l1_c = to_double_list(e);
        else if (k == "ridge_alpha") cfg.grid.ridge_alpha = to_double_list(e);
        else if (k == "knn_k") cfg.grid.knn_k = to_int_list(e);
        else if (k == "forest_trees") cfg.grid.forest_trees = to_int_list(e);
        else if (k == "n_sub") cfg.n_sub = to_int_list(e);
        else if (k == "d_proj") cfg.d_proj = to_int_list(e);
        else if (k == "d_proj_nonlinear") cfg.d_proj_nonlinear = to_int_list(e);
        else if (k == "aux_sizes") cfg.aux_sizes = to_int_list(e);
        else fail(e, "is not a recognized key");
    } else if (s == "eval") {
        if (k == "n_test") cfg.n_test = to_int(e, e.value);
        else fail(e, "is not a recognized key");
    } else {
        throw ConfigError("line " + std::to_string(e.line) + ": unknown section '[" + s + "]'");
    }
}

bool known_section(const std::string& name) {
    return name == "scenario" || name == "task" || name == "shift" || name == "grid" ||
           name == "eval";
}

} // namespace

ScenarioConfig parse_config(std::string_view text) {
    std::vector<Entry> entries;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        std::string_view ln = trim(raw);
        if (ln.empty() || ln.front() == '#' || ln.front() == ';') continue;
        if (ln.front() == '[') {
            if (ln.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": section header is missing ']'");
            std::string name(trim(ln.substr(1, ln.size() - 2)));
            if (!known_section(name))
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section '[" +
                                  name + "]'");
            section = name;
            continue;
        }
        std::size_t eq = ln.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + std::string(ln) + "'");
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) +
                              ": entry appears before any [section] header");
        Entry e;
        e.section = section;
        e.key = std::string(trim(ln.substr(0, eq)));
        e.value = std::string(trim(ln.substr(eq + 1)));
        e.line = line_no;
        if (e.key.empty()) fail(e, "has an empty key");
        entries.push_back(std::move(e));
    }

    const Entry* kind_entry = nullptr;
    for (const Entry& e : entries)
        if (e.section == "scenario" && e.key == "kind") kind_entry = &e;
    if (!kind_entry) throw ConfigError("'scenario.kind' is required");
    auto kind = parse_scenario_kind(kind_entry->value);
    if (!kind)
        fail(*kind_entry, "expects main_trend, more_data, adversarial, covariance_shift, or "
                          "matched_noise, got '" +
                              kind_entry->value + "'");

    ScenarioConfig cfg = default_config(*kind);
    for (const Entry& e : entries) apply_entry(cfg, e);
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

} // namespace driftlab
