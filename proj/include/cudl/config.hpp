#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cudl/censoring_tree.hpp"
#include "cudl/errors.hpp"
#include "cudl/evaluation.hpp"
#include "cudl/network.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/survival_forest.hpp"

namespace cudl {

/// A parsed config value: scalar number, string, bool, or a homogeneous
/// array of numbers or strings.
struct TomlValue {
    enum class Kind { number, string, boolean, number_list, string_list };
    Kind kind = Kind::number;
    double num = 0.0;
    std::string str;
    bool flag = false;
    std::vector<double> nums;
    std::vector<std::string> strs;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return s.substr(b, e - b);
}

[[noreturn]] inline void config_error(std::size_t line, const std::string& what) {
    throw InvalidParameterError("config line " + std::to_string(line) + ": " + what);
}

/// Strips a trailing comment that starts outside any quoted string.
inline std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') {
            quoted = !quoted;
        } else if (s[i] == '#' && !quoted) {
            return s.substr(0, i);
        }
    }
    return s;
}

inline double parse_config_number(const std::string& text, std::size_t line) {
    const std::string t = trim(text);
    double value = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        config_error(line, "'" + t + "' is not a number");
    }
    return value;
}

inline TomlValue parse_config_value(const std::string& raw, std::size_t line) {
    const std::string text = trim(raw);
    TomlValue v;
    if (text.empty()) {
        config_error(line, "missing value");
    }
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') {
            config_error(line, "unterminated string");
        }
        v.kind = TomlValue::Kind::string;
        v.str = text.substr(1, text.size() - 2);
        return v;
    }
    if (text == "true" || text == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.flag = text == "true";
        return v;
    }
    if (text.front() == '[') {
        if (text.back() != ']') {
            config_error(line, "unterminated array");
        }
        const std::string body = trim(text.substr(1, text.size() - 2));
        std::vector<std::string> items;
        std::size_t start = 0;
        bool quoted = false;
        for (std::size_t i = 0; i <= body.size(); ++i) {
            if (i < body.size() && body[i] == '"') {
                quoted = !quoted;
            }
            if (i == body.size() || (body[i] == ',' && !quoted)) {
                const std::string item = trim(body.substr(start, i - start));
                if (!item.empty()) {
                    items.push_back(item);
                }
                start = i + 1;
            }
        }
        if (!items.empty() && items.front().front() == '"') {
            v.kind = TomlValue::Kind::string_list;
            for (const std::string& item : items) {
                if (item.size() < 2 || item.front() != '"' || item.back() != '"') {
                    config_error(line, "array mixes strings and other values");
                }
                v.strs.push_back(item.substr(1, item.size() - 2));
            }
        } else {
            v.kind = TomlValue::Kind::number_list;
            for (const std::string& item : items) {
                v.nums.push_back(parse_config_number(item, line));
            }
        }
        return v;
    }
    v.kind = TomlValue::Kind::number;
    v.num = parse_config_number(text, line);
    return v;
}

}  // namespace detail

/// Flat view of a parsed config: keys are "section.key" (or bare "key"
/// before the first section header).
class TomlTable {
  public:
    bool contains(const std::string& key) const { return values_.count(key) > 0; }

    double number(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        require(it->second, TomlValue::Kind::number, key);
        return it->second.num;
    }

    std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        require(it->second, TomlValue::Kind::string, key);
        return it->second.str;
    }

    bool boolean(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        require(it->second, TomlValue::Kind::boolean, key);
        return it->second.flag;
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        require(it->second, TomlValue::Kind::number_list, key);
        return it->second.nums;
    }

    std::vector<std::string> strings(const std::string& key,
                                     std::vector<std::string> fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        require(it->second, TomlValue::Kind::string_list, key);
        return it->second.strs;
    }

    void insert(std::string key, TomlValue value) { values_[std::move(key)] = std::move(value); }

    const std::map<std::string, TomlValue>& values() const { return values_; }

  private:
    static void require(const TomlValue& v, TomlValue::Kind kind, const std::string& key) {
        if (v.kind != kind) {
            throw InvalidParameterError("config key '" + key + "' has the wrong type");
        }
    }

    std::map<std::string, TomlValue> values_;
};

/// Parses the TOML subset used for configs: [section] headers, key = value
/// lines with numbers, "strings", booleans and one-level arrays, and #
/// comments.
inline TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        ++line_no;
        std::string line = detail::trim(detail::strip_comment(text.substr(start, end - start)));
        start = end + 1;
        if (line.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                detail::config_error(line_no, "malformed section header");
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                detail::config_error(line_no, "empty section name");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            detail::config_error(line_no, "expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) {
            detail::config_error(line_no, "empty key");
        }
        const std::string full_key = section.empty() ? key : section + "." + key;
        table.insert(full_key, detail::parse_config_value(line.substr(eq + 1), line_no));
        if (end == text.size()) {
            break;
        }
    }
    return table;
}

namespace detail {

inline int config_int(const TomlTable& table, const std::string& key, int fallback) {
    return static_cast<int>(table.number(key, static_cast<double>(fallback)));
}

inline std::size_t config_size(const TomlTable& table, const std::string& key,
                               std::size_t fallback) {
    const double v = table.number(key, static_cast<double>(fallback));
    if (v < 0.0) {
        throw InvalidParameterError("config key '" + key + "' must be nonnegative");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace detail

inline void apply_network_config(const TomlTable& table, NetworkConfig& cfg) {
    cfg.d1 = detail::config_int(table, "network.d1", cfg.d1);
    cfg.epochs = detail::config_int(table, "network.epochs", cfg.epochs);
    cfg.batch_size = detail::config_int(table, "network.batch_size", cfg.batch_size);
    cfg.dropout_rate = table.number("network.dropout_rate", cfg.dropout_rate);
    cfg.learning_rate = table.number("network.learning_rate", cfg.learning_rate);
    cfg.rms_decay = table.number("network.rms_decay", cfg.rms_decay);
    cfg.epsilon_stabilizer = table.number("network.epsilon_stabilizer", cfg.epsilon_stabilizer);
}

inline void apply_forest_config(const TomlTable& table, SurvivalForestConfig& cfg) {
    cfg.n_trees = detail::config_size(table, "forest.n_trees", cfg.n_trees);
    cfg.mtry = detail::config_size(table, "forest.mtry", cfg.mtry);
    cfg.min_leaf = detail::config_size(table, "forest.min_leaf", cfg.min_leaf);
    cfg.bootstrap = table.boolean("forest.bootstrap", cfg.bootstrap);
}

inline void apply_tree_config(const TomlTable& table, CensoringTreeConfig& cfg) {
    cfg.min_leaf = detail::config_size(table, "tree.min_leaf", cfg.min_leaf);
    cfg.trunc_frac = table.number("tree.trunc_frac", cfg.trunc_frac);
    cfg.max_depth = detail::config_int(table, "tree.max_depth", cfg.max_depth);
    cfg.min_statistic = table.number("tree.min_statistic", cfg.min_statistic);
}

inline void apply_cudl_config(const TomlTable& table, CudlSpec& spec) {
    spec.eta_grid = table.numbers("cudl.eta_grid", spec.eta_grid);
    spec.cv_folds = detail::config_int(table, "cudl.cv_folds", spec.cv_folds);
    spec.refit_nuisances_per_fold =
        table.boolean("cudl.refit_nuisances_per_fold", spec.refit_nuisances_per_fold);
    apply_network_config(table, spec.network);
    apply_forest_config(table, spec.forest);
    apply_tree_config(table, spec.tree);
}

/// Grid targets: "brier" and "rms" resolve their time per setting from the
/// marginal distribution; "brier:T" and "rms:TAU" pin it explicitly.
inline std::vector<TargetSpec> parse_grid_targets(const std::vector<std::string>& names) {
    std::vector<TargetSpec> out;
    for (const std::string& name : names) {
        if (name == "brier") {
            out.push_back(auto_target(TargetType::brier));
        } else if (name == "rms") {
            out.push_back(auto_target(TargetType::rms));
        } else {
            out.push_back(parse_target(name));
        }
    }
    return out;
}

struct BenchmarkGrid {
    BenchmarkConfig config;
    std::vector<std::string> methods;
};

inline BenchmarkGrid parse_benchmark_grid(const TomlTable& table) {
    BenchmarkGrid grid;
    const std::vector<double> settings = table.numbers("grid.settings", {1.0, 2.0});
    for (const double s : settings) {
        const int setting = static_cast<int>(s);
        if (setting != 1 && setting != 2) {
            throw InvalidParameterError("grid settings must be 1 or 2");
        }
        grid.config.settings.push_back(setting);
    }
    grid.methods = table.strings("grid.methods", {"cudl-dr", "cudl-bj", "cox", "rsf"});
    grid.config.targets = parse_grid_targets(table.strings("grid.targets", {"brier", "rms"}));
    const std::vector<double> ns = table.numbers("grid.ns", {200.0, 400.0});
    for (const double n : ns) {
        if (n < 2.0) {
            throw InvalidParameterError("grid ns must be at least 2");
        }
        grid.config.ns.push_back(static_cast<std::size_t>(n));
    }
    grid.config.replications = detail::config_int(table, "grid.replications", 50);
    grid.config.test_n = detail::config_size(table, "grid.test_n", 1000);
    grid.config.p = detail::config_int(table, "grid.p", 30);
    grid.config.quantile_mc = detail::config_size(table, "grid.quantile_mc", 200000);
    return grid;
}

}  // namespace cudl
