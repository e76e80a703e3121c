#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "cudl/data.hpp"
#include "cudl/errors.hpp"

namespace cudl {

/// Shortest decimal string that round-trips to the same double, so output
/// files are byte-stable across runs and platforms.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string csv_line(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            line += ',';
        }
        line += cells[i];
    }
    line += '\n';
    return line;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open for writing: " + path);
    }
    out << content;
    if (!out) {
        throw Error("write failed: " + path);
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline double parse_cell(const std::string& cell, long data_row) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end || cell.empty()) {
        throw CsvParseError("non-numeric cell '" + cell + "' in data row " + std::to_string(data_row),
                            data_row);
    }
    return value;
}

}  // namespace detail

/// Numeric CSV with a header row. Every body cell must parse as a double.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable parse_csv(const std::string& content) {
    CsvTable table;
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) {
        throw CsvParseError("empty CSV input", 0);
    }
    table.header = detail::split_csv_line(line);
    long data_row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        ++data_row;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != table.header.size()) {
            throw CsvParseError("data row " + std::to_string(data_row) + " has " +
                                    std::to_string(cells.size()) + " cells, header has " +
                                    std::to_string(table.header.size()),
                                data_row);
        }
        std::vector<double> row(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            row[j] = detail::parse_cell(cells[j], data_row);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline CsvTable read_csv_file(const std::string& path) {
    return parse_csv(read_text_file(path));
}

/// Dataset CSV plus any simulation truth columns that ride along.
struct LoadedDataset {
    Dataset data;
    std::vector<std::string> covariate_names;
    std::map<std::string, std::vector<double>> extras;
};

inline bool is_truth_column(const std::string& name) {
    return name == "true_surv_t" || name == "true_rms_tau";
}

/// Reads `time,event,<covariates...>`; columns named true_surv_t or
/// true_rms_tau are returned separately rather than as covariates.
inline LoadedDataset dataset_from_table(const CsvTable& table) {
    if (table.header.size() < 2 || table.header[0] != "time" || table.header[1] != "event") {
        throw CsvParseError("header must start with time,event", 0);
    }
    std::vector<std::size_t> cov_cols;
    std::vector<std::string> cov_names;
    std::map<std::string, std::vector<double>> extras;
    for (std::size_t j = 2; j < table.header.size(); ++j) {
        if (is_truth_column(table.header[j])) {
            extras[table.header[j]] = {};
        } else {
            cov_cols.push_back(j);
            cov_names.push_back(table.header[j]);
        }
    }
    const std::size_t n = table.rows.size();
    std::vector<double> times(n);
    std::vector<int> events(n);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cov_cols.size()));
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = table.rows[i][0];
        const double ev = table.rows[i][1];
        if (ev != 0.0 && ev != 1.0) {
            throw CsvParseError("event must be 0 or 1 in data row " + std::to_string(i + 1),
                                static_cast<long>(i + 1));
        }
        events[i] = static_cast<int>(ev);
        for (std::size_t k = 0; k < cov_cols.size(); ++k) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.rows[i][cov_cols[k]];
        }
    }
    for (std::size_t j = 2; j < table.header.size(); ++j) {
        if (is_truth_column(table.header[j])) {
            auto& col = extras[table.header[j]];
            col.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = table.rows[i][j];
            }
        }
    }
    return LoadedDataset{Dataset(std::move(times), std::move(events), std::move(x)),
                         std::move(cov_names), std::move(extras)};
}

inline LoadedDataset read_dataset_csv(const std::string& path) {
    return dataset_from_table(read_csv_file(path));
}

/// Covariate matrix for prediction. Accepts either a bare covariate CSV or
/// a full dataset CSV, skipping time/event/truth columns when present.
struct LoadedMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;
};

inline LoadedMatrix read_covariates_csv(const std::string& path) {
    CsvTable table = read_csv_file(path);
    std::vector<std::size_t> cols;
    LoadedMatrix out;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const std::string& name = table.header[j];
        if (name == "time" || name == "event" || name == "d" || is_truth_column(name)) {
            continue;
        }
        cols.push_back(j);
        out.names.push_back(name);
    }
    out.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                table.rows[i][cols[k]];
        }
    }
    return out;
}

inline std::string dataset_to_csv(
    const Dataset& data, const std::vector<std::string>& covariate_names,
    const std::vector<std::pair<std::string, std::vector<double>>>& extras = {}) {
    if (covariate_names.size() != data.p()) {
        throw DimensionMismatchError("covariate name count does not match width");
    }
    std::vector<std::string> header = {"time", "event"};
    header.insert(header.end(), covariate_names.begin(), covariate_names.end());
    for (const auto& [name, col] : extras) {
        if (col.size() != data.n()) {
            throw DimensionMismatchError("extra column length does not match sample size");
        }
        header.push_back(name);
    }
    std::string out = csv_line(header);
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < data.n(); ++i) {
        cells.clear();
        cells.push_back(format_double(data.time(i)));
        cells.push_back(format_int(data.event(i)));
        for (std::size_t j = 0; j < data.p(); ++j) {
            cells.push_back(format_double(data.covariates()(static_cast<Eigen::Index>(i),
                                                            static_cast<Eigen::Index>(j))));
        }
        for (const auto& [name, col] : extras) {
            cells.push_back(format_double(col[i]));
        }
        out += csv_line(cells);
    }
    return out;
}

}  // namespace cudl
