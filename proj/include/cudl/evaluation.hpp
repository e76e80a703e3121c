#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cudl/censoring_tree.hpp"
#include "cudl/csv.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/losses.hpp"
#include "cudl/parallel.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/rng.hpp"
#include "cudl/simulation.hpp"

namespace cudl {

/// Trains a method on `train` and returns one prediction per row of
/// `test_x` (raw, unstandardized covariates).
using FitPredictFn =
    std::function<Eigen::VectorXd(const Dataset& train, const Eigen::MatrixXd& test_x,
                                  std::uint64_t seed)>;

/// Builds a FitPredictFn for a given target.
using MethodFactory = std::function<FitPredictFn(const TargetSpec&)>;

inline double mse_vs_truth(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths) {
    if (predictions.size() != truths.size()) {
        throw DimensionMismatchError("predictions and truths differ in length");
    }
    if (predictions.size() == 0) {
        throw InvalidParameterError("mse needs at least one prediction");
    }
    return (predictions - truths).squaredNorm() / static_cast<double>(predictions.size());
}

inline double median_of(std::vector<double> values) {
    if (values.empty()) {
        throw InvalidParameterError("median of empty sequence");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Linear-interpolation sample quantile of sorted-on-demand values.
inline double quantile_of(std::vector<double> values, double q) {
    if (values.empty()) {
        throw InvalidParameterError("quantile of empty sequence");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw InvalidParameterError("quantile level must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) {
        return values.back();
    }
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

/// Fold labels that equalize the censoring rate: each event stratum is
/// shuffled and dealt round-robin on its own.
inline std::vector<int> stratified_fold_labels(const std::vector<int>& events, int n_folds,
                                               std::uint64_t seed) {
    if (n_folds < 2) {
        throw InvalidParameterError("need at least two folds");
    }
    if (events.size() < static_cast<std::size_t>(n_folds)) {
        throw InsufficientDataError("fewer rows than folds");
    }
    std::vector<std::size_t> censored;
    std::vector<std::size_t> uncensored;
    for (std::size_t i = 0; i < events.size(); ++i) {
        (events[i] == 0 ? censored : uncensored).push_back(i);
    }
    Rng rng(seed);
    rng.shuffle(censored);
    rng.shuffle(uncensored);
    std::vector<int> fold(events.size());
    for (std::size_t k = 0; k < censored.size(); ++k) {
        fold[censored[k]] = static_cast<int>(k % static_cast<std::size_t>(n_folds));
    }
    for (std::size_t k = 0; k < uncensored.size(); ++k) {
        fold[uncensored[k]] = static_cast<int>(k % static_cast<std::size_t>(n_folds));
    }
    return fold;
}

struct BrierCvResult {
    std::vector<double> split_scores;
    double median = 0.0;
};

namespace detail {

constexpr std::uint64_t kSeedCvSplit = 0x73706c6974ULL;
constexpr std::uint64_t kSeedCvFit = 0x63766669ULL;

inline double brier_cv_one_split(const Dataset& data, double t, const FitPredictFn& fit,
                                 int n_folds, const CensoringTreeConfig& tree_cfg,
                                 std::uint64_t seed, std::size_t split) {
    const std::vector<int> fold = stratified_fold_labels(
        data.events(), n_folds, derive_seed(seed, {kSeedCvSplit, split}));
    double pooled = 0.0;
    for (int f = 0; f < n_folds; ++f) {
        std::vector<std::size_t> train_rows;
        std::vector<std::size_t> test_rows;
        for (std::size_t i = 0; i < data.n(); ++i) {
            (fold[i] == f ? test_rows : train_rows).push_back(i);
        }
        const Dataset train = data.subset(train_rows);
        const Dataset test = data.subset(test_rows);
        const Eigen::VectorXd predictions = fit(
            train, test.covariates(),
            derive_seed(seed, {kSeedCvFit, split, static_cast<std::uint64_t>(f)}));
        const Dataset test_restricted = restrict_dataset(test, t);
        bool any_event = false;
        for (int e : test_restricted.events()) {
            if (e == 1) {
                any_event = true;
                break;
            }
        }
        if (!any_event) {
            throw DegenerateFoldError("fold " + std::to_string(f) + " of split " +
                                      std::to_string(split) + " has no events before t");
        }
        const CensoringTree g = censoring_tree_fit(train, tree_cfg);
        const LossValue score = censored_brier(test_restricted, t, predictions, g);
        pooled += score.value * static_cast<double>(score.n);
    }
    return pooled / static_cast<double>(data.n());
}

}  // namespace detail

/// Censoring-stratified k-fold cross-validated Brier score, repeated over
/// independent splits; reports every split's pooled score and their median.
inline BrierCvResult stratified_cv_brier(const Dataset& data, double t, const FitPredictFn& fit,
                                         int n_folds = 5, int n_splits = 10,
                                         std::uint64_t seed = 0,
                                         const CensoringTreeConfig& tree_cfg = {},
                                         int jobs = 1) {
    if (!(t > 0.0)) {
        throw InvalidParameterError("evaluation time must be positive");
    }
    const double max_time = *std::max_element(data.times().begin(), data.times().end());
    if (t >= max_time) {
        throw InvalidParameterError("evaluation time must lie below the largest observed time");
    }
    if (n_splits < 1) {
        throw InvalidParameterError("need at least one split");
    }
    BrierCvResult result;
    result.split_scores.assign(static_cast<std::size_t>(n_splits), 0.0);
    parallel_for(
        static_cast<std::size_t>(n_splits),
        [&](std::size_t s) {
            result.split_scores[s] =
                detail::brier_cv_one_split(data, t, fit, n_folds, tree_cfg, seed, s);
        },
        static_cast<unsigned>(jobs));
    result.median = median_of(result.split_scores);
    return result;
}

struct BenchmarkRow {
    int setting = 0;
    std::string method;
    std::string target;
    std::size_t n = 0;
    int replication = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

struct BenchmarkConfig {
    std::vector<int> settings;
    std::vector<TargetSpec> targets;
    std::vector<std::size_t> ns;
    int replications = 50;
    std::size_t test_n = 1000;
    int p = 30;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::size_t quantile_mc = 200000;
};

/// A target whose value is NaN is resolved per setting: the marginal median
/// failure time for brier, the marginal 0.85 observed-time quantile for rms.
inline TargetSpec auto_target(TargetType type) {
    TargetSpec spec;
    spec.type = type;
    spec.value = std::numeric_limits<double>::quiet_NaN();
    return spec;
}

inline std::string target_label(const TargetSpec& target) {
    std::string label = target.type == TargetType::brier ? "brier:" : "rms:";
    label += format_double(target.value);
    return label;
}

namespace detail {

constexpr std::uint64_t kSeedBenchCell = 0x62656e6368ULL;
constexpr std::uint64_t kSeedBenchTrain = 1;
constexpr std::uint64_t kSeedBenchTest = 2;
constexpr std::uint64_t kSeedBenchFit = 3;
constexpr std::uint64_t kSeedBenchQuantile = 4;

inline TargetSpec resolve_target(const TargetSpec& target, int setting,
                                 const BenchmarkConfig& cfg, std::size_t t_idx) {
    if (!std::isnan(target.value)) {
        return target;
    }
    TargetSpec resolved = target;
    const std::uint64_t qseed = derive_seed(
        cfg.seed, {kSeedBenchQuantile, static_cast<std::uint64_t>(setting), t_idx});
    if (target.type == TargetType::brier) {
        resolved.value =
            marginal_quantile(setting, 0.5, cfg.quantile_mc, qseed, MarginalTime::failure);
    } else {
        resolved.value =
            marginal_quantile(setting, 0.85, cfg.quantile_mc, qseed, MarginalTime::observed);
    }
    return resolved;
}

inline std::string sanitize_status(std::string text) {
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\r') {
            c = ';';
        }
    }
    return text;
}

inline Eigen::VectorXd benchmark_truth(int setting, const TargetSpec& target,
                                       const Dataset& test) {
    Eigen::VectorXd truth(static_cast<Eigen::Index>(test.n()));
    for (std::size_t i = 0; i < test.n(); ++i) {
        const Eigen::VectorXd w = test.covariates().row(static_cast<Eigen::Index>(i));
        truth[static_cast<Eigen::Index>(i)] = target.type == TargetType::brier
                                                  ? true_survival(setting, w, target.value)
                                                  : true_rms(setting, w, target.value);
    }
    return truth;
}

}  // namespace detail

/// Runs every (setting, target, n) cell of the grid: per replication a fresh
/// train/test pair is simulated and shared across methods, each method is
/// fit and scored against the closed-form truth on the test covariates. A
/// failing method records a status row instead of aborting the grid.
inline std::vector<BenchmarkRow> benchmark_grid(
    const std::vector<std::pair<std::string, MethodFactory>>& methods,
    const BenchmarkConfig& cfg,
    const std::function<void(int, const TargetSpec&, std::size_t,
                             const std::vector<BenchmarkRow>&)>& on_cell = nullptr) {
    if (methods.empty()) {
        throw InvalidParameterError("benchmark needs at least one method");
    }
    if (cfg.replications < 0) {
        throw InvalidParameterError("replications must be nonnegative");
    }
    std::vector<BenchmarkRow> all_rows;
    for (const int setting : cfg.settings) {
        for (std::size_t t_idx = 0; t_idx < cfg.targets.size(); ++t_idx) {
            const TargetSpec target = detail::resolve_target(cfg.targets[t_idx], setting, cfg, t_idx);
            const std::string label = target_label(target);
            std::vector<FitPredictFn> fns;
            fns.reserve(methods.size());
            for (const auto& [name, factory] : methods) {
                fns.push_back(factory(target));
            }
            for (const std::size_t n : cfg.ns) {
                const auto reps = static_cast<std::size_t>(cfg.replications);
                std::vector<std::vector<BenchmarkRow>> by_rep(reps);
                parallel_for(
                    reps,
                    [&](std::size_t rep) {
                        const std::uint64_t cell_seed = derive_seed(
                            cfg.seed, {detail::kSeedBenchCell, static_cast<std::uint64_t>(setting),
                                       t_idx, n, rep});
                        SettingConfig sim;
                        sim.setting = setting;
                        sim.p = cfg.p;
                        sim.n = n;
                        sim.seed = derive_seed(cell_seed, {detail::kSeedBenchTrain});
                        const Dataset train = simulate(sim);
                        sim.n = cfg.test_n;
                        sim.seed = derive_seed(cell_seed, {detail::kSeedBenchTest});
                        const Dataset test = simulate(sim);
                        const Eigen::VectorXd truth =
                            detail::benchmark_truth(setting, target, test);
                        for (std::size_t m = 0; m < methods.size(); ++m) {
                            BenchmarkRow row;
                            row.setting = setting;
                            row.method = methods[m].first;
                            row.target = label;
                            row.n = n;
                            row.replication = static_cast<int>(rep);
                            try {
                                const Eigen::VectorXd pred =
                                    fns[m](train, test.covariates(),
                                           derive_seed(cell_seed, {detail::kSeedBenchFit, m}));
                                row.mse = mse_vs_truth(pred, truth);
                            } catch (const Error& e) {
                                row.status = detail::sanitize_status(e.what());
                            }
                            by_rep[rep].push_back(std::move(row));
                        }
                    },
                    static_cast<unsigned>(cfg.jobs));
                std::vector<BenchmarkRow> cell_rows;
                for (auto& rep_rows : by_rep) {
                    for (auto& row : rep_rows) {
                        cell_rows.push_back(std::move(row));
                    }
                }
                if (on_cell) {
                    on_cell(setting, target, n, cell_rows);
                }
                for (auto& row : cell_rows) {
                    all_rows.push_back(std::move(row));
                }
            }
        }
    }
    return all_rows;
}

struct PlotRow {
    int setting = 0;
    std::string method;
    std::string target;
    std::size_t n = 0;
    std::string statistic;
    double value = 0.0;
};

/// Per-method quartiles of the successful benchmark replications, in a long
/// format convenient for plotting tools.
inline std::vector<PlotRow> summarize_benchmark(const std::vector<BenchmarkRow>& rows) {
    std::vector<PlotRow> out;
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        bool is_new = true;
        for (const std::size_t j : seen) {
            const auto& a = rows[j];
            const auto& b = rows[i];
            if (a.setting == b.setting && a.method == b.method && a.target == b.target &&
                a.n == b.n) {
                is_new = false;
                break;
            }
        }
        if (!is_new) {
            continue;
        }
        seen.push_back(i);
        std::vector<double> values;
        for (const auto& row : rows) {
            if (row.setting == rows[i].setting && row.method == rows[i].method &&
                row.target == rows[i].target && row.n == rows[i].n && row.status == "ok" &&
                std::isfinite(row.mse)) {
                values.push_back(row.mse);
            }
        }
        if (values.empty()) {
            continue;
        }
        const std::pair<const char*, double> stats[] = {
            {"q1", 0.25}, {"median", 0.5}, {"q3", 0.75}};
        for (const auto& [name, q] : stats) {
            PlotRow pr;
            pr.setting = rows[i].setting;
            pr.method = rows[i].method;
            pr.target = rows[i].target;
            pr.n = rows[i].n;
            pr.statistic = name;
            pr.value = quantile_of(values, q);
            out.push_back(std::move(pr));
        }
    }
    return out;
}

}  // namespace cudl
