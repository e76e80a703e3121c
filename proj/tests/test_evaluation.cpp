#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/evaluation.hpp"
#include "cudl/methods.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/simulation.hpp"
#include "cudl/survival_forest.hpp"

#include "helpers.hpp"

using namespace cudl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        v[i++] = x;
    }
    return v;
}

/// Uncensored data whose failure time is a fixed function of the single
/// covariate, so a test-side oracle can recover it from covariates alone.
Dataset deterministic_uncensored(std::size_t n) {
    std::vector<double> times(n);
    std::vector<int> events(n, 1);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
        x(static_cast<Eigen::Index>(i), 0) = 0.1 * static_cast<double>(i);
        times[i] = 0.1 + x(static_cast<Eigen::Index>(i), 0);
    }
    return Dataset(std::move(times), std::move(events), std::move(x));
}

bool rows_match(const BenchmarkRow& a, const BenchmarkRow& b) {
    const bool mse_same =
        (std::isnan(a.mse) && std::isnan(b.mse)) || a.mse == b.mse;
    return a.setting == b.setting && a.method == b.method && a.target == b.target &&
           a.n == b.n && a.replication == b.replication && a.status == b.status && mse_same;
}

BenchmarkConfig tiny_benchmark() {
    BenchmarkConfig cfg;
    cfg.settings = {1};
    TargetSpec target;
    target.type = TargetType::brier;
    target.value = 0.7;
    cfg.targets = {target};
    cfg.ns = {60};
    cfg.replications = 2;
    cfg.test_n = 30;
    cfg.p = 15;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("mse against the truth vector") {
    const Eigen::VectorXd truth = vec({1.0, 2.0, 3.0});
    REQUIRE(mse_vs_truth(truth, truth) == 0.0);
    REQUIRE(mse_vs_truth(truth.array() + 0.1, truth) == Catch::Approx(0.01).epsilon(1e-12));
    REQUIRE(mse_vs_truth(vec({0.0, 4.0, 3.0}), truth) == Catch::Approx(5.0 / 3.0).epsilon(1e-12));
    REQUIRE_THROWS_AS(mse_vs_truth(vec({1.0}), truth), DimensionMismatchError);
    REQUIRE_THROWS_AS(mse_vs_truth(Eigen::VectorXd(), Eigen::VectorXd()),
                      InvalidParameterError);
}

TEST_CASE("medians and quantiles") {
    REQUIRE(median_of({3.0, 1.0, 2.0}) == 2.0);
    REQUIRE(median_of({4.0, 1.0, 3.0, 2.0}) == 2.5);
    REQUIRE(median_of({5.0}) == 5.0);
    REQUIRE_THROWS_AS(median_of({}), InvalidParameterError);

    const std::vector<double> values = {40.0, 10.0, 30.0, 20.0};
    REQUIRE(quantile_of(values, 0.0) == 10.0);
    REQUIRE(quantile_of(values, 1.0) == 40.0);
    REQUIRE(quantile_of(values, 0.5) == Catch::Approx(25.0).epsilon(1e-12));
    REQUIRE(quantile_of(values, 0.25) == Catch::Approx(17.5).epsilon(1e-12));
    REQUIRE(quantile_of(values, 0.75) == Catch::Approx(32.5).epsilon(1e-12));
    REQUIRE(quantile_of({7.0}, 0.3) == 7.0);
    REQUIRE_THROWS_AS(quantile_of({}, 0.5), InvalidParameterError);
    REQUIRE_THROWS_AS(quantile_of(values, -0.1), InvalidParameterError);
    REQUIRE_THROWS_AS(quantile_of(values, 1.1), InvalidParameterError);
}

TEST_CASE("stratified fold labels balance both strata") {
    std::vector<int> events(103);
    Rng rng(5);
    std::size_t censored_total = 0;
    for (auto& e : events) {
        e = rng.uniform() < 0.35 ? 0 : 1;
        censored_total += e == 0 ? 1 : 0;
    }
    const int n_folds = 5;
    const std::vector<int> fold = stratified_fold_labels(events, n_folds, 11);
    REQUIRE(fold.size() == events.size());

    std::vector<int> censored_counts(n_folds, 0);
    std::vector<int> uncensored_counts(n_folds, 0);
    for (std::size_t i = 0; i < events.size(); ++i) {
        REQUIRE(fold[i] >= 0);
        REQUIRE(fold[i] < n_folds);
        (events[i] == 0 ? censored_counts : uncensored_counts)[static_cast<std::size_t>(fold[i])]++;
    }
    const auto [clo, chi] = std::minmax_element(censored_counts.begin(), censored_counts.end());
    const auto [ulo, uhi] = std::minmax_element(uncensored_counts.begin(), uncensored_counts.end());
    REQUIRE(*chi - *clo <= 1);
    REQUIRE(*uhi - *ulo <= 1);
    REQUIRE(censored_total > 0);

    REQUIRE(stratified_fold_labels(events, n_folds, 11) == fold);
    REQUIRE(stratified_fold_labels(events, n_folds, 12) != fold);
    REQUIRE_THROWS_AS(stratified_fold_labels(events, 1, 0), InvalidParameterError);
    REQUIRE_THROWS_AS(stratified_fold_labels({1, 0, 1}, 4, 0), InsufficientDataError);
}

TEST_CASE("cross-validated brier score on uncensored data") {
    const Dataset data = deterministic_uncensored(80);
    const double t = 4.05;

    SECTION("an oracle predictor scores zero") {
        const FitPredictFn oracle = [t](const Dataset&, const Eigen::MatrixXd& test_x,
                                        std::uint64_t) {
            Eigen::VectorXd out(test_x.rows());
            for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
                out[i] = 0.1 + test_x(i, 0) >= t ? 1.0 : 0.0;
            }
            return out;
        };
        const BrierCvResult result = stratified_cv_brier(data, t, oracle, 5, 4, 17);
        REQUIRE(result.split_scores.size() == 4);
        for (double s : result.split_scores) {
            REQUIRE(s == 0.0);
        }
        REQUIRE(result.median == 0.0);
    }

    SECTION("a constant half predictor scores one quarter") {
        const FitPredictFn half = [](const Dataset&, const Eigen::MatrixXd& test_x,
                                     std::uint64_t) {
            return Eigen::VectorXd::Constant(test_x.rows(), 0.5).eval();
        };
        const BrierCvResult result = stratified_cv_brier(data, t, half, 5, 3, 17);
        for (double s : result.split_scores) {
            REQUIRE(s == Catch::Approx(0.25).margin(1e-12));
        }
        REQUIRE(result.median == Catch::Approx(0.25).margin(1e-12));
    }

    SECTION("parallel splits reproduce the serial scores") {
        const FitPredictFn half = [](const Dataset&, const Eigen::MatrixXd& test_x,
                                     std::uint64_t) {
            return Eigen::VectorXd::Constant(test_x.rows(), 0.5).eval();
        };
        const BrierCvResult serial = stratified_cv_brier(data, t, half, 5, 3, 17, {}, 1);
        const BrierCvResult threaded = stratified_cv_brier(data, t, half, 5, 3, 17, {}, 2);
        REQUIRE(threaded.split_scores == serial.split_scores);
        REQUIRE(threaded.median == serial.median);
    }

    SECTION("evaluation time validation") {
        const FitPredictFn half = [](const Dataset&, const Eigen::MatrixXd& test_x,
                                     std::uint64_t) {
            return Eigen::VectorXd::Constant(test_x.rows(), 0.5).eval();
        };
        REQUIRE_THROWS_AS(stratified_cv_brier(data, 0.0, half), InvalidParameterError);
        REQUIRE_THROWS_AS(stratified_cv_brier(data, -1.0, half), InvalidParameterError);
        REQUIRE_THROWS_AS(stratified_cv_brier(data, 8.0, half), InvalidParameterError);
        REQUIRE_THROWS_AS(stratified_cv_brier(data, 9.0, half), InvalidParameterError);
        REQUIRE_THROWS_AS(stratified_cv_brier(data, t, half, 5, 0), InvalidParameterError);
    }
}

TEST_CASE("folds without events before the horizon are rejected") {
    std::vector<double> times(20, 0.5);
    std::vector<int> events(20, 0);
    times[7] = 5.0;
    Eigen::MatrixXd x(20, 1);
    for (Eigen::Index i = 0; i < 20; ++i) {
        x(i, 0) = static_cast<double>(i);
    }
    const Dataset data(std::move(times), std::move(events), std::move(x));
    const FitPredictFn half = [](const Dataset&, const Eigen::MatrixXd& test_x,
                                 std::uint64_t) {
        return Eigen::VectorXd::Constant(test_x.rows(), 0.5).eval();
    };
    REQUIRE_THROWS_AS(stratified_cv_brier(data, 2.0, half, 5, 1, 3), DegenerateFoldError);
}

TEST_CASE("benchmark grid validation") {
    BenchmarkConfig cfg = tiny_benchmark();
    REQUIRE_THROWS_AS(benchmark_grid({}, cfg), InvalidParameterError);
    cfg.replications = -1;
    const std::vector<std::pair<std::string, MethodFactory>> methods = {
        {"cox", make_cox_method()}};
    REQUIRE_THROWS_AS(benchmark_grid(methods, cfg), InvalidParameterError);
    cfg.replications = 0;
    REQUIRE(benchmark_grid(methods, cfg).empty());
}

TEST_CASE("benchmark grid is reproducible") {
    BenchmarkConfig cfg = tiny_benchmark();
    SurvivalForestConfig forest_cfg;
    forest_cfg.n_trees = 5;
    const std::vector<std::pair<std::string, MethodFactory>> methods = {
        {"rsf", make_rsf_method(forest_cfg)}, {"cox", make_cox_method()}};

    const std::vector<BenchmarkRow> first = benchmark_grid(methods, cfg);
    const std::vector<BenchmarkRow> second = benchmark_grid(methods, cfg);
    REQUIRE(first.size() == 4);
    REQUIRE(second.size() == first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        REQUIRE(rows_match(first[i], second[i]));
        REQUIRE(first[i].status == "ok");
        REQUIRE(std::isfinite(first[i].mse));
        REQUIRE(first[i].mse >= 0.0);
    }

    BenchmarkConfig other_seed = cfg;
    other_seed.seed = 8;
    const std::vector<BenchmarkRow> third = benchmark_grid(methods, other_seed);
    bool any_differs = false;
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i].mse != third[i].mse) {
            any_differs = true;
        }
    }
    REQUIRE(any_differs);
}

TEST_CASE("benchmark cells do not depend on the rest of the grid") {
    SurvivalForestConfig forest_cfg;
    forest_cfg.n_trees = 5;
    const std::vector<std::pair<std::string, MethodFactory>> methods = {
        {"rsf", make_rsf_method(forest_cfg)}};

    BenchmarkConfig wide = tiny_benchmark();
    wide.ns = {40, 60};
    wide.replications = 1;
    const std::vector<BenchmarkRow> wide_rows = benchmark_grid(methods, wide);

    BenchmarkConfig narrow = wide;
    narrow.ns = {60};
    const std::vector<BenchmarkRow> narrow_rows = benchmark_grid(methods, narrow);

    std::vector<BenchmarkRow> wide_60;
    for (const auto& row : wide_rows) {
        if (row.n == 60) {
            wide_60.push_back(row);
        }
    }
    REQUIRE(wide_60.size() == narrow_rows.size());
    for (std::size_t i = 0; i < narrow_rows.size(); ++i) {
        REQUIRE(rows_match(wide_60[i], narrow_rows[i]));
    }
}

TEST_CASE("benchmark grid runs both network variants") {
    CudlSpec base;
    base.eta_grid = {0.01};
    base.network.epochs = 8;
    base.forest.n_trees = 10;

    BenchmarkConfig cfg = tiny_benchmark();
    cfg.ns = {80};
    cfg.replications = 1;
    const auto methods = method_registry({"cudl-dr", "cudl-bj"}, base);
    REQUIRE(methods.size() == 2);
    REQUIRE(methods[0].first == "cudl-dr");
    REQUIRE(methods[1].first == "cudl-bj");

    const std::vector<BenchmarkRow> rows = benchmark_grid(methods, cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        INFO(row.method << ": " << row.status);
        REQUIRE(row.status == "ok");
        REQUIRE(std::isfinite(row.mse));
        REQUIRE(row.mse >= 0.0);
        REQUIRE(row.mse <= 1.0);
        REQUIRE(row.target == "brier:0.7");
    }
}

TEST_CASE("a failing method yields a status row without stopping the grid") {
    const MethodFactory boom_factory = [](const TargetSpec&) -> FitPredictFn {
        return [](const Dataset&, const Eigen::MatrixXd&, std::uint64_t) -> Eigen::VectorXd {
            throw InvalidParameterError("bad,news\nhere");
        };
    };
    const std::vector<std::pair<std::string, MethodFactory>> methods = {
        {"boom", boom_factory}, {"cox", make_cox_method()}};

    BenchmarkConfig cfg = tiny_benchmark();
    cfg.replications = 1;
    const std::vector<BenchmarkRow> rows = benchmark_grid(methods, cfg);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].method == "boom");
    REQUIRE(rows[0].status == "bad;news;here");
    REQUIRE(std::isnan(rows[0].mse));
    REQUIRE(rows[1].method == "cox");
    REQUIRE(rows[1].status == "ok");
    REQUIRE(std::isfinite(rows[1].mse));

    REQUIRE(detail::sanitize_status("a,b\nc\rd") == "a;b;c;d");
}

TEST_CASE("unset target values resolve to marginal quantiles") {
    BenchmarkConfig cfg = tiny_benchmark();
    cfg.targets = {auto_target(TargetType::brier)};
    cfg.ns = {50};
    cfg.replications = 1;
    cfg.test_n = 20;
    cfg.quantile_mc = 20000;

    std::size_t cells_seen = 0;
    const auto on_cell = [&](int setting, const TargetSpec& target, std::size_t n,
                             const std::vector<BenchmarkRow>& cell_rows) {
        ++cells_seen;
        REQUIRE(setting == 1);
        REQUIRE(n == 50);
        REQUIRE(target.type == TargetType::brier);
        REQUIRE(target.value == Catch::Approx(0.67).margin(0.05));
        REQUIRE(cell_rows.size() == 1);
    };
    const auto rows =
        benchmark_grid({{"cox", make_cox_method()}}, cfg, on_cell);
    REQUIRE(cells_seen == 1);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].target.rfind("brier:", 0) == 0);
    const double resolved = std::stod(rows[0].target.substr(6));
    REQUIRE(resolved == Catch::Approx(0.67).margin(0.05));
}

TEST_CASE("benchmark summaries report per-cell quartiles") {
    const auto make_row = [](std::string method, double mse, std::string status) {
        BenchmarkRow row;
        row.setting = 1;
        row.method = std::move(method);
        row.target = "brier:0.5";
        row.n = 100;
        row.mse = mse;
        row.status = std::move(status);
        return row;
    };
    std::vector<BenchmarkRow> rows;
    for (double mse : {1.0, 2.0, 3.0, 4.0}) {
        rows.push_back(make_row("a", mse, "ok"));
    }
    rows.push_back(make_row("a", 1000.0, "separation"));
    rows.push_back(make_row("b", 7.0, "ok"));
    rows.push_back(make_row("c", std::numeric_limits<double>::quiet_NaN(), "diverged"));

    const std::vector<PlotRow> summary = summarize_benchmark(rows);
    REQUIRE(summary.size() == 6);
    REQUIRE(summary[0].method == "a");
    REQUIRE(summary[0].statistic == "q1");
    REQUIRE(summary[0].value == Catch::Approx(1.75).epsilon(1e-12));
    REQUIRE(summary[1].statistic == "median");
    REQUIRE(summary[1].value == Catch::Approx(2.5).epsilon(1e-12));
    REQUIRE(summary[2].statistic == "q3");
    REQUIRE(summary[2].value == Catch::Approx(3.25).epsilon(1e-12));
    for (std::size_t i = 3; i < 6; ++i) {
        REQUIRE(summary[i].method == "b");
        REQUIRE(summary[i].value == 7.0);
    }
    REQUIRE(summarize_benchmark({}).empty());
}

TEST_CASE("method registry resolves known names") {
    const auto methods = method_registry({"cox", "rsf"});
    REQUIRE(methods.size() == 2);
    REQUIRE(methods[0].first == "cox");
    REQUIRE(methods[1].first == "rsf");
    REQUIRE_THROWS_AS(method_registry({"oracle"}), InvalidParameterError);
}
