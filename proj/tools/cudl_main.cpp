#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cudl/cudl.hpp"

namespace {

/// Flag-level problems detected after CLI11 parsing, e.g. a malformed
/// target string or a missing seed.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int error_exit_code(const cudl::Error& e) {
    if (dynamic_cast<const cudl::PositivityError*>(&e) != nullptr ||
        dynamic_cast<const cudl::DivergenceError*>(&e) != nullptr ||
        dynamic_cast<const cudl::ConvergenceError*>(&e) != nullptr ||
        dynamic_cast<const cudl::SeparationError*>(&e) != nullptr ||
        dynamic_cast<const cudl::DegenerateConditioningError*>(&e) != nullptr ||
        dynamic_cast<const cudl::DegenerateFoldError*>(&e) != nullptr ||
        dynamic_cast<const cudl::InvalidPredictionError*>(&e) != nullptr) {
        return 4;
    }
    return 3;
}

cudl::TargetSpec target_from_flag(const std::string& text) {
    try {
        return cudl::parse_target(text);
    } catch (const cudl::Error& e) {
        throw UsageError(std::string("--target: ") + e.what());
    }
}

cudl::TomlTable load_config(const std::string& path) {
    if (path.empty()) {
        return {};
    }
    return cudl::parse_toml(cudl::read_text_file(path));
}

std::vector<std::string> default_covariate_names(std::size_t p) {
    std::vector<std::string> names;
    names.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        names.push_back("w" + std::to_string(j + 1));
    }
    return names;
}

struct SimulateOpts {
    int setting = 1;
    std::size_t n = 0;
    int p = 30;
    std::uint64_t seed = 0;
    std::string out;
    double t = 0.0;
    double tau = 0.0;
    bool has_t = false;
    bool has_tau = false;
};

void run_simulate(const SimulateOpts& opt) {
    cudl::SettingConfig cfg;
    cfg.setting = opt.setting;
    cfg.n = opt.n;
    cfg.p = opt.p;
    cfg.seed = opt.seed;
    const cudl::Dataset data = cudl::simulate(cfg);
    std::vector<std::pair<std::string, std::vector<double>>> extras;
    if (opt.has_t) {
        std::vector<double> truth(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) {
            const Eigen::VectorXd w = data.covariates().row(static_cast<Eigen::Index>(i));
            truth[i] = cudl::true_survival(opt.setting, w, opt.t);
        }
        extras.emplace_back("true_surv_t", std::move(truth));
    }
    if (opt.has_tau) {
        std::vector<double> truth(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) {
            const Eigen::VectorXd w = data.covariates().row(static_cast<Eigen::Index>(i));
            truth[i] = cudl::true_rms(opt.setting, w, opt.tau);
        }
        extras.emplace_back("true_rms_tau", std::move(truth));
    }
    cudl::write_text_file(
        opt.out, cudl::dataset_to_csv(data, default_covariate_names(data.p()), extras));
}

struct TransformOpts {
    std::string in;
    std::string variant = "dr";
    std::string target;
    std::uint64_t seed = 0;
    std::string out;
};

void run_transform(const TransformOpts& opt) {
    const cudl::TargetSpec target = target_from_flag(opt.target);
    const cudl::LoadedDataset loaded = cudl::read_dataset_csv(opt.in);
    cudl::validate_target_within_range(loaded.data, target);

    cudl::CudlSpec spec;
    spec.variant =
        opt.variant == "dr" ? cudl::Variant::doubly_robust : cudl::Variant::buckley_james;
    spec.target = target;
    spec.seed = opt.seed;

    const cudl::Dataset restricted = cudl::restrict_dataset(loaded.data, target.value);
    const cudl::Standardizer standardizer = cudl::fit_standardizer(loaded.data.covariates());
    const auto nuisances = cudl::detail::fit_nuisances(
        restricted, spec, cudl::derive_seed(spec.seed, {cudl::detail::kSeedForest}));
    const cudl::TransformedData trans = cudl::transform_dataset(
        restricted, *nuisances.g, *nuisances.s, target.outcome(), standardizer);

    std::string out;
    std::vector<std::string> header = {"d"};
    header.insert(header.end(), loaded.covariate_names.begin(), loaded.covariate_names.end());
    out += cudl::csv_line(header);
    for (Eigen::Index i = 0; i < trans.d.size(); ++i) {
        std::vector<std::string> cells = {cudl::format_double(trans.d[i])};
        for (Eigen::Index j = 0; j < trans.x.cols(); ++j) {
            cells.push_back(cudl::format_double(trans.x(i, j)));
        }
        out += cudl::csv_line(cells);
    }
    cudl::write_text_file(opt.out, out);
}

struct FitOpts {
    std::string in;
    std::string method = "cudl-dr";
    std::string target;
    std::string config;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::string out;
};

void run_fit(const FitOpts& opt) {
    const cudl::TargetSpec target = target_from_flag(opt.target);
    if (!opt.has_seed && opt.method != "cox") {
        throw UsageError("--seed is required for method '" + opt.method + "'");
    }
    const cudl::TomlTable table = load_config(opt.config);
    const cudl::LoadedDataset loaded = cudl::read_dataset_csv(opt.in);
    cudl::validate_target_within_range(loaded.data, target);

    nlohmann::json j;
    if (opt.method == "cudl-dr" || opt.method == "cudl-bj") {
        cudl::CudlSpec spec;
        cudl::apply_cudl_config(table, spec);
        spec.variant = opt.method == "cudl-dr" ? cudl::Variant::doubly_robust
                                               : cudl::Variant::buckley_james;
        spec.target = target;
        spec.seed = opt.seed;
        const cudl::CudlModel model = cudl::cudl_fit(loaded.data, spec);
        j = cudl::cudl_model_to_json(model);
    } else if (opt.method == "cox") {
        const cudl::CoxModel model = cudl::cox_fit(loaded.data);
        j = cudl::cox_model_to_json(model, target);
    } else {
        cudl::SurvivalForestConfig cfg;
        cudl::apply_forest_config(table, cfg);
        const cudl::SurvivalForest forest = cudl::forest_fit(loaded.data, cfg, opt.seed);
        j = cudl::forest_to_json(forest, target);
    }
    cudl::write_text_file(opt.out, cudl::model_json_text(j));
}

struct PredictOpts {
    std::string model;
    std::string in;
    std::string out;
};

void run_predict(const PredictOpts& opt) {
    const cudl::LoadedModel model = cudl::load_model_json(cudl::read_text_file(opt.model));
    const cudl::LoadedMatrix cov = cudl::read_covariates_csv(opt.in);
    if (static_cast<std::size_t>(cov.values.cols()) != model.p()) {
        throw cudl::DimensionMismatchError(
            "model expects " + std::to_string(model.p()) + " covariates, input has " +
            std::to_string(cov.values.cols()));
    }
    const Eigen::VectorXd predictions = model.predict_batch(cov.values);
    if (model.target.type == cudl::TargetType::rms) {
        const std::size_t over = cudl::count_above_cap(predictions, model.target.value);
        if (over > 0) {
            std::cerr << "warning: " << over << " predictions exceed the horizon tau="
                      << cudl::format_double(model.target.value) << "\n";
        }
    }
    std::string out = "prediction\n";
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        out += cudl::format_double(predictions[i]);
        out += "\n";
    }
    cudl::write_text_file(opt.out, out);
}

struct EvaluateMseOpts {
    std::string pred;
    std::string in;
    std::string truth_column = "true_surv_t";
};

void run_evaluate_mse(const EvaluateMseOpts& opt) {
    const cudl::CsvTable preds = cudl::read_csv_file(opt.pred);
    std::size_t pred_col = preds.header.size();
    for (std::size_t j = 0; j < preds.header.size(); ++j) {
        if (preds.header[j] == "prediction") {
            pred_col = j;
            break;
        }
    }
    if (pred_col == preds.header.size()) {
        throw cudl::InvalidParameterError("predictions file has no 'prediction' column");
    }
    Eigen::VectorXd predictions(static_cast<Eigen::Index>(preds.rows.size()));
    for (std::size_t i = 0; i < preds.rows.size(); ++i) {
        predictions[static_cast<Eigen::Index>(i)] = preds.rows[i][pred_col];
    }
    const cudl::LoadedDataset loaded = cudl::read_dataset_csv(opt.in);
    const auto it = loaded.extras.find(opt.truth_column);
    if (it == loaded.extras.end()) {
        throw cudl::InvalidParameterError("data file has no '" + opt.truth_column +
                                          "' column");
    }
    Eigen::VectorXd truth(static_cast<Eigen::Index>(it->second.size()));
    for (std::size_t i = 0; i < it->second.size(); ++i) {
        truth[static_cast<Eigen::Index>(i)] = it->second[i];
    }
    std::cout << "mse=" << cudl::format_double(cudl::mse_vs_truth(predictions, truth)) << "\n";
}

struct EvaluateBrierOpts {
    std::string in;
    double t = 0.0;
    std::string method = "cudl-dr";
    std::string config;
    int folds = 5;
    int splits = 10;
    std::uint64_t seed = 0;
    std::string out;
};

void run_evaluate_brier(const EvaluateBrierOpts& opt) {
    const cudl::TomlTable table = load_config(opt.config);
    cudl::CudlSpec base;
    cudl::apply_cudl_config(table, base);
    cudl::SurvivalForestConfig rsf_cfg;
    cudl::apply_forest_config(table, rsf_cfg);
    const auto methods = cudl::method_registry({opt.method}, base, rsf_cfg);
    cudl::TargetSpec target;
    target.type = cudl::TargetType::brier;
    target.value = opt.t;
    target.validate();
    const cudl::FitPredictFn fit = methods.front().second(target);

    const cudl::LoadedDataset loaded = cudl::read_dataset_csv(opt.in);
    const cudl::BrierCvResult result = cudl::stratified_cv_brier(
        loaded.data, opt.t, fit, opt.folds, opt.splits, opt.seed, base.tree);
    if (!opt.out.empty()) {
        std::string text = "split,brier\n";
        for (std::size_t s = 0; s < result.split_scores.size(); ++s) {
            text += std::to_string(s) + "," + cudl::format_double(result.split_scores[s]) + "\n";
        }
        cudl::write_text_file(opt.out, text);
    }
    std::cout << "median=" << cudl::format_double(result.median) << "\n";
}

struct BenchmarkOpts {
    std::string grid;
    std::string out;
    std::uint64_t seed = 0;
    int jobs = 1;
};

std::string benchmark_row_csv(const cudl::BenchmarkRow& row) {
    return cudl::csv_line({std::to_string(row.setting), row.method, row.target,
                           std::to_string(row.n), std::to_string(row.replication),
                           std::isnan(row.mse) ? "" : cudl::format_double(row.mse),
                           row.status});
}

void run_benchmark(const BenchmarkOpts& opt) {
    const cudl::TomlTable table = load_config(opt.grid);
    cudl::BenchmarkGrid grid = cudl::parse_benchmark_grid(table);
    grid.config.seed = opt.seed;
    grid.config.jobs = opt.jobs;
    cudl::CudlSpec base;
    cudl::apply_cudl_config(table, base);
    cudl::SurvivalForestConfig rsf_cfg;
    cudl::apply_forest_config(table, rsf_cfg);
    const auto methods = cudl::method_registry(grid.methods, base, rsf_cfg);

    std::ofstream out(opt.out);
    if (!out) {
        throw cudl::InvalidParameterError("cannot open '" + opt.out + "' for writing");
    }
    out << "setting,method,target,n,replication,mse,status\n";
    out.flush();
    cudl::benchmark_grid(
        methods, grid.config,
        [&](int setting, const cudl::TargetSpec& target, std::size_t n,
            const std::vector<cudl::BenchmarkRow>& rows) {
            std::size_t failures = 0;
            for (const auto& row : rows) {
                out << benchmark_row_csv(row);
                if (row.status != "ok") {
                    ++failures;
                }
            }
            out.flush();
            std::cerr << "cell=" << setting << "/" << cudl::target_label(target) << "/n="
                      << n << ", status="
                      << (failures == 0 ? std::string("ok")
                                        : "failed=" + std::to_string(failures))
                      << "\n";
        });
}

struct PlotdataOpts {
    std::string in;
    std::string out;
};

void run_plotdata(const PlotdataOpts& opt) {
    const std::string text = cudl::read_text_file(opt.in);
    std::istringstream stream(text);
    std::string line;
    if (!std::getline(stream, line)) {
        throw cudl::CsvParseError("empty results file", 0);
    }
    const std::vector<std::string> header = cudl::detail::split_csv_line(line);
    const std::vector<std::string> expected = {"setting", "method",      "target", "n",
                                               "replication", "mse", "status"};
    if (header != expected) {
        throw cudl::CsvParseError("results file has an unexpected header", 0);
    }
    std::vector<cudl::BenchmarkRow> rows;
    long row_no = 0;
    while (std::getline(stream, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        ++row_no;
        const std::vector<std::string> cells = cudl::detail::split_csv_line(line);
        if (cells.size() != expected.size()) {
            throw cudl::CsvParseError("wrong cell count", row_no);
        }
        cudl::BenchmarkRow row;
        row.setting = static_cast<int>(cudl::detail::parse_cell(cells[0], row_no));
        row.method = cells[1];
        row.target = cells[2];
        row.n = static_cast<std::size_t>(cudl::detail::parse_cell(cells[3], row_no));
        row.replication = static_cast<int>(cudl::detail::parse_cell(cells[4], row_no));
        row.mse = cells[5].empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : cudl::detail::parse_cell(cells[5], row_no);
        row.status = cells[6];
        rows.push_back(std::move(row));
    }
    std::string out = "setting,method,target,n,statistic,value\n";
    for (const cudl::PlotRow& pr : cudl::summarize_benchmark(rows)) {
        out += cudl::csv_line({std::to_string(pr.setting), pr.method, pr.target,
                               std::to_string(pr.n), pr.statistic,
                               cudl::format_double(pr.value)});
    }
    cudl::write_text_file(opt.out, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Censoring-unbiased deep learning for right-censored outcomes"};
    app.require_subcommand(1);

    SimulateOpts sim;
    auto* c_sim = app.add_subcommand("simulate", "Draw a synthetic survival dataset");
    c_sim->add_option("--setting", sim.setting, "Scenario (1 or 2)")
        ->required()
        ->check(CLI::Range(1, 2));
    c_sim->add_option("--n", sim.n, "Number of rows")->required()->check(CLI::PositiveNumber);
    c_sim->add_option("--p", sim.p, "Number of covariates")->check(CLI::PositiveNumber);
    c_sim->add_option("--seed", sim.seed, "RNG seed")->required();
    c_sim->add_option("--out", sim.out, "Output CSV path")->required();
    auto* opt_t = c_sim->add_option("--t", sim.t, "Add true_surv_t column for this time");
    auto* opt_tau = c_sim->add_option("--tau", sim.tau, "Add true_rms_tau column for this horizon");
    c_sim->callback([&] {
        sim.has_t = opt_t->count() > 0;
        sim.has_tau = opt_tau->count() > 0;
        run_simulate(sim);
    });

    TransformOpts tr;
    auto* c_tr = app.add_subcommand("transform", "Emit pseudo-responses for a dataset");
    c_tr->add_option("--in", tr.in, "Input dataset CSV")->required();
    c_tr->add_option("--variant", tr.variant, "dr or bj")
        ->check(CLI::IsMember({"dr", "bj"}));
    c_tr->add_option("--target", tr.target, "brier:T or rms:TAU")->required();
    c_tr->add_option("--seed", tr.seed, "RNG seed")->required();
    c_tr->add_option("--out", tr.out, "Output CSV path")->required();
    c_tr->callback([&] { run_transform(tr); });

    FitOpts fit;
    auto* c_fit = app.add_subcommand("fit", "Fit a model");
    c_fit->add_option("--in", fit.in, "Input dataset CSV")->required();
    c_fit->add_option("--method", fit.method, "cudl-dr, cudl-bj, cox or rsf")
        ->required()
        ->check(CLI::IsMember({"cudl-dr", "cudl-bj", "cox", "rsf"}));
    c_fit->add_option("--target", fit.target, "brier:T or rms:TAU")->required();
    c_fit->add_option("--config", fit.config, "TOML config path");
    auto* fit_seed = c_fit->add_option("--seed", fit.seed, "RNG seed");
    c_fit->add_option("--out", fit.out, "Output model JSON path")->required();
    c_fit->callback([&] {
        fit.has_seed = fit_seed->count() > 0;
        run_fit(fit);
    });

    PredictOpts pred;
    auto* c_pred = app.add_subcommand("predict", "Predict with a fitted model");
    c_pred->add_option("--model", pred.model, "Model JSON path")->required();
    c_pred->add_option("--in", pred.in, "Covariates CSV")->required();
    c_pred->add_option("--out", pred.out, "Output CSV path")->required();
    c_pred->callback([&] { run_predict(pred); });

    auto* c_eval = app.add_subcommand("evaluate", "Score predictions or methods");
    c_eval->require_subcommand(1);

    EvaluateMseOpts emse;
    auto* c_mse = c_eval->add_subcommand("mse", "Mean squared error against truth columns");
    c_mse->add_option("--pred", emse.pred, "Predictions CSV")->required();
    c_mse->add_option("--in", emse.in, "Dataset CSV with truth columns")->required();
    c_mse->add_option("--truth-column", emse.truth_column, "Truth column name");
    c_mse->callback([&] { run_evaluate_mse(emse); });

    EvaluateBrierOpts ebr;
    auto* c_brier = c_eval->add_subcommand("brier-cv", "Cross-validated censored Brier score");
    c_brier->add_option("--in", ebr.in, "Input dataset CSV")->required();
    c_brier->add_option("--t", ebr.t, "Evaluation time")->required();
    c_brier->add_option("--method", ebr.method, "cudl-dr, cudl-bj, cox or rsf")
        ->required()
        ->check(CLI::IsMember({"cudl-dr", "cudl-bj", "cox", "rsf"}));
    c_brier->add_option("--config", ebr.config, "TOML config path");
    c_brier->add_option("--folds", ebr.folds, "Folds per split")->check(CLI::Range(2, 100));
    c_brier->add_option("--splits", ebr.splits, "Number of splits")->check(CLI::PositiveNumber);
    c_brier->add_option("--seed", ebr.seed, "RNG seed")->required();
    c_brier->add_option("--out", ebr.out, "Optional per-split scores CSV");
    c_brier->callback([&] { run_evaluate_brier(ebr); });

    BenchmarkOpts bench;
    auto* c_bench = app.add_subcommand("benchmark", "Run a simulation study grid");
    c_bench->add_option("--grid", bench.grid, "Grid TOML path")->required();
    c_bench->add_option("--out", bench.out, "Results CSV path")->required();
    c_bench->add_option("--seed", bench.seed, "RNG seed")->required();
    c_bench->add_option("--jobs", bench.jobs, "Concurrent replications")
        ->check(CLI::PositiveNumber);
    c_bench->callback([&] { run_benchmark(bench); });

    PlotdataOpts plot;
    auto* c_plot = app.add_subcommand("plotdata", "Quartile summaries of benchmark results");
    c_plot->add_option("--in", plot.in, "Results CSV path")->required();
    c_plot->add_option("--out", plot.out, "Output CSV path")->required();
    c_plot->callback([&] { run_plotdata(plot); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cudl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error_exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
