#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cudl/cox.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/model_io.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/simulation.hpp"
#include "cudl/survival_forest.hpp"

using namespace cudl;

namespace {

Dataset training_data(std::size_t n, std::uint64_t seed) {
    SettingConfig cfg;
    cfg.setting = 1;
    cfg.n = n;
    cfg.p = 15;
    cfg.seed = seed;
    return simulate(cfg);
}

Eigen::MatrixXd probe_rows(std::size_t n, std::uint64_t seed) {
    return training_data(n, seed).covariates();
}

void require_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    REQUIRE(a.size() == b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        REQUIRE(a[i] == b[i]);
    }
}

}  // namespace

TEST_CASE("cudl models survive a json round trip") {
    const Dataset data = training_data(80, 21);
    CudlSpec spec;
    spec.target = parse_target("brier:0.6");
    spec.eta_grid = {0.01};
    spec.network.epochs = 8;
    spec.forest.n_trees = 10;
    spec.seed = 4;
    const CudlModel model = cudl_fit(data, spec);

    const std::string text = model_json_text(cudl_model_to_json(model));
    const LoadedModel loaded = load_model_json(text);
    REQUIRE(loaded.kind == "cudl");
    REQUIRE(loaded.target.type == TargetType::brier);
    REQUIRE(loaded.target.value == 0.6);
    REQUIRE(loaded.cudl.variant == model.variant);
    REQUIRE(loaded.cudl.chosen_eta == model.chosen_eta);
    REQUIRE(loaded.cudl.seed == model.seed);
    REQUIRE(loaded.cudl.head == model.head);
    REQUIRE(loaded.p() == 15);

    const Eigen::MatrixXd probes = probe_rows(12, 99);
    require_equal(loaded.predict_batch(probes), model.predict_batch(probes));
}

TEST_CASE("cox models survive a json round trip") {
    const Dataset data = training_data(150, 22);
    const CoxModel model = cox_fit(data);
    const TargetSpec target = parse_target("rms:1.5");

    const std::string text = model_json_text(cox_model_to_json(model, target));
    const LoadedModel loaded = load_model_json(text);
    REQUIRE(loaded.kind == "cox");
    REQUIRE(loaded.target.type == TargetType::rms);
    REQUIRE(loaded.target.value == 1.5);
    REQUIRE(loaded.p() == 15);
    require_equal(loaded.cox.coefficients, model.coefficients);
    require_equal(loaded.cox.center, model.center);
    REQUIRE(loaded.cox.baseline_times == model.baseline_times);
    REQUIRE(loaded.cox.baseline_cumhaz == model.baseline_cumhaz);

    const Eigen::MatrixXd probes = probe_rows(10, 98);
    Eigen::VectorXd direct(probes.rows());
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        direct[i] = cox_predict_rms(model, probes.row(i), target.value);
    }
    require_equal(loaded.predict_batch(probes), direct);
}

TEST_CASE("forests survive a json round trip") {
    const Dataset data = training_data(120, 23);
    SurvivalForestConfig cfg;
    cfg.n_trees = 5;
    const SurvivalForest forest = forest_fit(data, cfg, 31);
    const TargetSpec target = parse_target("brier:0.8");

    const std::string text = model_json_text(forest_to_json(forest, target));
    const LoadedModel loaded = load_model_json(text);
    REQUIRE(loaded.kind == "rsf");
    REQUIRE(loaded.p() == 15);
    REQUIRE(loaded.forest->trees().size() == 5);

    const Eigen::MatrixXd probes = probe_rows(10, 97);
    Eigen::VectorXd direct(probes.rows());
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        direct[i] = forest.curve_at(probes.row(i))->eval(target.value);
    }
    require_equal(loaded.predict_batch(probes), direct);
}

TEST_CASE("malformed model files are rejected") {
    REQUIRE_THROWS_AS(load_model_json("not json at all"), InvalidParameterError);
    REQUIRE_THROWS_AS(load_model_json("{\"weights\": [1, 2"), InvalidParameterError);
    REQUIRE_THROWS_AS(load_model_json("{}"), InvalidParameterError);
    REQUIRE_THROWS_AS(load_model_json("{\"model\": \"svm\"}"), InvalidParameterError);
    REQUIRE_THROWS_WITH(load_model_json("[1, 2, 3]"),
                        Catch::Matchers::ContainsSubstring("malformed"));
}

TEST_CASE("inconsistent model fields are rejected") {
    const Dataset data = training_data(80, 24);
    CudlSpec spec;
    spec.target = parse_target("brier:0.6");
    spec.eta_grid = {0.01};
    spec.network.epochs = 5;
    spec.forest.n_trees = 5;
    spec.seed = 4;
    const nlohmann::json good = cudl_model_to_json(cudl_fit(data, spec));

    SECTION("unknown variant") {
        nlohmann::json j = good;
        j["variant"] = "aft";
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
    SECTION("unknown head") {
        nlohmann::json j = good;
        j["head"] = "tanh";
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
    SECTION("unknown target type") {
        nlohmann::json j = good;
        j["target"]["type"] = "quantile";
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
    SECTION("truncated weight vector") {
        nlohmann::json j = good;
        auto values = j["weights"]["values"].get<std::vector<double>>();
        values.pop_back();
        j["weights"]["values"] = values;
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), DimensionMismatchError);
    }
    SECTION("standardizer length mismatch") {
        nlohmann::json j = good;
        auto center = j["standardizer"]["center"].get<std::vector<double>>();
        center.pop_back();
        j["standardizer"]["center"] = center;
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
    SECTION("missing weights") {
        nlohmann::json j = good;
        j.erase("weights");
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
}

TEST_CASE("inconsistent cox and forest fields are rejected") {
    const Dataset data = training_data(100, 25);
    const TargetSpec target = parse_target("brier:0.7");
    const nlohmann::json cox_good = cox_model_to_json(cox_fit(data), target);

    SECTION("coefficient and center lengths differ") {
        nlohmann::json j = cox_good;
        auto center = j["center"].get<std::vector<double>>();
        center.pop_back();
        j["center"] = center;
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
    SECTION("baseline arrays differ in length") {
        nlohmann::json j = cox_good;
        auto cumhaz = j["baseline_cumhaz"].get<std::vector<double>>();
        cumhaz.pop_back();
        j["baseline_cumhaz"] = cumhaz;
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
    SECTION("forest node with missing entries") {
        SurvivalForestConfig cfg;
        cfg.n_trees = 2;
        nlohmann::json j = forest_to_json(forest_fit(data, cfg, 31), target);
        j["trees"][0]["nodes"][0] = nlohmann::json::array({0, 1.0});
        REQUIRE_THROWS_AS(load_model_json(model_json_text(j)), InvalidParameterError);
    }
}
