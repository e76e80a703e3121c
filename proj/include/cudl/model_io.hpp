#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cudl/cox.hpp"
#include "cudl/curves.hpp"
#include "cudl/errors.hpp"
#include "cudl/network.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/survival_forest.hpp"

namespace cudl {

namespace detail {

inline std::vector<double> to_std_vector(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd to_eigen_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::string target_type_name(TargetType type) {
    return type == TargetType::brier ? "brier" : "rms";
}

inline TargetType target_type_from(const std::string& name) {
    if (name == "brier") {
        return TargetType::brier;
    }
    if (name == "rms") {
        return TargetType::rms;
    }
    throw InvalidParameterError("unknown target type '" + name + "' in model file");
}

inline nlohmann::json target_to_json(const TargetSpec& target) {
    return {{"type", target_type_name(target.type)}, {"value", target.value}};
}

inline TargetSpec target_from_json(const nlohmann::json& j) {
    TargetSpec target;
    target.type = target_type_from(j.at("type").get<std::string>());
    target.value = j.at("value").get<double>();
    return target;
}

}  // namespace detail

inline nlohmann::json cudl_model_to_json(const CudlModel& model) {
    nlohmann::json j;
    j["model"] = "cudl";
    j["variant"] = model.variant == Variant::doubly_robust ? "dr" : "bj";
    j["target"] = detail::target_to_json(model.target);
    j["eta"] = model.chosen_eta;
    j["seed"] = model.seed;
    j["head"] = model.head == Head::sigmoid ? "sigmoid" : "relu";
    j["standardizer"] = {{"center", detail::to_std_vector(model.standardizer.center)},
                         {"scale", detail::to_std_vector(model.standardizer.scale)}};
    Eigen::VectorXd flat = model.weights.flatten();
    j["weights"] = {{"p", model.weights.w1.rows()},
                    {"d1", model.weights.w1.cols()},
                    {"values", detail::to_std_vector(flat)}};
    return j;
}

inline CudlModel cudl_model_from_json(const nlohmann::json& j) {
    CudlModel model;
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "dr") {
        model.variant = Variant::doubly_robust;
    } else if (variant == "bj") {
        model.variant = Variant::buckley_james;
    } else {
        throw InvalidParameterError("unknown variant '" + variant + "' in model file");
    }
    model.target = detail::target_from_json(j.at("target"));
    model.chosen_eta = j.at("eta").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    const std::string head = j.at("head").get<std::string>();
    if (head == "sigmoid") {
        model.head = Head::sigmoid;
    } else if (head == "relu") {
        model.head = Head::relu;
    } else {
        throw InvalidParameterError("unknown head '" + head + "' in model file");
    }
    model.standardizer.center =
        detail::to_eigen_vector(j.at("standardizer").at("center").get<std::vector<double>>());
    model.standardizer.scale =
        detail::to_eigen_vector(j.at("standardizer").at("scale").get<std::vector<double>>());
    const auto& jw = j.at("weights");
    const auto p = jw.at("p").get<Eigen::Index>();
    const auto d1 = jw.at("d1").get<Eigen::Index>();
    const Eigen::VectorXd flat =
        detail::to_eigen_vector(jw.at("values").get<std::vector<double>>());
    model.weights =
        NetworkWeights::unflatten(flat, static_cast<int>(p), static_cast<int>(d1));
    if (model.standardizer.center.size() != p || model.standardizer.scale.size() != p) {
        throw InvalidParameterError("standardizer length does not match p");
    }
    return model;
}

inline nlohmann::json cox_model_to_json(const CoxModel& model, const TargetSpec& target) {
    nlohmann::json j;
    j["model"] = "cox";
    j["target"] = detail::target_to_json(target);
    j["coefficients"] = detail::to_std_vector(model.coefficients);
    j["center"] = detail::to_std_vector(model.center);
    j["baseline_times"] = model.baseline_times;
    j["baseline_cumhaz"] = model.baseline_cumhaz;
    return j;
}

inline CoxModel cox_model_from_json(const nlohmann::json& j) {
    CoxModel model;
    model.coefficients = detail::to_eigen_vector(j.at("coefficients").get<std::vector<double>>());
    model.center = detail::to_eigen_vector(j.at("center").get<std::vector<double>>());
    model.baseline_times = j.at("baseline_times").get<std::vector<double>>();
    model.baseline_cumhaz = j.at("baseline_cumhaz").get<std::vector<double>>();
    if (model.center.size() != model.coefficients.size()) {
        throw InvalidParameterError("coefficient and center lengths differ in model file");
    }
    if (model.baseline_times.size() != model.baseline_cumhaz.size()) {
        throw InvalidParameterError("baseline arrays differ in length in model file");
    }
    return model;
}

inline nlohmann::json forest_to_json(const SurvivalForest& forest, const TargetSpec& target) {
    nlohmann::json j;
    j["model"] = "rsf";
    j["target"] = detail::target_to_json(target);
    j["p"] = forest.p();
    nlohmann::json trees = nlohmann::json::array();
    for (const ForestTree& tree : forest.trees()) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const ForestNode& nd : tree.nodes) {
            nodes.push_back({nd.covariate, nd.threshold, nd.left, nd.right, nd.leaf});
        }
        nlohmann::json leaves = nlohmann::json::array();
        for (const ForestLeaf& leaf : tree.leaves) {
            leaves.push_back({{"times", leaf.times}, {"dh", leaf.dh}});
        }
        trees.push_back({{"nodes", std::move(nodes)}, {"leaves", std::move(leaves)}});
    }
    j["trees"] = std::move(trees);
    return j;
}

inline SurvivalForest forest_from_json(const nlohmann::json& j) {
    const auto p = j.at("p").get<std::size_t>();
    std::vector<ForestTree> trees;
    for (const auto& jt : j.at("trees")) {
        ForestTree tree;
        for (const auto& jn : jt.at("nodes")) {
            ForestNode nd;
            nd.covariate = jn.at(0).get<int>();
            nd.threshold = jn.at(1).get<double>();
            nd.left = jn.at(2).get<int>();
            nd.right = jn.at(3).get<int>();
            nd.leaf = jn.at(4).get<int>();
            tree.nodes.push_back(nd);
        }
        for (const auto& jl : jt.at("leaves")) {
            ForestLeaf leaf;
            leaf.times = jl.at("times").get<std::vector<double>>();
            leaf.dh = jl.at("dh").get<std::vector<double>>();
            tree.leaves.push_back(std::move(leaf));
        }
        trees.push_back(std::move(tree));
    }
    return SurvivalForest(std::move(trees), p);
}

/// A deserialized model of any kind, ready to predict on raw covariates.
struct LoadedModel {
    std::string kind;
    TargetSpec target;
    CudlModel cudl;
    CoxModel cox;
    std::shared_ptr<SurvivalForest> forest;

    Eigen::VectorXd predict_batch(const Eigen::MatrixXd& raw) const {
        if (kind == "cudl") {
            return cudl.predict_batch(raw);
        }
        Eigen::VectorXd out(raw.rows());
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const Eigen::VectorXd w = raw.row(i);
            if (kind == "cox") {
                out[i] = target.type == TargetType::brier
                             ? cox_predict_survival(cox, w, target.value)
                             : cox_predict_rms(cox, w, target.value);
            } else {
                const CurvePtr curve = forest->curve_at(w);
                out[i] = target.type == TargetType::brier
                             ? curve->eval(target.value)
                             : restricted_mean_from_curve(*curve, target.value);
            }
        }
        return out;
    }

    std::size_t p() const {
        if (kind == "cudl") {
            return static_cast<std::size_t>(cudl.weights.w1.rows());
        }
        if (kind == "cox") {
            return static_cast<std::size_t>(cox.coefficients.size());
        }
        return forest->p();
    }
};

inline LoadedModel load_model_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw InvalidParameterError(std::string("model file is not valid JSON: ") + e.what());
    }
    LoadedModel out;
    try {
        out.kind = j.at("model").get<std::string>();
        if (out.kind == "cudl") {
            out.cudl = cudl_model_from_json(j);
            out.target = out.cudl.target;
        } else if (out.kind == "cox") {
            out.cox = cox_model_from_json(j);
            out.target = detail::target_from_json(j.at("target"));
        } else if (out.kind == "rsf") {
            out.forest = std::make_shared<SurvivalForest>(forest_from_json(j));
            out.target = detail::target_from_json(j.at("target"));
        } else {
            throw InvalidParameterError("unknown model kind '" + out.kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameterError(std::string("model file is malformed: ") + e.what());
    }
    return out;
}

inline std::string model_json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace cudl
