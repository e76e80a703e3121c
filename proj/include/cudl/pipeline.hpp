#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "cudl/censoring_tree.hpp"
#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/network.hpp"
#include "cudl/rng.hpp"
#include "cudl/survival_forest.hpp"
#include "cudl/transforms.hpp"

namespace cudl {

enum class Variant { doubly_robust, buckley_james };

enum class TargetType { brier, rms };

/// Estimation target: survival probability at time t (brier) or restricted
/// mean up to horizon tau (rms). The target fixes the outcome transform,
/// the restriction cap and the network head.
struct TargetSpec {
    TargetType type = TargetType::brier;
    double value = 0.0;

    Outcome outcome() const {
        return type == TargetType::brier ? Outcome::at_least(value) : Outcome::identity();
    }

    Head head() const { return type == TargetType::brier ? Head::sigmoid : Head::relu; }

    void validate() const {
        if (!(value > 0.0)) {
            throw InvalidParameterError("target time must be positive");
        }
    }
};

/// Parses "brier:T" or "rms:TAU".
inline TargetSpec parse_target(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw InvalidParameterError("target must look like brier:T or rms:TAU");
    }
    const std::string kind = text.substr(0, colon);
    TargetSpec spec;
    if (kind == "brier") {
        spec.type = TargetType::brier;
    } else if (kind == "rms") {
        spec.type = TargetType::rms;
    } else {
        throw InvalidParameterError("unknown target type '" + kind + "'");
    }
    try {
        spec.value = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw InvalidParameterError("target time '" + text.substr(colon + 1) + "' is not a number");
    }
    spec.validate();
    return spec;
}

/// The restriction cap must sit strictly inside the observed time range;
/// beyond it the nuisance estimators have no support.
inline void validate_target_within_range(const Dataset& data, const TargetSpec& target) {
    target.validate();
    const double max_time = *std::max_element(data.times().begin(), data.times().end());
    if (target.value >= max_time) {
        throw InvalidParameterError("target time must lie below the largest observed time");
    }
}

struct CudlSpec {
    Variant variant = Variant::doubly_robust;
    TargetSpec target;
    std::vector<double> eta_grid = {0.0, 0.001, 0.01, 0.1};
    int cv_folds = 5;
    NetworkConfig network;
    CensoringTreeConfig tree;
    SurvivalForestConfig forest;
    bool refit_nuisances_per_fold = false;
    std::uint64_t seed = 0;
};

struct CudlModel {
    Standardizer standardizer;
    NetworkWeights weights;
    Head head = Head::sigmoid;
    Variant variant = Variant::doubly_robust;
    TargetSpec target;
    double chosen_eta = 0.0;
    std::vector<double> cv_errors;
    std::uint64_t seed = 0;

    double predict(const Eigen::VectorXd& raw) const {
        return network_forward(weights, standardizer.apply_row(raw), head);
    }

    Eigen::VectorXd predict_batch(const Eigen::MatrixXd& raw) const {
        return network_forward_batch(weights, standardizer.apply(raw), head);
    }
};

namespace detail {

/// Seed stream tags for the pipeline's independent random components.
constexpr std::uint64_t kSeedForest = 1;
constexpr std::uint64_t kSeedFolds = 2;
constexpr std::uint64_t kSeedCvTrain = 3;
constexpr std::uint64_t kSeedFinalTrain = 4;

/// Fold labels from a seeded permutation dealt round-robin.
inline std::vector<int> permutation_folds(std::size_t n, int n_folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) {
        fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
    }
    return fold;
}

struct FittedNuisances {
    std::shared_ptr<ConditionalCurveModel> g;
    std::shared_ptr<ConditionalCurveModel> s;
};

inline FittedNuisances fit_nuisances(const Dataset& restricted, const CudlSpec& spec,
                                     std::uint64_t forest_seed) {
    FittedNuisances out;
    out.s = std::make_shared<SurvivalForest>(forest_fit(restricted, spec.forest, forest_seed));
    if (spec.variant == Variant::doubly_robust) {
        out.g = std::make_shared<CensoringTree>(censoring_tree_fit(restricted, spec.tree));
    } else {
        out.g = std::make_shared<UnitCurveModel>();
    }
    return out;
}

}  // namespace detail

/// Fits the full pipeline: restrict, fit nuisances, transform, select the
/// penalty by k-fold cross-validation on the transformed loss, retrain on
/// all rows at the chosen penalty.
inline CudlModel cudl_fit(const Dataset& data, const CudlSpec& spec) {
    if (spec.eta_grid.empty()) {
        throw InvalidParameterError("eta grid must be nonempty");
    }
    if (data.n() < 2) {
        throw InsufficientDataError("pipeline needs at least two rows");
    }
    validate_target_within_range(data, spec.target);

    const Dataset restricted = restrict_dataset(data, spec.target.value);
    const Outcome h = spec.target.outcome();
    const Head head = spec.target.head();
    const Standardizer standardizer = fit_standardizer(data.covariates());

    const auto nuisances =
        detail::fit_nuisances(restricted, spec, derive_seed(spec.seed, {detail::kSeedForest}));
    const TransformedData trans =
        transform_dataset(restricted, *nuisances.g, *nuisances.s, h, standardizer);

    NetworkConfig base = spec.network;
    base.p = static_cast<int>(data.p());
    base.head = head;

    CudlModel model;
    model.standardizer = standardizer;
    model.head = head;
    model.variant = spec.variant;
    model.target = spec.target;
    model.seed = spec.seed;

    double chosen = spec.eta_grid.front();
    if (spec.eta_grid.size() > 1) {
        if (spec.cv_folds < 2 || static_cast<std::size_t>(spec.cv_folds) > data.n()) {
            throw InvalidParameterError("cv_folds must lie in [2, n]");
        }
        const std::vector<int> fold = detail::permutation_folds(
            data.n(), spec.cv_folds, derive_seed(spec.seed, {detail::kSeedFolds}));
        model.cv_errors.assign(spec.eta_grid.size(), 0.0);
        for (int f = 0; f < spec.cv_folds; ++f) {
            std::vector<std::size_t> train_rows;
            std::vector<std::size_t> held_rows;
            for (std::size_t i = 0; i < data.n(); ++i) {
                (fold[i] == f ? held_rows : train_rows).push_back(i);
            }
            if (train_rows.empty() || held_rows.empty()) {
                throw DegenerateFoldError("cross-validation fold is empty");
            }

            Eigen::MatrixXd train_x(static_cast<Eigen::Index>(train_rows.size()), data.p());
            Eigen::VectorXd train_d(static_cast<Eigen::Index>(train_rows.size()));
            Eigen::MatrixXd held_x(static_cast<Eigen::Index>(held_rows.size()), data.p());
            Eigen::VectorXd held_d(static_cast<Eigen::Index>(held_rows.size()));
            if (spec.refit_nuisances_per_fold) {
                const Dataset fold_train = restricted.subset(train_rows);
                const auto fold_nuisances = detail::fit_nuisances(
                    fold_train, spec,
                    derive_seed(spec.seed, {detail::kSeedForest, static_cast<std::uint64_t>(f)}));
                const TransformedData fold_trans = transform_dataset(
                    fold_train, *fold_nuisances.g, *fold_nuisances.s, h, standardizer);
                train_x = fold_trans.x;
                train_d = fold_trans.d;
                const Dataset fold_held = restricted.subset(held_rows);
                const TransformedData held_trans = transform_dataset(
                    fold_held, *fold_nuisances.g, *fold_nuisances.s, h, standardizer);
                held_x = held_trans.x;
                held_d = held_trans.d;
            } else {
                for (std::size_t k = 0; k < train_rows.size(); ++k) {
                    train_x.row(static_cast<Eigen::Index>(k)) =
                        trans.x.row(static_cast<Eigen::Index>(train_rows[k]));
                    train_d[static_cast<Eigen::Index>(k)] =
                        trans.d[static_cast<Eigen::Index>(train_rows[k])];
                }
                for (std::size_t k = 0; k < held_rows.size(); ++k) {
                    held_x.row(static_cast<Eigen::Index>(k)) =
                        trans.x.row(static_cast<Eigen::Index>(held_rows[k]));
                    held_d[static_cast<Eigen::Index>(k)] =
                        trans.d[static_cast<Eigen::Index>(held_rows[k])];
                }
            }

            for (std::size_t e = 0; e < spec.eta_grid.size(); ++e) {
                NetworkConfig cfg = base;
                cfg.eta = spec.eta_grid[e];
                cfg.seed = derive_seed(spec.seed, {detail::kSeedCvTrain, e,
                                                   static_cast<std::uint64_t>(f)});
                const NetworkWeights w = network_train(train_x, train_d, cfg);
                const Eigen::VectorXd f_held = network_forward_batch(w, held_x, head);
                model.cv_errors[e] += (f_held - held_d).squaredNorm();
            }
        }
        for (double& err : model.cv_errors) {
            err /= static_cast<double>(data.n());
        }
        std::size_t best = 0;
        for (std::size_t e = 1; e < spec.eta_grid.size(); ++e) {
            if (model.cv_errors[e] < model.cv_errors[best]) {
                best = e;
            }
        }
        chosen = spec.eta_grid[best];
    }

    NetworkConfig final_cfg = base;
    final_cfg.eta = chosen;
    final_cfg.seed = derive_seed(spec.seed, {detail::kSeedFinalTrain});
    model.weights = network_train(trans.x, trans.d, final_cfg);
    model.chosen_eta = chosen;
    return model;
}

/// Count of predictions exceeding the restricted-mean horizon; the ReLU
/// head is unbounded so a fitted model can overshoot the cap.
inline std::size_t count_above_cap(const Eigen::VectorXd& predictions, double cap) {
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        if (predictions[i] > cap) {
            ++count;
        }
    }
    return count;
}

}  // namespace cudl
