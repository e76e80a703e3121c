#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cudl/cox.hpp"
#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/evaluation.hpp"
#include "cudl/pipeline.hpp"
#include "cudl/survival_forest.hpp"

namespace cudl {

inline MethodFactory make_cudl_method(Variant variant, CudlSpec base) {
    base.variant = variant;
    return [base](const TargetSpec& target) -> FitPredictFn {
        CudlSpec spec = base;
        spec.target = target;
        return [spec](const Dataset& train, const Eigen::MatrixXd& test_x,
                      std::uint64_t seed) -> Eigen::VectorXd {
            CudlSpec run = spec;
            run.seed = seed;
            const CudlModel model = cudl_fit(train, run);
            return model.predict_batch(test_x);
        };
    };
}

inline MethodFactory make_cox_method() {
    return [](const TargetSpec& target) -> FitPredictFn {
        return [target](const Dataset& train, const Eigen::MatrixXd& test_x,
                        std::uint64_t) -> Eigen::VectorXd {
            const CoxModel model = cox_fit(train);
            Eigen::VectorXd out(test_x.rows());
            for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
                const Eigen::VectorXd w = test_x.row(i);
                out[i] = target.type == TargetType::brier
                             ? cox_predict_survival(model, w, target.value)
                             : cox_predict_rms(model, w, target.value);
            }
            return out;
        };
    };
}

inline MethodFactory make_rsf_method(SurvivalForestConfig cfg = {}) {
    return [cfg](const TargetSpec& target) -> FitPredictFn {
        return [cfg, target](const Dataset& train, const Eigen::MatrixXd& test_x,
                             std::uint64_t seed) -> Eigen::VectorXd {
            const SurvivalForest forest = forest_fit(train, cfg, seed);
            Eigen::VectorXd out(test_x.rows());
            for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
                const CurvePtr curve = forest.curve_at(test_x.row(i));
                out[i] = target.type == TargetType::brier
                             ? curve->eval(target.value)
                             : restricted_mean_from_curve(*curve, target.value);
            }
            return out;
        };
    };
}

/// Resolves method names to factories; CUDL methods share the provided base
/// configuration, the forest baseline its own.
inline std::vector<std::pair<std::string, MethodFactory>> method_registry(
    const std::vector<std::string>& names, const CudlSpec& cudl_base = {},
    const SurvivalForestConfig& rsf_cfg = {}) {
    std::vector<std::pair<std::string, MethodFactory>> out;
    for (const std::string& name : names) {
        if (name == "cudl-dr") {
            out.emplace_back(name, make_cudl_method(Variant::doubly_robust, cudl_base));
        } else if (name == "cudl-bj") {
            out.emplace_back(name, make_cudl_method(Variant::buckley_james, cudl_base));
        } else if (name == "cox") {
            out.emplace_back(name, make_cox_method());
        } else if (name == "rsf") {
            out.emplace_back(name, make_rsf_method(rsf_cfg));
        } else {
            throw InvalidParameterError("unknown method '" + name + "'");
        }
    }
    return out;
}

}  // namespace cudl
