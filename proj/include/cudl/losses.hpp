#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/transforms.hpp"

namespace cudl {

/// An averaged empirical loss. Doubly robust losses can dip below zero on
/// small samples, so no sign constraint is imposed.
struct LossValue {
    double value = 0.0;
    std::size_t n = 0;
};

namespace detail {

inline void check_lengths(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw DimensionMismatchError(std::string(what) + ": lengths differ");
    }
    if (a == 0) {
        throw InsufficientDataError(std::string(what) + ": empty input");
    }
}

}  // namespace detail

/// Mean squared error between observed responses and predictions.
inline LossValue full_l2(const Eigen::VectorXd& responses, const Eigen::VectorXd& predictions) {
    detail::check_lengths(responses.size(), predictions.size(), "full_l2");
    detail::KahanSum acc;
    for (Eigen::Index i = 0; i < responses.size(); ++i) {
        const double r = responses[i] - predictions[i];
        acc.add(r * r);
    }
    return LossValue{acc.sum / static_cast<double>(responses.size()),
                     static_cast<std::size_t>(responses.size())};
}

/// Inverse-probability-of-censoring weighted L2 loss: uncensored rows only,
/// each weighted by 1/G(observed time).
inline LossValue ipcw_loss(const Dataset& data, const Eigen::VectorXd& predictions,
                           const ConditionalCurveModel& g_model, const Outcome& h) {
    detail::check_lengths(static_cast<Eigen::Index>(data.n()), predictions.size(), "ipcw_loss");
    detail::KahanSum acc;
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.event(i) != 1) {
            continue;
        }
        const Eigen::VectorXd w = data.covariates().row(static_cast<Eigen::Index>(i)).transpose();
        const double g_t = g_model.curve_at(w)->eval(data.time(i));
        if (!(g_t > 0.0)) {
            throw PositivityError("censoring survival estimate is zero at observed time (row " +
                                      std::to_string(i + 1) + ")",
                                  static_cast<long>(i));
        }
        const double r = h(data.time(i)) - predictions[static_cast<Eigen::Index>(i)];
        acc.add(r * r / g_t);
    }
    return LossValue{acc.sum / static_cast<double>(data.n()), data.n()};
}

/// Doubly robust L2 loss evaluated through the term decomposition:
/// mean of (a2+b2-c2) - 2 d beta + beta^2 over rows.
inline LossValue dr_loss_from_terms(const std::vector<TransformTerms>& terms,
                                    const Eigen::VectorXd& predictions) {
    detail::check_lengths(static_cast<Eigen::Index>(terms.size()), predictions.size(), "dr_loss");
    detail::KahanSum acc;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double beta = predictions[static_cast<Eigen::Index>(i)];
        acc.add(terms[i].quad() - 2.0 * terms[i].d() * beta + beta * beta);
    }
    return LossValue{acc.sum / static_cast<double>(terms.size()), terms.size()};
}

inline LossValue dr_loss(const Dataset& data, const Eigen::VectorXd& predictions,
                         const ConditionalCurveModel& g_model, const ConditionalCurveModel& s_model,
                         const Outcome& h) {
    return dr_loss_from_terms(compute_all_terms(data, g_model, s_model, h), predictions);
}

/// Buckley-James L2 loss: the doubly robust loss with G = 1.
inline LossValue bj_loss(const Dataset& data, const Eigen::VectorXd& predictions,
                         const ConditionalCurveModel& s_model, const Outcome& h) {
    UnitCurveModel unit;
    return dr_loss(data, predictions, unit, s_model, h);
}

/// Mean squared pseudo-response residual.
inline LossValue transformed_l2(const Eigen::VectorXd& pseudo_responses,
                                const Eigen::VectorXd& predictions) {
    LossValue out = full_l2(pseudo_responses, predictions);
    return out;
}

inline LossValue transformed_l2(const TransformedData& rows, const Eigen::VectorXd& predictions) {
    return transformed_l2(rows.d, predictions);
}

/// Censored Brier score at time t on a dataset already restricted at t.
/// Predictions must lie in [0,1]; they estimate P(T >= t | W).
inline LossValue censored_brier(const Dataset& data_t, double t, const Eigen::VectorXd& predictions,
                                const ConditionalCurveModel& g_model) {
    detail::check_lengths(static_cast<Eigen::Index>(data_t.n()), predictions.size(),
                          "censored_brier");
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        if (!(predictions[i] >= 0.0 && predictions[i] <= 1.0)) {
            throw InvalidPredictionError("Brier predictions must lie in [0,1] (row " +
                                         std::to_string(i + 1) + ")");
        }
    }
    return ipcw_loss(data_t, predictions, g_model, Outcome::at_least(t));
}

}  // namespace cudl
