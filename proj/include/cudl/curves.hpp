#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "cudl/errors.hpp"

namespace cudl {

/// Right-continuous step survival function. S(u) = 1 before the first jump
/// and values[j] on [u_j, u_{j+1}). An empty curve is S identically 1.
class StepSurvivalCurve {
  public:
    StepSurvivalCurve() = default;

    StepSurvivalCurve(std::vector<double> jump_times, std::vector<double> values)
        : jump_times_(std::move(jump_times)), values_(std::move(values)) {
        validate();
    }

    const std::vector<double>& jump_times() const { return jump_times_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t n_jumps() const { return jump_times_.size(); }

    /// S(u), right-continuous.
    double eval(double u) const {
        auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), u);
        if (it == jump_times_.begin()) {
            return 1.0;
        }
        return values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
    }

    /// S(u-), the left limit.
    double eval_left(double u) const {
        auto it = std::lower_bound(jump_times_.begin(), jump_times_.end(), u);
        if (it == jump_times_.begin()) {
            return 1.0;
        }
        return values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
    }

  private:
    void validate() const {
        if (values_.size() != jump_times_.size()) {
            throw DimensionMismatchError("curve jump times and values lengths differ");
        }
        double prev_time = 0.0;
        double prev_value = 1.0;
        for (std::size_t j = 0; j < jump_times_.size(); ++j) {
            if (!(jump_times_[j] > prev_time) || !std::isfinite(jump_times_[j])) {
                throw InvalidParameterError("curve jump times must be strictly increasing and positive");
            }
            if (!(values_[j] >= 0.0) || values_[j] > prev_value) {
                throw InvalidParameterError("curve values must be nonincreasing within [0,1]");
            }
            prev_time = jump_times_[j];
            prev_value = values_[j];
        }
    }

    std::vector<double> jump_times_;
    std::vector<double> values_;
};

using CurvePtr = std::shared_ptr<const StepSurvivalCurve>;

/// Conditional curve source: anything that maps a covariate row to a fitted
/// survival curve. Estimators implement this for both S and G roles.
class ConditionalCurveModel {
  public:
    virtual ~ConditionalCurveModel() = default;
    virtual CurvePtr curve_at(const Eigen::VectorXd& w) const = 0;
};

/// The no-censoring model G = 1.
class UnitCurveModel : public ConditionalCurveModel {
  public:
    UnitCurveModel() : unit_(std::make_shared<StepSurvivalCurve>()) {}
    CurvePtr curve_at(const Eigen::VectorXd&) const override { return unit_; }

  private:
    CurvePtr unit_;
};

/// Outcome transform h applied to a follow-up time: the identity for
/// restricted-mean targets, the indicator {u >= t} for survival
/// probability at t.
struct Outcome {
    enum class Kind { identity, at_least };

    Kind kind = Kind::identity;
    double threshold = 0.0;

    static Outcome identity() { return Outcome{Kind::identity, 0.0}; }
    static Outcome at_least(double t) { return Outcome{Kind::at_least, t}; }

    double operator()(double u) const {
        return kind == Kind::identity ? u : (u >= threshold ? 1.0 : 0.0);
    }
};

/// Hazard increments of a censoring curve: (u_j, (G(u_j-) - G(u_j)) / G(u_j-))
/// for each jump with positive left limit. The left limit is read from the
/// stored neighbour value so downstream telescoping sums cancel exactly.
inline std::vector<std::pair<double, double>> hazard_increments(const StepSurvivalCurve& curve) {
    std::vector<std::pair<double, double>> out;
    out.reserve(curve.n_jumps());
    double prev = 1.0;
    for (std::size_t j = 0; j < curve.n_jumps(); ++j) {
        const double cur = curve.values()[j];
        if (prev > 0.0) {
            out.emplace_back(curve.jump_times()[j], (prev - cur) / prev);
        }
        prev = cur;
    }
    return out;
}

/// E[min(T, tau)] under the curve: atoms contribute min(u_j, tau) and any
/// residual mass past the last jump contributes at the cap tau.
inline double restricted_mean_from_curve(const StepSurvivalCurve& curve, double tau) {
    if (!(tau > 0.0)) {
        throw InvalidParameterError("restricted mean horizon must be positive");
    }
    double total = 0.0;
    double prev = 1.0;
    for (std::size_t j = 0; j < curve.n_jumps(); ++j) {
        const double cur = curve.values()[j];
        total += std::min(curve.jump_times()[j], tau) * (prev - cur);
        prev = cur;
    }
    total += tau * prev;
    return total;
}

/// Conditional tail moments m_k(u) = E[h(T)^k | T >= u] of a fitted curve,
/// with suffix sums precomputed so repeated queries cost a binary search.
/// Residual mass past the last jump is completed as an atom at the last
/// jump time; the conditioning denominator is S(u) of the completed curve.
class CurveExpectation {
  public:
    CurveExpectation(const StepSurvivalCurve& curve, const Outcome& h)
        : jumps_(curve.jump_times()), surv_(curve.values()) {
        const std::size_t J = jumps_.size();
        if (J > 0) {
            surv_[J - 1] = 0.0;
        }
        suffix1_.assign(J + 1, 0.0);
        suffix2_.assign(J + 1, 0.0);
        for (std::size_t j = J; j-- > 0;) {
            const double before = j == 0 ? 1.0 : surv_[j - 1];
            const double mass = before - surv_[j];
            const double hv = h(jumps_[j]);
            suffix1_[j] = suffix1_[j + 1] + hv * mass;
            suffix2_[j] = suffix2_[j + 1] + hv * hv * mass;
        }
    }

    /// m_k(u) for k in {0,1,2}; m_0 is 1 by definition.
    double m(double u, int k) const {
        if (k == 0) {
            return 1.0;
        }
        if (k != 1 && k != 2) {
            throw InvalidParameterError("moment order must be 0, 1 or 2");
        }
        if (jumps_.empty()) {
            throw DegenerateConditioningError("curve has no mass to condition on");
        }
        auto it = std::upper_bound(jumps_.begin(), jumps_.end(), u);
        const std::size_t i = static_cast<std::size_t>(it - jumps_.begin());
        const double denom = i == 0 ? 1.0 : surv_[i - 1];
        if (!(denom > 0.0)) {
            throw DegenerateConditioningError("no conditional mass beyond u");
        }
        return (k == 1 ? suffix1_[i] : suffix2_[i]) / denom;
    }

  private:
    std::vector<double> jumps_;
    std::vector<double> surv_;
    std::vector<double> suffix1_;
    std::vector<double> suffix2_;
};

/// Convenience wrapper when only a handful of queries are needed.
inline double m_k(const StepSurvivalCurve& curve, double u, int k, const Outcome& h) {
    return CurveExpectation(curve, h).m(u, k);
}

}  // namespace cudl
