#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"

namespace cudl {

/// Main-effects Cox proportional hazards model with Breslow tie handling
/// and Breslow baseline cumulative hazard. Covariates are centered
/// internally; predictions subtract the stored center.
struct CoxModel {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd center;
    std::vector<double> baseline_times;
    std::vector<double> baseline_cumhaz;
    int iterations = 0;
    double gradient_norm = 0.0;

    double cumulative_hazard(double t) const {
        auto it = std::upper_bound(baseline_times.begin(), baseline_times.end(), t);
        if (it == baseline_times.begin()) {
            return 0.0;
        }
        return baseline_cumhaz[static_cast<std::size_t>(it - baseline_times.begin()) - 1];
    }

    double risk_score(const Eigen::VectorXd& w) const {
        if (w.size() != coefficients.size()) {
            throw DimensionMismatchError("covariate width does not match fitted model");
        }
        return std::exp((w - center).dot(coefficients));
    }

    /// Per-subject survival curve S(t|w) = exp(-H0(t) exp((w-center)'beta))
    /// as a step function at the baseline event times.
    CurvePtr survival_curve(const Eigen::VectorXd& w) const {
        const double risk = risk_score(w);
        std::vector<double> values(baseline_times.size());
        for (std::size_t j = 0; j < baseline_times.size(); ++j) {
            values[j] = std::exp(-baseline_cumhaz[j] * risk);
        }
        return std::make_shared<StepSurvivalCurve>(baseline_times, std::move(values));
    }
};

/// ConditionalCurveModel adapter around a fitted Cox model.
class CoxCurveModel : public ConditionalCurveModel {
  public:
    explicit CoxCurveModel(CoxModel model) : model_(std::move(model)) {}
    CurvePtr curve_at(const Eigen::VectorXd& w) const override { return model_.survival_curve(w); }
    const CoxModel& model() const { return model_; }

  private:
    CoxModel model_;
};

namespace detail {

struct CoxLikelihood {
    double loglik = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd info;
};

/// Breslow log partial likelihood with gradient and observed information.
/// Rows are swept from the largest time down so risk-set sums accumulate.
inline CoxLikelihood cox_loglik(const Eigen::MatrixXd& x, const std::vector<double>& times,
                                const std::vector<int>& events,
                                const std::vector<std::size_t>& order_desc,
                                const Eigen::VectorXd& beta, bool with_derivatives) {
    const auto p = x.cols();
    CoxLikelihood out;
    out.gradient = Eigen::VectorXd::Zero(p);
    out.info = Eigen::MatrixXd::Zero(p, p);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    std::size_t i = 0;
    const std::size_t n = order_desc.size();
    while (i < n) {
        const double t = times[order_desc[i]];
        std::size_t g = i;
        for (; g < n && times[order_desc[g]] == t; ++g) {
            const auto r = static_cast<Eigen::Index>(order_desc[g]);
            const double w = std::exp(x.row(r).dot(beta));
            s0 += w;
            if (with_derivatives) {
                s1 += w * x.row(r).transpose();
                s2 += w * x.row(r).transpose() * x.row(r);
            }
        }
        for (std::size_t k = i; k < g; ++k) {
            const auto r = static_cast<Eigen::Index>(order_desc[k]);
            if (events[order_desc[k]] != 1) {
                continue;
            }
            out.loglik += x.row(r).dot(beta) - std::log(s0);
            if (with_derivatives) {
                const Eigen::VectorXd mean = s1 / s0;
                out.gradient += x.row(r).transpose() - mean;
                out.info += s2 / s0 - mean * mean.transpose();
            }
        }
        i = g;
    }
    return out;
}

}  // namespace detail

inline CoxModel cox_fit(const Dataset& data, int max_iter = 50, double tol = 1e-8) {
    const std::size_t n = data.n();
    const auto p = static_cast<Eigen::Index>(data.p());
    if (n == 0) {
        throw InsufficientDataError("Cox model needs at least one observation");
    }
    if (std::accumulate(data.events().begin(), data.events().end(), 0) == 0) {
        throw InsufficientDataError("Cox model needs at least one event");
    }

    CoxModel model;
    model.center = p > 0 ? Eigen::VectorXd(data.covariates().colwise().mean())
                         : Eigen::VectorXd(0);
    Eigen::MatrixXd x = data.covariates();
    if (p > 0) {
        x.rowwise() -= model.center.transpose();
    }

    std::vector<std::size_t> order_desc(n);
    std::iota(order_desc.begin(), order_desc.end(), std::size_t{0});
    std::sort(order_desc.begin(), order_desc.end(),
              [&](std::size_t a, std::size_t b) { return data.time(a) > data.time(b); });

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double current_ll = 0.0;
    int iter = 0;
    if (p > 0) {
        detail::CoxLikelihood cur =
            detail::cox_loglik(x, data.times(), data.events(), order_desc, beta, true);
        current_ll = cur.loglik;
        bool converged = cur.gradient.lpNorm<Eigen::Infinity>() < tol;
        while (!converged && iter < max_iter) {
            ++iter;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
            if (ldlt.info() != Eigen::Success) {
                throw ConvergenceError("singular information matrix in Cox fit");
            }
            const Eigen::VectorXd direction = ldlt.solve(cur.gradient);
            double step = 1.0;
            Eigen::VectorXd candidate;
            detail::CoxLikelihood next;
            bool improved = false;
            const double stagnation = (std::abs(current_ll) + 1.0) * 1e-14;
            for (int half = 0; half < 30; ++half) {
                candidate = beta + step * direction;
                next = detail::cox_loglik(x, data.times(), data.events(), order_desc, candidate,
                                          true);
                if (std::isfinite(next.loglik) && next.loglik > current_ll + stagnation) {
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) {
                converged = true;
                break;
            }
            beta = candidate;
            current_ll = next.loglik;
            cur = next;
            if (beta.lpNorm<Eigen::Infinity>() > 50.0) {
                throw SeparationError("Cox coefficients diverging, likelihood appears monotone");
            }
            converged = cur.gradient.lpNorm<Eigen::Infinity>() < tol;
        }
        model.gradient_norm = cur.gradient.lpNorm<Eigen::Infinity>();
        if (!converged) {
            throw ConvergenceError("Cox fit did not converge after " + std::to_string(iter) +
                                   " iterations, gradient max-norm " +
                                   std::to_string(model.gradient_norm));
        }
    }
    model.coefficients = beta;
    model.iterations = iter;

    std::vector<std::size_t> order_asc(order_desc.rbegin(), order_desc.rend());
    std::vector<double> risk(n);
    for (std::size_t r = 0; r < n; ++r) {
        risk[r] = p > 0 ? std::exp(x.row(static_cast<Eigen::Index>(r)).dot(beta)) : 1.0;
    }
    double s0 = 0.0;
    for (std::size_t r : order_desc) {
        s0 += risk[r];
    }
    double cumhaz = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = data.time(order_asc[i]);
        std::size_t d = 0;
        std::size_t g = i;
        double leaving = 0.0;
        for (; g < n && data.time(order_asc[g]) == t; ++g) {
            d += static_cast<std::size_t>(data.event(order_asc[g]));
            leaving += risk[order_asc[g]];
        }
        if (d > 0) {
            cumhaz += static_cast<double>(d) / s0;
            model.baseline_times.push_back(t);
            model.baseline_cumhaz.push_back(cumhaz);
        }
        s0 -= leaving;
        i = g;
    }
    return model;
}

inline double cox_predict_survival(const CoxModel& model, const Eigen::VectorXd& w, double t) {
    return std::exp(-model.cumulative_hazard(t) * model.risk_score(w));
}

inline double cox_predict_rms(const CoxModel& model, const Eigen::VectorXd& w, double tau) {
    return restricted_mean_from_curve(*model.survival_curve(w), tau);
}

}  // namespace cudl
