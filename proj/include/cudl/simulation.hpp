#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/rng.hpp"
#include "cudl/special.hpp"

namespace cudl {

/// The two simulation designs. Setting 1: exponential failure times whose
/// mean is log-linear in the first ten covariates, exponential censoring.
/// Setting 2: gamma failure times whose shape depends on covariates 11-15
/// through an absolute value (a proportional-hazards violation), uniform
/// censoring on [0,15].
struct SettingConfig {
    int setting = 1;
    std::size_t n = 0;
    std::size_t p = 30;
    std::uint64_t seed = 0;

    void validate() const {
        if (setting != 1 && setting != 2) {
            throw InvalidParameterError("setting must be 1 or 2");
        }
        if (n == 0 || p < 15) {
            throw InvalidParameterError("simulation needs n >= 1 and p >= 15");
        }
    }
};

namespace detail {

inline Eigen::MatrixXd ar_covariance(std::size_t p) {
    Eigen::MatrixXd sigma(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::pow(0.5, std::abs(static_cast<double>(i) - static_cast<double>(j)));
        }
    }
    return sigma;
}

inline Eigen::MatrixXd ar_cholesky(std::size_t p) {
    return Eigen::MatrixXd(ar_covariance(p).llt().matrixL());
}

inline double setting1_mean(const Eigen::VectorXd& w) {
    return std::exp(0.1 * w.head(10).sum());
}

inline double setting2_shape(const Eigen::VectorXd& w) {
    return 0.5 + 0.3 * std::abs(w.segment(10, 5).sum());
}

constexpr double kCensorMean1 = 1.14;
constexpr double kCensorUpper2 = 15.0;
constexpr double kGammaScale2 = 2.0;

}  // namespace detail

/// One simulated cohort, deterministic in the seed. Draw order per row is
/// covariates, then failure time, then censoring time.
inline Dataset simulate(const SettingConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const Eigen::MatrixXd chol = detail::ar_cholesky(cfg.p);
    std::vector<double> times(cfg.n);
    std::vector<int> events(cfg.n);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(cfg.p));
    Eigen::VectorXd z(static_cast<Eigen::Index>(cfg.p));
    for (std::size_t i = 0; i < cfg.n; ++i) {
        for (std::size_t j = 0; j < cfg.p; ++j) {
            z[static_cast<Eigen::Index>(j)] = rng.normal();
        }
        const Eigen::VectorXd w = chol * z;
        x.row(static_cast<Eigen::Index>(i)) = w.transpose();
        double t;
        double c;
        if (cfg.setting == 1) {
            t = rng.exponential(detail::setting1_mean(w));
            c = rng.exponential(detail::kCensorMean1);
        } else {
            t = rng.gamma(detail::setting2_shape(w), detail::kGammaScale2);
            c = detail::kCensorUpper2 * rng.uniform_pos();
        }
        times[i] = std::min(t, c);
        events[i] = t <= c ? 1 : 0;
    }
    return Dataset(std::move(times), std::move(events), std::move(x));
}

/// P(T >= t | W = w) under the data-generating law.
inline double true_survival(int setting, const Eigen::VectorXd& w, double t) {
    if (t < 0.0) {
        throw InvalidParameterError("survival time must be nonnegative");
    }
    if (setting == 1) {
        return std::exp(-t / detail::setting1_mean(w));
    }
    if (setting == 2) {
        return gamma_q(detail::setting2_shape(w), t / detail::kGammaScale2);
    }
    throw InvalidParameterError("setting must be 1 or 2");
}

/// E[min(T, tau) | W = w] under the data-generating law.
inline double true_rms(int setting, const Eigen::VectorXd& w, double tau) {
    if (!(tau > 0.0)) {
        throw InvalidParameterError("restricted mean horizon must be positive");
    }
    if (setting == 1) {
        const double mu = detail::setting1_mean(w);
        return mu * (1.0 - std::exp(-tau / mu));
    }
    if (setting == 2) {
        const double shape = detail::setting2_shape(w);
        return integrate_adaptive(
            [&](double s) { return gamma_q(shape, s / detail::kGammaScale2); }, 0.0, tau, 1e-8);
    }
    throw InvalidParameterError("setting must be 1 or 2");
}

enum class MarginalTime { failure, observed };

/// Monte Carlo quantile of the marginal failure or observed time
/// distribution, deterministic in the seed.
inline double marginal_quantile(int setting, double q, std::size_t n_mc, std::uint64_t seed,
                                MarginalTime which = MarginalTime::failure) {
    if (!(q > 0.0 && q < 1.0)) {
        throw InvalidParameterError("quantile level must lie in (0,1)");
    }
    if (n_mc == 0) {
        throw InvalidParameterError("marginal quantile needs n_mc >= 1");
    }
    SettingConfig cfg;
    cfg.setting = setting;
    cfg.n = 1;
    cfg.p = 15;
    cfg.validate();
    Rng rng(seed);
    const Eigen::MatrixXd chol = detail::ar_cholesky(cfg.p);
    Eigen::VectorXd z(static_cast<Eigen::Index>(cfg.p));
    std::vector<double> draws(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            z[j] = rng.normal();
        }
        const Eigen::VectorXd w = chol * z;
        double t;
        double c;
        if (setting == 1) {
            t = rng.exponential(detail::setting1_mean(w));
            c = rng.exponential(detail::kCensorMean1);
        } else {
            t = rng.gamma(detail::setting2_shape(w), detail::kGammaScale2);
            c = detail::kCensorUpper2 * rng.uniform_pos();
        }
        draws[i] = which == MarginalTime::failure ? t : std::min(t, c);
    }
    std::sort(draws.begin(), draws.end());
    const double pos = q * static_cast<double>(n_mc) - 1.0;
    const auto idx = static_cast<std::size_t>(
        std::clamp(std::ceil(pos), 0.0, static_cast<double>(n_mc - 1)));
    return draws[idx];
}

namespace detail {

/// Variance of the sum of the covariate block each setting's latent
/// parameter depends on; the block sum is normal with mean zero.
inline double block_sum_variance(int setting) {
    const std::size_t lo = setting == 1 ? 0 : 10;
    const std::size_t len = setting == 1 ? 10 : 5;
    const Eigen::MatrixXd sigma = ar_covariance(15);
    return sigma.block(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(lo),
                       static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(len))
        .sum();
}

/// Integrates g(z) against the N(0, sd^2) density over [-10 sd, 10 sd].
inline double expect_over_block_sum(double sd, const std::function<double(double)>& g,
                                    double tol = 1e-10) {
    const double norm = 1.0 / (sd * std::sqrt(2.0 * 3.141592653589793238462643383279503));
    return integrate_adaptive(
        [&](double z) { return norm * std::exp(-0.5 * z * z / (sd * sd)) * g(z); }, -10.0 * sd,
        10.0 * sd, tol);
}

/// Conditional moment E[h(min(T,cap))^k | latent] for one setting, where
/// the latent value is the block sum z.
inline double conditional_restricted_moment(int setting, double z, const Outcome& h, double cap,
                                            int k) {
    const bool indicator = h.kind == Outcome::Kind::at_least;
    if (setting == 1) {
        const double mu = std::exp(0.1 * z);
        if (indicator) {
            return std::exp(-h.threshold / mu);
        }
        if (k == 1) {
            return mu * (1.0 - std::exp(-cap / mu));
        }
        return 2.0 * mu * mu * (1.0 - std::exp(-cap / mu)) -
               2.0 * mu * cap * std::exp(-cap / mu);
    }
    const double shape = 0.5 + 0.3 * std::abs(z);
    if (indicator) {
        return gamma_q(shape, h.threshold / kGammaScale2);
    }
    const double mul = static_cast<double>(k);
    return integrate_adaptive(
        [&](double s) {
            const double surv = gamma_q(shape, s / kGammaScale2);
            return k == 1 ? surv : mul * s * surv;
        },
        0.0, cap, 1e-10);
}

}  // namespace detail

/// E[h(min(T, cap))^k] under the marginal law of a setting, computed by
/// one-dimensional quadrature over the latent block sum. For indicator
/// outcomes the cap equals the threshold and the value is P(T >= t).
inline double marginal_restricted_moment(int setting, const Outcome& h, double cap, int k) {
    if (setting != 1 && setting != 2) {
        throw InvalidParameterError("setting must be 1 or 2");
    }
    if (k != 1 && k != 2) {
        throw InvalidParameterError("moment order must be 1 or 2");
    }
    const double sd = std::sqrt(detail::block_sum_variance(setting));
    return detail::expect_over_block_sum(sd, [&](double z) {
        return detail::conditional_restricted_moment(setting, z, h, cap, k);
    });
}

/// Step-function discretization of a continuous survival function on an
/// even grid of n_points over (0, hi].
inline CurvePtr discretize_survival(const std::function<double(double)>& s, double hi,
                                    std::size_t n_points) {
    if (!(hi > 0.0) || n_points == 0) {
        throw InvalidParameterError("discretization needs hi > 0 and n_points >= 1");
    }
    std::vector<double> times(n_points);
    std::vector<double> values(n_points);
    double prev = 1.0;
    for (std::size_t i = 0; i < n_points; ++i) {
        times[i] = hi * static_cast<double>(i + 1) / static_cast<double>(n_points);
        values[i] = std::min(prev, std::max(0.0, s(times[i])));
        prev = values[i];
    }
    return std::make_shared<StepSurvivalCurve>(std::move(times), std::move(values));
}

/// Returns the same fixed curve for every covariate value.
class FixedCurveModel : public ConditionalCurveModel {
  public:
    explicit FixedCurveModel(CurvePtr curve) : curve_(std::move(curve)) {}
    CurvePtr curve_at(const Eigen::VectorXd&) const override { return curve_; }

  private:
    CurvePtr curve_;
};

/// Wraps an arbitrary covariate-to-curve function.
class CallbackCurveModel : public ConditionalCurveModel {
  public:
    explicit CallbackCurveModel(std::function<CurvePtr(const Eigen::VectorXd&)> fn)
        : fn_(std::move(fn)) {}
    CurvePtr curve_at(const Eigen::VectorXd& w) const override { return fn_(w); }

  private:
    std::function<CurvePtr(const Eigen::VectorXd&)> fn_;
};

}  // namespace cudl
