#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/rng.hpp"

namespace testutil {

inline cudl::CurvePtr make_curve(std::vector<double> times, std::vector<double> values) {
    return std::make_shared<cudl::StepSurvivalCurve>(std::move(times), std::move(values));
}

inline cudl::Dataset make_dataset(std::vector<double> times, std::vector<int> events,
                                  const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return cudl::Dataset(std::move(times), std::move(events), std::move(x));
}

/// Independent straight-line evaluation of one transform term triple for
/// marginal curves, written directly from the defining sums. The production
/// code caches paths and reuses suffix sums; this does neither.
struct BruteTerms {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

inline double brute_eval(const cudl::StepSurvivalCurve& curve, double u) {
    double value = 1.0;
    for (std::size_t j = 0; j < curve.jump_times().size(); ++j) {
        if (curve.jump_times()[j] <= u) {
            value = curve.values()[j];
        }
    }
    return value;
}

inline double brute_eval_left(const cudl::StepSurvivalCurve& curve, double u) {
    double value = 1.0;
    for (std::size_t j = 0; j < curve.jump_times().size(); ++j) {
        if (curve.jump_times()[j] < u) {
            value = curve.values()[j];
        }
    }
    return value;
}

/// m_k with tail completion: residual mass becomes an atom at the last jump.
inline double brute_m_k(const cudl::StepSurvivalCurve& curve, double u, int k,
                        const cudl::Outcome& h) {
    if (k == 0) {
        return 1.0;
    }
    const auto& times = curve.jump_times();
    std::vector<double> values = curve.values();
    if (!values.empty()) {
        values.back() = 0.0;
    }
    double denom = 1.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] <= u) {
            denom = values[j];
        }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] <= u) {
            continue;
        }
        const double before = j == 0 ? 1.0 : values[j - 1];
        const double mass = before - values[j];
        double hv = h(times[j]);
        double contrib = hv;
        for (int q = 1; q < k; ++q) {
            contrib *= hv;
        }
        total += contrib * mass;
    }
    return total / denom;
}

inline BruteTerms brute_terms(double t_obs, int delta, const cudl::StepSurvivalCurve& g,
                              const cudl::StepSurvivalCurve& s, const cudl::Outcome& h, int k) {
    BruteTerms out;
    const double g_t = brute_eval(g, t_obs);
    auto h_pow = [&](double u) {
        if (k == 0) {
            return 1.0;
        }
        double hv = h(u);
        double r = hv;
        for (int q = 1; q < k; ++q) {
            r *= hv;
        }
        return r;
    };
    if (delta == 1) {
        out.a = h_pow(t_obs) / g_t;
    } else {
        out.b = brute_m_k(s, t_obs, k, h) / g_t;
    }
    for (std::size_t j = 0; j < g.jump_times().size(); ++j) {
        const double u = g.jump_times()[j];
        if (u > t_obs) {
            continue;
        }
        const double before = brute_eval_left(g, u);
        const double after = g.values()[j];
        if (before <= 0.0 || after <= 0.0) {
            continue;
        }
        const double dlam = (before - after) / before;
        const double mk = k == 0 ? 1.0 : brute_m_k(s, u, k, h);
        out.c += mk * dlam / after;
    }
    return out;
}

}  // namespace testutil
