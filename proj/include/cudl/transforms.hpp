#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"

namespace cudl {

/// One observation's A/B/C terms for k in {0,1,2}. The pseudo-response is
/// d() and the quadratic companion quad() feeds the decomposed loss.
struct TransformTerms {
    double a0 = 0.0, b0 = 0.0, c0 = 0.0;
    double a1 = 0.0, b1 = 0.0, c1 = 0.0;
    double a2 = 0.0, b2 = 0.0, c2 = 0.0;

    double d() const { return a1 + b1 - c1; }
    double quad() const { return a2 + b2 - c2; }
    double identity_gap() const { return a0 + b0 - c0 - 1.0; }
};

struct TermTriple {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

namespace detail {

/// Censoring-curve path data for the C term: jump times u_j paired with
/// dLambda_j / G(u_j). Jumps where G has already hit zero are dropped;
/// rows needing them fail the positivity check first.
struct CensoringPath {
    std::vector<double> times;
    std::vector<double> weights;

    explicit CensoringPath(const StepSurvivalCurve& g) {
        double prev = 1.0;
        for (std::size_t j = 0; j < g.n_jumps(); ++j) {
            const double cur = g.values()[j];
            if (prev > 0.0 && cur > 0.0) {
                times.push_back(g.jump_times()[j]);
                weights.push_back(((prev - cur) / prev) / cur);
            }
            prev = cur;
        }
    }
};

/// Kahan-compensated accumulator; keeps long path sums deterministic and
/// tight enough for the telescoping identity checks.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

inline TransformTerms terms_for_row(double t, int delta, const StepSurvivalCurve& g,
                                    const CensoringPath& path, const CurveExpectation& s_exp,
                                    const Outcome& h, long row) {
    const double g_t = g.eval(t);
    if (!(g_t > 0.0)) {
        throw PositivityError("censoring survival estimate is zero at observed time (row " +
                                  std::to_string(row + 1) + ")",
                              row);
    }
    TransformTerms out;
    const double hv = h(t);
    if (delta == 1) {
        out.a0 = 1.0 / g_t;
        out.a1 = hv / g_t;
        out.a2 = hv * hv / g_t;
    } else {
        out.b0 = 1.0 / g_t;
        out.b1 = s_exp.m(t, 1) / g_t;
        out.b2 = s_exp.m(t, 2) / g_t;
    }
    const auto end = static_cast<std::size_t>(
        std::upper_bound(path.times.begin(), path.times.end(), t) - path.times.begin());
    KahanSum c0;
    KahanSum c1;
    KahanSum c2;
    for (std::size_t j = 0; j < end; ++j) {
        const double w = path.weights[j];
        c0.add(w);
        c1.add(s_exp.m(path.times[j], 1) * w);
        c2.add(s_exp.m(path.times[j], 2) * w);
    }
    out.c0 = c0.sum;
    out.c1 = c1.sum;
    out.c2 = c2.sum;
    return out;
}

}  // namespace detail

/// A/B/C terms of one observation for a single moment order k.
inline TermTriple compute_terms(const Observation& obs, const StepSurvivalCurve& g_curve,
                                const StepSurvivalCurve& s_curve, const Outcome& h, int k,
                                long row = 0) {
    if (k < 0 || k > 2) {
        throw InvalidParameterError("moment order must be 0, 1 or 2");
    }
    detail::CensoringPath path(g_curve);
    CurveExpectation s_exp(s_curve, h);
    TransformTerms all = detail::terms_for_row(obs.time, obs.event, g_curve, path, s_exp, h, row);
    switch (k) {
        case 0:
            return TermTriple{all.a0, all.b0, all.c0};
        case 1:
            return TermTriple{all.a1, all.b1, all.c1};
        default:
            return TermTriple{all.a2, all.b2, all.c2};
    }
}

/// Transformed training set: pseudo-responses d, standardized covariates x
/// and the full per-row term decomposition.
struct TransformedData {
    Eigen::VectorXd d;
    Eigen::MatrixXd x;
    std::vector<TransformTerms> terms;

    std::size_t n() const { return terms.size(); }
};

/// Per-row A/B/C terms for a whole dataset. Censoring-path data is cached
/// per distinct curve so tree and marginal models pay for each leaf once.
inline std::vector<TransformTerms> compute_all_terms(const Dataset& data,
                                                     const ConditionalCurveModel& g_model,
                                                     const ConditionalCurveModel& s_model,
                                                     const Outcome& h) {
    const std::size_t n = data.n();
    std::vector<CurvePtr> g_curves(n);
    std::vector<std::size_t> g_path_idx(n);
    std::vector<std::pair<CurvePtr, detail::CensoringPath>> path_cache;
    for (std::size_t i = 0; i < n; ++i) {
        CurvePtr g = g_model.curve_at(data.covariates().row(static_cast<Eigen::Index>(i)).transpose());
        std::size_t idx = path_cache.size();
        for (std::size_t c = 0; c < path_cache.size(); ++c) {
            if (path_cache[c].first == g) {
                idx = c;
                break;
            }
        }
        if (idx == path_cache.size()) {
            path_cache.emplace_back(g, detail::CensoringPath(*g));
        }
        g_curves[i] = std::move(g);
        g_path_idx[i] = idx;
    }

    std::vector<TransformTerms> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd w = data.covariates().row(static_cast<Eigen::Index>(i)).transpose();
        CurvePtr s = s_model.curve_at(w);
        CurveExpectation s_exp(*s, h);
        terms[i] = detail::terms_for_row(data.time(i), data.event(i), *g_curves[i],
                                         path_cache[g_path_idx[i]].second, s_exp, h,
                                         static_cast<long>(i));
    }
    return terms;
}

inline TransformedData transform_dataset(const Dataset& data, const ConditionalCurveModel& g_model,
                                         const ConditionalCurveModel& s_model, const Outcome& h,
                                         const Standardizer& standardizer) {
    TransformedData out;
    out.terms = compute_all_terms(data, g_model, s_model, h);
    out.d.resize(static_cast<Eigen::Index>(data.n()));
    for (std::size_t i = 0; i < data.n(); ++i) {
        out.d[static_cast<Eigen::Index>(i)] = out.terms[i].d();
    }
    out.x = standardizer.apply(data.covariates());
    return out;
}

}  // namespace cudl
