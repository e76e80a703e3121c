#pragma once

#include <cmath>
#include <limits>

#include "cudl/errors.hpp"

namespace cudl {

namespace detail {

/// Lower regularized incomplete gamma P(a,x) by its power series.
/// Converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 1000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) {
            break;
        }
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Upper regularized incomplete gamma Q(a,x) by continued fraction
/// (modified Lentz). Converges quickly for x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double f = d;
    for (int n = 1; n < 1000; ++n) {
        const double an = -n * (n - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) {
            d = tiny;
        }
        c = b + an / c;
        if (std::abs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) {
            break;
        }
    }
    return f * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a,x) = P(X > x) for X ~ Gamma(a, 1).
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) {
        throw InvalidParameterError("gamma_q needs a > 0 and x >= 0");
    }
    if (x == 0.0) {
        return 1.0;
    }
    if (x < a + 1.0) {
        return 1.0 - detail::gamma_p_series(a, x);
    }
    return detail::gamma_q_contfrac(a, x);
}

/// Regularized lower incomplete gamma P(a,x).
inline double gamma_p(double a, double x) {
    return 1.0 - gamma_q(a, x);
}

namespace detail {

inline double simpson_panel(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double simpson_recurse(F&& f, double a, double fa, double b, double fb, double m, double fm,
                       double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson_panel(a, m, fa, flm, fm);
    const double right = simpson_panel(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f on [a,b] to absolute tolerance tol.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-8) {
    if (!(b >= a)) {
        throw InvalidParameterError("integration needs b >= a");
    }
    if (a == b) {
        return 0.0;
    }
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(m);
    const double whole = detail::simpson_panel(a, b, fa, fm, fb);
    return detail::simpson_recurse(f, a, fa, b, fb, m, fm, whole, tol, 50);
}

}  // namespace cudl
