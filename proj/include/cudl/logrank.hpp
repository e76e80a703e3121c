#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cudl/errors.hpp"

namespace cudl {

/// Axis-aligned split chosen by the two-sample log-rank statistic.
struct LogRankSplit {
    int covariate = -1;
    double threshold = 0.0;
    double statistic = 0.0;

    bool found() const { return covariate >= 0; }
};

namespace detail {

/// Per-node event bookkeeping for log-rank computations. Rows are bucketed
/// by the last event time at or below their own time, so at-risk counts per
/// group reduce to suffix sums over buckets.
struct NodeEventTable {
    std::vector<double> event_times;
    std::vector<double> d;
    std::vector<double> n;
    std::vector<double> var_coef;
    std::vector<int> bucket;
};

template <typename TimeAt, typename EventAt>
NodeEventTable build_event_table(std::size_t n_rows, TimeAt time_at, EventAt event_at) {
    NodeEventTable tab;
    std::vector<double> ev;
    ev.reserve(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (event_at(r) == 1) {
            ev.push_back(time_at(r));
        }
    }
    std::sort(ev.begin(), ev.end());
    ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    tab.event_times = std::move(ev);
    const std::size_t K = tab.event_times.size();
    tab.d.assign(K, 0.0);
    tab.bucket.resize(n_rows);
    std::vector<double> risk_count(K + 1, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double t = time_at(r);
        auto it = std::upper_bound(tab.event_times.begin(), tab.event_times.end(), t);
        const int b = static_cast<int>(it - tab.event_times.begin()) - 1;
        tab.bucket[r] = b;
        if (b >= 0) {
            risk_count[static_cast<std::size_t>(b)] += 1.0;
            if (event_at(r) == 1 && tab.event_times[static_cast<std::size_t>(b)] == t) {
                tab.d[static_cast<std::size_t>(b)] += 1.0;
            }
        }
    }
    tab.n.assign(K, 0.0);
    double acc = static_cast<double>(n_rows);
    double below = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        tab.n[j] = acc - below;
        below += risk_count[j];
    }
    tab.var_coef.assign(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
        if (tab.n[j] > 1.0) {
            tab.var_coef[j] =
                tab.d[j] * (tab.n[j] - tab.d[j]) / ((tab.n[j] - 1.0) * tab.n[j] * tab.n[j]);
        }
    }
    return tab;
}

}  // namespace detail

/// Two-sample log-rank chi-square for an explicit group assignment.
/// Returns 0 when the variance degenerates (one group empty, no events).
inline double logrank_statistic(const std::vector<double>& times, const std::vector<int>& events,
                                const std::vector<int>& in_group) {
    if (times.size() != events.size() || times.size() != in_group.size()) {
        throw DimensionMismatchError("log-rank inputs have differing lengths");
    }
    auto tab = detail::build_event_table(
        times.size(), [&](std::size_t r) { return times[r]; },
        [&](std::size_t r) { return events[r]; });
    const std::size_t K = tab.event_times.size();
    std::vector<double> d_left(K, 0.0);
    std::vector<double> cnt_left(K, 0.0);
    for (std::size_t r = 0; r < times.size(); ++r) {
        if (in_group[r] && tab.bucket[r] >= 0) {
            const auto b = static_cast<std::size_t>(tab.bucket[r]);
            cnt_left[b] += 1.0;
            if (events[r] == 1 && tab.event_times[b] == times[r]) {
                d_left[b] += 1.0;
            }
        }
    }
    double u = 0.0;
    double v = 0.0;
    double n_left = 0.0;
    for (std::size_t j = K; j-- > 0;) {
        n_left += cnt_left[j];
        u += d_left[j] - tab.d[j] * n_left / tab.n[j];
        v += tab.var_coef[j] * n_left * (tab.n[j] - n_left);
    }
    return v > 0.0 ? u * u / v : 0.0;
}

/// Best log-rank split over the given covariates for the node rows.
/// Thresholds are midpoints of consecutive distinct covariate values; both
/// children must keep at least min_leaf rows. Ties in the statistic keep
/// the lowest covariate index, then the lowest threshold.
inline LogRankSplit best_logrank_split(const Eigen::MatrixXd& covariates,
                                       const std::vector<double>& times,
                                       const std::vector<int>& events,
                                       const std::vector<std::size_t>& rows,
                                       const std::vector<int>& candidate_covariates,
                                       std::size_t min_leaf) {
    LogRankSplit best;
    const std::size_t m = rows.size();
    if (m < 2 * min_leaf) {
        return best;
    }
    auto tab = detail::build_event_table(
        m, [&](std::size_t r) { return times[rows[r]]; },
        [&](std::size_t r) { return events[rows[r]]; });
    const std::size_t K = tab.event_times.size();
    if (K == 0) {
        return best;
    }

    std::vector<std::size_t> order(m);
    std::vector<double> vals(m);
    std::vector<double> d_left(K);
    std::vector<double> cnt_left(K);
    for (int cov : candidate_covariates) {
        for (std::size_t r = 0; r < m; ++r) {
            vals[r] = covariates(static_cast<Eigen::Index>(rows[r]), cov);
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        if (vals[order.front()] == vals[order.back()]) {
            continue;
        }
        std::fill(d_left.begin(), d_left.end(), 0.0);
        std::fill(cnt_left.begin(), cnt_left.end(), 0.0);
        std::size_t moved = 0;
        while (moved < m) {
            const double v = vals[order[moved]];
            std::size_t g = moved;
            for (; g < m && vals[order[g]] == v; ++g) {
                const std::size_t r = order[g];
                if (tab.bucket[r] >= 0) {
                    const auto b = static_cast<std::size_t>(tab.bucket[r]);
                    cnt_left[b] += 1.0;
                    if (events[rows[r]] == 1 && tab.event_times[b] == times[rows[r]]) {
                        d_left[b] += 1.0;
                    }
                }
            }
            moved = g;
            if (moved >= m) {
                break;
            }
            if (moved < min_leaf || m - moved < min_leaf) {
                continue;
            }
            double u = 0.0;
            double var = 0.0;
            double n_left = 0.0;
            for (std::size_t j = K; j-- > 0;) {
                n_left += cnt_left[j];
                u += d_left[j] - tab.d[j] * n_left / tab.n[j];
                var += tab.var_coef[j] * n_left * (tab.n[j] - n_left);
            }
            if (var <= 0.0) {
                continue;
            }
            const double stat = u * u / var;
            if (stat > best.statistic) {
                best.covariate = cov;
                best.threshold = 0.5 * (v + vals[order[moved]]);
                best.statistic = stat;
            }
        }
    }
    return best;
}

}  // namespace cudl
