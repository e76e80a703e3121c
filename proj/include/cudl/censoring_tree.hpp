#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/kaplan_meier.hpp"
#include "cudl/logrank.hpp"

namespace cudl {

struct CensoringTreeConfig {
    std::size_t min_leaf = 30;
    double trunc_frac = 0.10;
    int max_depth = 10;
    double min_statistic = 0.1;
};

struct TreeNode {
    int covariate = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    CurvePtr curve;

    bool is_leaf() const { return covariate < 0; }
};

/// Survival tree for the censoring distribution. Splits maximize the
/// two-sample log-rank statistic on censoring events (flipped labels);
/// each leaf stores a Kaplan-Meier curve of the censoring time fitted
/// after truncation: the rows with the largest observed times in the leaf
/// are marked as failures first, which keeps the leaf curve positive at
/// every observed time.
class CensoringTree : public ConditionalCurveModel {
  public:
    CensoringTree(std::vector<TreeNode> nodes, std::size_t p)
        : nodes_(std::move(nodes)), p_(p) {}

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t p() const { return p_; }

    CurvePtr curve_at(const Eigen::VectorXd& w) const override {
        if (static_cast<std::size_t>(w.size()) != p_) {
            throw DimensionMismatchError("covariate width does not match fitted tree");
        }
        int idx = 0;
        while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
            const TreeNode& nd = nodes_[static_cast<std::size_t>(idx)];
            idx = w[nd.covariate] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes_[static_cast<std::size_t>(idx)].curve;
    }

  private:
    std::vector<TreeNode> nodes_;
    std::size_t p_;
};

namespace detail {

/// Leaf censoring curve with the largest ceil(trunc_frac * m) observed
/// times forced to failures (ties broken towards lower row index).
inline CurvePtr censoring_leaf_curve(const Dataset& data, const std::vector<std::size_t>& rows,
                                     double trunc_frac) {
    const std::size_t m = rows.size();
    std::vector<double> times(m);
    std::vector<int> cens_events(m);
    for (std::size_t r = 0; r < m; ++r) {
        times[r] = data.time(rows[r]);
        cens_events[r] = 1 - data.event(rows[r]);
    }
    const auto k = static_cast<std::size_t>(std::ceil(trunc_frac * static_cast<double>(m)));
    std::vector<std::size_t> by_time(m);
    std::iota(by_time.begin(), by_time.end(), std::size_t{0});
    std::sort(by_time.begin(), by_time.end(), [&](std::size_t a, std::size_t b) {
        if (times[a] != times[b]) {
            return times[a] > times[b];
        }
        return rows[a] < rows[b];
    });
    for (std::size_t r = 0; r < std::min(k, m); ++r) {
        cens_events[by_time[r]] = 0;
    }
    return km_fit(times, cens_events).curve_ptr();
}

struct CensoringTreeGrower {
    const Dataset& data;
    const CensoringTreeConfig& cfg;
    std::vector<int> cens_events;
    std::vector<int> all_covariates;
    std::vector<TreeNode> nodes;

    int grow(std::vector<std::size_t>& rows, int depth) {
        LogRankSplit split;
        if (depth < cfg.max_depth) {
            split = best_logrank_split(data.covariates(), data.times(), cens_events, rows,
                                       all_covariates, cfg.min_leaf);
        }
        const int idx = static_cast<int>(nodes.size());
        nodes.emplace_back();
        if (!split.found() || split.statistic < cfg.min_statistic) {
            nodes[static_cast<std::size_t>(idx)].curve =
                censoring_leaf_curve(data, rows, cfg.trunc_frac);
            return idx;
        }
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : rows) {
            if (data.covariates()(static_cast<Eigen::Index>(r), split.covariate) <= split.threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        rows.clear();
        rows.shrink_to_fit();
        nodes[static_cast<std::size_t>(idx)].covariate = split.covariate;
        nodes[static_cast<std::size_t>(idx)].threshold = split.threshold;
        const int left = grow(left_rows, depth + 1);
        nodes[static_cast<std::size_t>(idx)].left = left;
        const int right = grow(right_rows, depth + 1);
        nodes[static_cast<std::size_t>(idx)].right = right;
        return idx;
    }
};

}  // namespace detail

inline CensoringTree censoring_tree_fit(const Dataset& data, const CensoringTreeConfig& cfg = {}) {
    if (data.n() == 0) {
        throw InsufficientDataError("censoring tree needs at least one observation");
    }
    if (cfg.min_leaf == 0 || cfg.trunc_frac < 0.0 || cfg.trunc_frac > 1.0) {
        throw InvalidParameterError("invalid censoring tree configuration");
    }
    detail::CensoringTreeGrower grower{data, cfg, {}, {}, {}};
    grower.cens_events.resize(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        grower.cens_events[i] = 1 - data.event(i);
    }
    grower.all_covariates.resize(data.p());
    std::iota(grower.all_covariates.begin(), grower.all_covariates.end(), 0);
    std::vector<std::size_t> rows(data.n());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grower.grow(rows, 0);
    return CensoringTree(std::move(grower.nodes), data.p());
}

}  // namespace cudl
