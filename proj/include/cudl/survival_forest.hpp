#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/logrank.hpp"
#include "cudl/parallel.hpp"
#include "cudl/rng.hpp"

namespace cudl {

struct SurvivalForestConfig {
    std::size_t n_trees = 100;
    std::size_t mtry = 0;
    std::size_t min_leaf = 15;
    bool bootstrap = true;

    std::size_t resolve_mtry(std::size_t p) const {
        if (mtry > 0) {
            return std::min(mtry, p);
        }
        return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    }
};

/// Leaf Nelson-Aalen increments: hazard mass d/n at each distinct event
/// time of the leaf sample.
struct ForestLeaf {
    std::vector<double> times;
    std::vector<double> dh;
};

struct ForestNode {
    int covariate = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;

    bool is_leaf() const { return covariate < 0; }
};

struct ForestTree {
    std::vector<ForestNode> nodes;
    std::vector<ForestLeaf> leaves;

    const ForestLeaf& leaf_at(const Eigen::VectorXd& w) const {
        int idx = 0;
        while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
            const ForestNode& nd = nodes[static_cast<std::size_t>(idx)];
            idx = w[nd.covariate] <= nd.threshold ? nd.left : nd.right;
        }
        return leaves[static_cast<std::size_t>(nodes[static_cast<std::size_t>(idx)].leaf)];
    }
};

/// Random survival forest: log-rank-split trees on bootstrap samples,
/// aggregated by averaging leaf cumulative hazards over trees and
/// converting to survival via exp(-H).
class SurvivalForest : public ConditionalCurveModel {
  public:
    SurvivalForest(std::vector<ForestTree> trees, std::size_t p)
        : trees_(std::move(trees)), p_(p) {}

    const std::vector<ForestTree>& trees() const { return trees_; }
    std::size_t p() const { return p_; }

    CurvePtr curve_at(const Eigen::VectorXd& w) const override {
        if (static_cast<std::size_t>(w.size()) != p_) {
            throw DimensionMismatchError("covariate width does not match fitted forest");
        }
        std::vector<std::pair<double, double>> jumps;
        for (const ForestTree& tree : trees_) {
            const ForestLeaf& leaf = tree.leaf_at(w);
            for (std::size_t j = 0; j < leaf.times.size(); ++j) {
                jumps.emplace_back(leaf.times[j], leaf.dh[j]);
            }
        }
        std::stable_sort(jumps.begin(), jumps.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> times;
        std::vector<double> values;
        times.reserve(jumps.size());
        values.reserve(jumps.size());
        const double t_count = static_cast<double>(trees_.size());
        double h = 0.0;
        std::size_t i = 0;
        while (i < jumps.size()) {
            const double u = jumps[i].first;
            double dh = 0.0;
            for (; i < jumps.size() && jumps[i].first == u; ++i) {
                dh += jumps[i].second;
            }
            h += dh;
            times.push_back(u);
            values.push_back(std::exp(-h / t_count));
        }
        return std::make_shared<StepSurvivalCurve>(std::move(times), std::move(values));
    }

  private:
    std::vector<ForestTree> trees_;
    std::size_t p_;
};

namespace detail {

inline ForestLeaf nelson_aalen_leaf(const Dataset& data, const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.time(rows[a]) < data.time(rows[b]);
    });
    ForestLeaf leaf;
    std::size_t i = 0;
    std::size_t at_risk = rows.size();
    while (i < order.size()) {
        const double u = data.time(rows[order[i]]);
        std::size_t d = 0;
        std::size_t tied = 0;
        while (i + tied < order.size() && data.time(rows[order[i + tied]]) == u) {
            d += static_cast<std::size_t>(data.event(rows[order[i + tied]]));
            ++tied;
        }
        if (d > 0) {
            leaf.times.push_back(u);
            leaf.dh.push_back(static_cast<double>(d) / static_cast<double>(at_risk));
        }
        at_risk -= tied;
        i += tied;
    }
    return leaf;
}

struct ForestTreeGrower {
    const Dataset& data;
    const SurvivalForestConfig& cfg;
    std::size_t mtry;
    Rng rng;
    ForestTree tree;
    std::vector<int> cov_pool;

    int grow(std::vector<std::size_t>& rows) {
        const int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        LogRankSplit split;
        if (rows.size() >= 2 * cfg.min_leaf && mtry > 0) {
            std::vector<int> candidates = sample_covariates();
            split = best_logrank_split(data.covariates(), data.times(), data.events(), rows,
                                       candidates, cfg.min_leaf);
        }
        if (!split.found()) {
            const int leaf_idx = static_cast<int>(tree.leaves.size());
            tree.leaves.push_back(nelson_aalen_leaf(data, rows));
            tree.nodes[static_cast<std::size_t>(idx)].leaf = leaf_idx;
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
        tree.nodes[static_cast<std::size_t>(idx)].covariate = split.covariate;
        tree.nodes[static_cast<std::size_t>(idx)].threshold = split.threshold;
        const int left = grow(left_rows);
        tree.nodes[static_cast<std::size_t>(idx)].left = left;
        const int right = grow(right_rows);
        tree.nodes[static_cast<std::size_t>(idx)].right = right;
        return idx;
    }

    /// mtry distinct covariates, returned in ascending order so statistic
    /// ties resolve to the lowest index.
    std::vector<int> sample_covariates() {
        for (std::size_t k = 0; k < mtry; ++k) {
            const std::size_t j = k + rng.uniform_index(cov_pool.size() - k);
            std::swap(cov_pool[k], cov_pool[j]);
        }
        std::vector<int> out(cov_pool.begin(), cov_pool.begin() + static_cast<long>(mtry));
        std::sort(out.begin(), out.end());
        return out;
    }
};

}  // namespace detail

inline SurvivalForest forest_fit(const Dataset& data, const SurvivalForestConfig& cfg,
                                 std::uint64_t seed) {
    if (data.n() == 0) {
        throw InsufficientDataError("forest needs at least one observation");
    }
    if (cfg.n_trees == 0 || cfg.min_leaf == 0) {
        throw InvalidParameterError("forest needs n_trees >= 1 and min_leaf >= 1");
    }
    const std::size_t mtry = cfg.resolve_mtry(data.p());
    std::vector<ForestTree> trees(cfg.n_trees);
    parallel_for(cfg.n_trees, [&](std::size_t t) {
        detail::ForestTreeGrower grower{
            data, cfg, mtry, Rng(derive_seed(seed, {0x74726565ULL, t})), ForestTree{}, {}};
        grower.cov_pool.resize(data.p());
        std::iota(grower.cov_pool.begin(), grower.cov_pool.end(), 0);
        std::vector<std::size_t> rows(data.n());
        if (cfg.bootstrap) {
            for (std::size_t i = 0; i < data.n(); ++i) {
                rows[i] = grower.rng.uniform_index(data.n());
            }
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        grower.grow(rows);
        trees[t] = std::move(grower.tree);
    });
    return SurvivalForest(std::move(trees), data.p());
}

}  // namespace cudl
