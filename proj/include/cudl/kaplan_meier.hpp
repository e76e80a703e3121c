#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"

namespace cudl {

/// Product-limit survival estimate. Jumps sit at distinct observed event
/// times; censored-only times leave the curve flat.
class KaplanMeier : public ConditionalCurveModel {
  public:
    explicit KaplanMeier(CurvePtr curve) : curve_(std::move(curve)) {}

    const StepSurvivalCurve& curve() const { return *curve_; }
    CurvePtr curve_ptr() const { return curve_; }

    CurvePtr curve_at(const Eigen::VectorXd&) const override { return curve_; }

  private:
    CurvePtr curve_;
};

inline KaplanMeier km_fit(const std::vector<double>& times, const std::vector<int>& events) {
    if (times.empty()) {
        throw InsufficientDataError("Kaplan-Meier needs at least one observation");
    }
    if (times.size() != events.size()) {
        throw DimensionMismatchError("times and events lengths differ");
    }
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    std::vector<double> jump_times;
    std::vector<double> values;
    double surv = 1.0;
    std::size_t i = 0;
    std::size_t at_risk = times.size();
    while (i < order.size()) {
        const double u = times[order[i]];
        std::size_t d = 0;
        std::size_t tied = 0;
        while (i + tied < order.size() && times[order[i + tied]] == u) {
            d += static_cast<std::size_t>(events[order[i + tied]]);
            ++tied;
        }
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            jump_times.push_back(u);
            values.push_back(surv);
        }
        at_risk -= tied;
        i += tied;
    }
    return KaplanMeier(std::make_shared<StepSurvivalCurve>(std::move(jump_times), std::move(values)));
}

inline KaplanMeier km_fit(const Dataset& data) {
    return km_fit(data.times(), data.events());
}

}  // namespace cudl
