#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cudl/errors.hpp"

namespace cudl {

/// One subject: follow-up time, failure indicator, covariate row.
/// event == 1 means the failure was observed, 0 means censored.
struct Observation {
    double time = 0.0;
    int event = 0;
    Eigen::VectorXd covariates;
};

/// Right-censored sample in column form. Covariates are n x p; p may be
/// zero for marginal (covariate-free) estimation.
class Dataset {
  public:
    Dataset() : covariates_(0, 0) {}

    Dataset(std::vector<double> times, std::vector<int> events, Eigen::MatrixXd covariates)
        : times_(std::move(times)), events_(std::move(events)), covariates_(std::move(covariates)) {
        validate();
    }

    std::size_t n() const { return times_.size(); }
    std::size_t p() const { return static_cast<std::size_t>(covariates_.cols()); }

    const std::vector<double>& times() const { return times_; }
    const std::vector<int>& events() const { return events_; }
    const Eigen::MatrixXd& covariates() const { return covariates_; }

    double time(std::size_t i) const { return times_[i]; }
    int event(std::size_t i) const { return events_[i]; }

    Observation row(std::size_t i) const {
        return Observation{times_[i], events_[i], covariates_.row(static_cast<Eigen::Index>(i)).transpose()};
    }

    /// Subset by row indices, preserving the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const {
        std::vector<double> t(indices.size());
        std::vector<int> e(indices.size());
        Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), covariates_.cols());
        for (std::size_t k = 0; k < indices.size(); ++k) {
            t[k] = times_[indices[k]];
            e[k] = events_[indices[k]];
            x.row(static_cast<Eigen::Index>(k)) = covariates_.row(static_cast<Eigen::Index>(indices[k]));
        }
        return Dataset(std::move(t), std::move(e), std::move(x));
    }

  private:
    void validate() const {
        if (events_.size() != times_.size()) {
            throw DimensionMismatchError("times and events lengths differ");
        }
        if (static_cast<std::size_t>(covariates_.rows()) != times_.size()) {
            throw DimensionMismatchError("covariate rows do not match sample size");
        }
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (!(times_[i] > 0.0) || !std::isfinite(times_[i])) {
                throw InvalidParameterError("follow-up times must be positive and finite (row " +
                                            std::to_string(i + 1) + ")");
            }
            if (events_[i] != 0 && events_[i] != 1) {
                throw InvalidParameterError("event indicators must be 0 or 1 (row " +
                                            std::to_string(i + 1) + ")");
            }
        }
        if (!covariates_.allFinite()) {
            throw InvalidParameterError("covariates must be finite");
        }
    }

    std::vector<double> times_;
    std::vector<int> events_;
    Eigen::MatrixXd covariates_;
};

/// Caps follow-up at `cap` and flips rows reaching the cap to events.
/// A subject still at risk at the cap has min(T, cap) = cap observed
/// exactly, so the capped outcome is uncensored there. Both the
/// restricted-mean horizon tau and a survival-probability time t use
/// this same operation.
inline Dataset restrict_dataset(const Dataset& data, double cap) {
    if (!(cap > 0.0) || !std::isfinite(cap)) {
        throw InvalidParameterError("restriction cap must be positive and finite");
    }
    std::vector<double> t(data.n());
    std::vector<int> e(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.time(i) >= cap) {
            t[i] = cap;
            e[i] = 1;
        } else {
            t[i] = data.time(i);
            e[i] = data.event(i);
        }
    }
    return Dataset(std::move(t), std::move(e), data.covariates());
}

/// Per-column location/scale transform fitted on training covariates.
struct Standardizer {
    Eigen::VectorXd center;
    Eigen::VectorXd scale;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.cols() != center.size()) {
            throw DimensionMismatchError("standardizer width does not match covariates");
        }
        return (x.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
    }

    Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const {
        if (x.size() != center.size()) {
            throw DimensionMismatchError("standardizer width does not match covariates");
        }
        return (x - center).array() / scale.array();
    }
};

/// Sample mean and sd (n-1 denominator) per column. Constant columns get
/// scale 1 so they map to exact zeros.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& x) {
    if (x.rows() < 2) {
        throw InsufficientDataError("standardizer needs at least two rows");
    }
    Standardizer s;
    s.center = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - s.center.transpose();
    s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows() - 1))
                  .sqrt()
                  .matrix();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
        if (s.scale[j] == 0.0) {
            s.scale[j] = 1.0;
        }
    }
    return s;
}

}  // namespace cudl
