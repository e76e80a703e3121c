#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/rng.hpp"

namespace cudl {

enum class Head { sigmoid, relu };

struct NetworkConfig {
    int p = 0;
    int d1 = 15;
    Head head = Head::sigmoid;
    double eta = 0.0;
    int epochs = 100;
    int batch_size = 32;
    double dropout_rate = 0.20;
    double learning_rate = 0.001;
    double rms_decay = 0.9;
    double epsilon_stabilizer = 1e-7;
    std::uint64_t seed = 0;

    void validate() const {
        if (p < 0 || d1 < 1) {
            throw InvalidParameterError("network needs p >= 0 and d1 >= 1");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw InvalidParameterError("dropout rate must lie in [0,1)");
        }
        if (eta < 0.0 || epochs < 0 || batch_size < 1) {
            throw InvalidParameterError("invalid network training parameters");
        }
    }
};

/// Two-layer feedforward weights: ReLU hidden layer of d1 units and a
/// scalar head. Flattened length is p*d1 + 2*d1 + 1.
struct NetworkWeights {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;
    double b2 = 0.0;

    static NetworkWeights zeros(int p, int d1) {
        NetworkWeights w;
        w.w1 = Eigen::MatrixXd::Zero(p, d1);
        w.b1 = Eigen::VectorXd::Zero(d1);
        w.w2 = Eigen::VectorXd::Zero(d1);
        w.b2 = 0.0;
        return w;
    }

    std::size_t flattened_size() const {
        return static_cast<std::size_t>(w1.size() + b1.size() + w2.size()) + 1;
    }

    Eigen::VectorXd flatten() const {
        Eigen::VectorXd theta(static_cast<Eigen::Index>(flattened_size()));
        Eigen::Index at = 0;
        for (Eigen::Index j = 0; j < w1.cols(); ++j) {
            for (Eigen::Index i = 0; i < w1.rows(); ++i) {
                theta[at++] = w1(i, j);
            }
        }
        theta.segment(at, b1.size()) = b1;
        at += b1.size();
        theta.segment(at, w2.size()) = w2;
        at += w2.size();
        theta[at] = b2;
        return theta;
    }

    static NetworkWeights unflatten(const Eigen::VectorXd& theta, int p, int d1) {
        NetworkWeights w = zeros(p, d1);
        if (theta.size() != static_cast<Eigen::Index>(w.flattened_size())) {
            throw DimensionMismatchError("flattened weight length does not match dimensions");
        }
        Eigen::Index at = 0;
        for (Eigen::Index j = 0; j < d1; ++j) {
            for (Eigen::Index i = 0; i < p; ++i) {
                w.w1(i, j) = theta[at++];
            }
        }
        w.b1 = theta.segment(at, d1);
        at += d1;
        w.w2 = theta.segment(at, d1);
        at += d1;
        w.b2 = theta[at];
        return w;
    }

    double squared_norm() const {
        return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2 * b2;
    }
};

namespace detail {

inline double apply_head(double z, Head head) {
    if (head == Head::sigmoid) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    return z > 0.0 ? z : 0.0;
}

}  // namespace detail

/// Forward pass on one standardized input row.
inline double network_forward(const NetworkWeights& w, const Eigen::VectorXd& x, Head head) {
    if (x.size() != w.w1.rows()) {
        throw DimensionMismatchError("input width does not match network");
    }
    const Eigen::VectorXd hidden = (w.w1.transpose() * x + w.b1).cwiseMax(0.0);
    return detail::apply_head(hidden.dot(w.w2) + w.b2, head);
}

/// Forward pass on a standardized batch (rows are inputs).
inline Eigen::VectorXd network_forward_batch(const NetworkWeights& w, const Eigen::MatrixXd& x,
                                             Head head) {
    if (x.cols() != w.w1.rows()) {
        throw DimensionMismatchError("input width does not match network");
    }
    const Eigen::MatrixXd hidden = ((x * w.w1).rowwise() + w.b1.transpose()).cwiseMax(0.0);
    Eigen::VectorXd z2 = hidden * w.w2;
    z2.array() += w.b2;
    for (Eigen::Index i = 0; i < z2.size(); ++i) {
        z2[i] = detail::apply_head(z2[i], head);
    }
    return z2;
}

/// Mean squared residual on (x, d) plus eta times the squared norm of the
/// full weight vector, biases included.
inline double penalized_loss(const NetworkWeights& w, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& d, double eta, Head head) {
    if (x.rows() == 0) {
        throw InsufficientDataError("loss needs a nonempty batch");
    }
    const Eigen::VectorXd f = network_forward_batch(w, x, head);
    return (f - d).squaredNorm() / static_cast<double>(x.rows()) + eta * w.squared_norm();
}

namespace detail {

/// Objective handled by training: the plain transformed-L2 residual form,
/// or the decomposed form whose per-row loss is quad - 2 d f + f^2. The two
/// differ by a constant in f, and their gradients are computed so the
/// resulting update sequences agree bit for bit.
struct TrainTargets {
    Eigen::VectorXd d;
    Eigen::VectorXd quad;
    bool decomposed = false;
};

struct BatchGradients {
    NetworkWeights g;
    double loss = 0.0;
};

/// Forward/backward over one batch. mask empty means no dropout.
inline BatchGradients batch_gradients(const NetworkWeights& w, const Eigen::MatrixXd& x,
                                      const TrainTargets& t, const std::vector<Eigen::Index>& rows,
                                      double eta, Head head, const Eigen::MatrixXd& mask) {
    const auto bsz = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd xb(bsz, x.cols());
    Eigen::VectorXd db(bsz);
    for (Eigen::Index i = 0; i < bsz; ++i) {
        xb.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
        db[i] = t.d[rows[static_cast<std::size_t>(i)]];
    }

    const Eigen::MatrixXd z1 = (xb * w.w1).rowwise() + w.b1.transpose();
    Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
    if (mask.size() > 0) {
        a1.array() *= mask.array();
    }
    Eigen::VectorXd z2 = a1 * w.w2;
    z2.array() += w.b2;

    Eigen::VectorXd f(bsz);
    Eigen::VectorXd dz2(bsz);
    const double inv_b = 1.0 / static_cast<double>(bsz);
    double data_loss = 0.0;
    for (Eigen::Index i = 0; i < bsz; ++i) {
        double head_deriv;
        if (head == Head::sigmoid) {
            f[i] = 1.0 / (1.0 + std::exp(-z2[i]));
            head_deriv = f[i] * (1.0 - f[i]);
        } else {
            f[i] = z2[i] > 0.0 ? z2[i] : 0.0;
            head_deriv = z2[i] > 0.0 ? 1.0 : 0.0;
        }
        double upstream;
        if (t.decomposed) {
            upstream = 2.0 * f[i] - 2.0 * db[i];
            data_loss += t.quad[rows[static_cast<std::size_t>(i)]] - 2.0 * db[i] * f[i] + f[i] * f[i];
        } else {
            upstream = 2.0 * (f[i] - db[i]);
            const double r = f[i] - db[i];
            data_loss += r * r;
        }
        dz2[i] = upstream * head_deriv * inv_b;
    }

    BatchGradients out;
    out.loss = data_loss * inv_b + eta * w.squared_norm();
    out.g.w2 = a1.transpose() * dz2 + 2.0 * eta * w.w2;
    out.g.b2 = dz2.sum() + 2.0 * eta * w.b2;
    Eigen::MatrixXd da1 = dz2 * w.w2.transpose();
    if (mask.size() > 0) {
        da1.array() *= mask.array();
    }
    const Eigen::MatrixXd dz1 =
        (da1.array() * (z1.array() > 0.0).cast<double>()).matrix();
    out.g.w1 = xb.transpose() * dz1 + 2.0 * eta * w.w1;
    out.g.b1 = dz1.colwise().sum().transpose() + 2.0 * eta * w.b1;
    return out;
}

inline NetworkWeights glorot_init(int p, int d1, Rng& rng) {
    NetworkWeights w = NetworkWeights::zeros(p, d1);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(p + d1));
    for (Eigen::Index j = 0; j < d1; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
            w.w1(i, j) = lim1 * (2.0 * rng.uniform() - 1.0);
        }
    }
    const double lim2 = std::sqrt(6.0 / static_cast<double>(d1 + 1));
    for (Eigen::Index j = 0; j < d1; ++j) {
        w.w2[j] = lim2 * (2.0 * rng.uniform() - 1.0);
    }
    return w;
}

}  // namespace detail

/// Analytic gradient of penalized_loss without dropout; matches central
/// finite differences away from ReLU kinks.
inline NetworkWeights network_gradient(const NetworkWeights& w, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& d, double eta, Head head) {
    if (x.rows() == 0) {
        throw InsufficientDataError("gradient needs a nonempty batch");
    }
    detail::TrainTargets t;
    t.d = d;
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    return detail::batch_gradients(w, x, t, rows, eta, head, Eigen::MatrixXd()).g;
}

namespace detail {

/// RMSProp training over shuffled mini-batches with inverted dropout on the
/// hidden layer. Deterministic given the seed: with dropout 0 and a single
/// batch, no randomness is consumed after initialization.
inline NetworkWeights train_impl(const Eigen::MatrixXd& x, const TrainTargets& targets,
                                 const NetworkConfig& cfg) {
    cfg.validate();
    const auto n = x.rows();
    if (n == 0) {
        throw InsufficientDataError("training needs at least one row");
    }
    if (x.cols() != cfg.p) {
        throw DimensionMismatchError("training data width does not match config");
    }
    if (targets.d.size() != n || (targets.decomposed && targets.quad.size() != n)) {
        throw DimensionMismatchError("training target length does not match data");
    }

    Rng rng(cfg.seed);
    NetworkWeights w = detail::glorot_init(cfg.p, cfg.d1, rng);
    NetworkWeights v = NetworkWeights::zeros(cfg.p, cfg.d1);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto bsz = static_cast<Eigen::Index>(cfg.batch_size);
    const bool single_batch = bsz >= n;
    const double keep = 1.0 - cfg.dropout_rate;

    std::vector<Eigen::Index> batch_rows;
    Eigen::MatrixXd mask;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (!single_batch) {
            rng.shuffle(order);
        }
        int batch_index = 0;
        for (Eigen::Index start = 0; start < n; start += bsz, ++batch_index) {
            const Eigen::Index stop = std::min(n, start + bsz);
            batch_rows.assign(order.begin() + start, order.begin() + stop);
            if (cfg.dropout_rate > 0.0) {
                mask.resize(stop - start, cfg.d1);
                for (Eigen::Index i = 0; i < mask.rows(); ++i) {
                    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
                        mask(i, j) = rng.uniform() >= cfg.dropout_rate ? 1.0 / keep : 0.0;
                    }
                }
            } else {
                mask.resize(0, 0);
            }
            detail::BatchGradients bg =
                detail::batch_gradients(w, x, targets, batch_rows, cfg.eta, cfg.head, mask);
            if (!std::isfinite(bg.loss)) {
                throw DivergenceError("non-finite training loss", epoch, batch_index);
            }
            auto rms_step = [&](auto& theta, auto& vel, const auto& grad) {
                vel.array() =
                    cfg.rms_decay * vel.array() + (1.0 - cfg.rms_decay) * grad.array().square();
                theta.array() -=
                    cfg.learning_rate * grad.array() / (vel.array().sqrt() + cfg.epsilon_stabilizer);
            };
            rms_step(w.w1, v.w1, bg.g.w1);
            rms_step(w.b1, v.b1, bg.g.b1);
            rms_step(w.w2, v.w2, bg.g.w2);
            v.b2 = cfg.rms_decay * v.b2 + (1.0 - cfg.rms_decay) * bg.g.b2 * bg.g.b2;
            w.b2 -= cfg.learning_rate * bg.g.b2 / (std::sqrt(v.b2) + cfg.epsilon_stabilizer);
        }
    }
    return w;
}

}  // namespace detail

/// Trains on pseudo-responses with the transformed-L2 objective.
inline NetworkWeights network_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                                    const NetworkConfig& cfg) {
    detail::TrainTargets t;
    t.d = d;
    return detail::train_impl(x, t, cfg);
}

/// Trains by minimizing the decomposed doubly robust objective
/// quad - 2 d f + f^2; produces the same weights as the residual form.
inline NetworkWeights network_train_decomposed(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                                               const Eigen::VectorXd& quad,
                                               const NetworkConfig& cfg) {
    detail::TrainTargets t;
    t.d = d;
    t.quad = quad;
    t.decomposed = true;
    return detail::train_impl(x, t, cfg);
}

/// Standardize a raw covariate row, then run the forward pass.
inline double network_predict(const NetworkWeights& w, const Standardizer& standardizer,
                              const Eigen::VectorXd& raw, Head head) {
    return network_forward(w, standardizer.apply_row(raw), head);
}

}  // namespace cudl
