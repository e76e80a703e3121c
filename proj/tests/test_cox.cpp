#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cudl/cox.hpp"
#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/kaplan_meier.hpp"
#include "cudl/rng.hpp"

#include "helpers.hpp"

using namespace cudl;

namespace {

/// Breslow log partial likelihood computed directly from its definition.
double brute_loglik(const Eigen::MatrixXd& x, const std::vector<double>& times,
                    const std::vector<int>& events, const Eigen::VectorXd& beta) {
    double ll = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] != 1) {
            continue;
        }
        double risk_sum = 0.0;
        for (std::size_t r = 0; r < times.size(); ++r) {
            if (times[r] >= times[i]) {
                risk_sum += std::exp(x.row(static_cast<Eigen::Index>(r)).dot(beta));
            }
        }
        ll += x.row(static_cast<Eigen::Index>(i)).dot(beta) - std::log(risk_sum);
    }
    return ll;
}

Dataset six_row_fixture() {
    return testutil::make_dataset({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, {1, 1, 0, 1, 1, 1},
                                  {{0.5}, {-0.2}, {1.1}, {-0.7}, {0.4}, {-1.0}});
}

}  // namespace

TEST_CASE("cox fit on symmetric two-group data gives a zero coefficient") {
    const Dataset data = testutil::make_dataset({1.0, 1.0, 2.0, 2.0, 3.0, 3.0}, {1, 1, 1, 1, 1, 1},
                                                {{1.0}, {-1.0}, {1.0}, {-1.0}, {1.0}, {-1.0}});
    const CoxModel model = cox_fit(data);
    REQUIRE(model.coefficients[0] == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("covariate-free cox model reduces to nelson-aalen") {
    const Dataset data(std::vector<double>{1.0, 2.0, 2.0, 3.0, 4.0},
                       std::vector<int>{1, 1, 0, 1, 0}, Eigen::MatrixXd(5, 0));
    const CoxModel model = cox_fit(data);
    REQUIRE(model.coefficients.size() == 0);
    REQUIRE(model.baseline_times == std::vector<double>{1.0, 2.0, 3.0});
    REQUIRE(model.baseline_cumhaz[0] == Catch::Approx(1.0 / 5.0).epsilon(1e-14));
    REQUIRE(model.baseline_cumhaz[1] == Catch::Approx(1.0 / 5.0 + 1.0 / 4.0).epsilon(1e-14));
    REQUIRE(model.baseline_cumhaz[2] == Catch::Approx(1.0 / 5.0 + 1.0 / 4.0 + 1.0 / 2.0)
                                            .epsilon(1e-14));
}

TEST_CASE("one-covariate fit matches a grid-search oracle") {
    const Dataset data = six_row_fixture();
    const CoxModel model = cox_fit(data);

    Eigen::MatrixXd centered = data.covariates();
    const double mean = centered.col(0).mean();
    centered.col(0).array() -= mean;

    double best_beta = 0.0;
    double best_ll = brute_loglik(centered, data.times(), data.events(),
                                  Eigen::VectorXd::Zero(1));
    double lo = -6.0;
    double hi = 6.0;
    double step = 0.01;
    for (int refine = 0; refine < 3; ++refine) {
        for (double b = lo; b <= hi; b += step) {
            Eigen::VectorXd beta(1);
            beta << b;
            const double ll = brute_loglik(centered, data.times(), data.events(), beta);
            if (ll > best_ll) {
                best_ll = ll;
                best_beta = b;
            }
        }
        lo = best_beta - 2.0 * step;
        hi = best_beta + 2.0 * step;
        step /= 10.0;
    }
    REQUIRE(model.coefficients[0] == Catch::Approx(best_beta).margin(1e-3));

    SECTION("fitted likelihood is no worse than the null model") {
        Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(1);
        REQUIRE(brute_loglik(centered, data.times(), data.events(), model.coefficients) >=
                brute_loglik(centered, data.times(), data.events(), beta0));
    }
    SECTION("score vanishes at the fitted coefficients") {
        REQUIRE(model.gradient_norm < 1e-6);
    }
}

TEST_CASE("breslow baseline hand check") {
    const Dataset data = six_row_fixture();
    const CoxModel model = cox_fit(data);
    const Eigen::VectorXd beta = model.coefficients;

    Eigen::MatrixXd centered = data.covariates();
    centered.col(0).array() -= model.center[0];

    std::vector<double> risk(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        risk[i] = std::exp(centered(static_cast<Eigen::Index>(i), 0) * beta[0]);
    }
    double want = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.event(i) != 1) {
            continue;
        }
        double denom = 0.0;
        for (std::size_t r = 0; r < data.n(); ++r) {
            if (data.time(r) >= data.time(i)) {
                denom += risk[r];
            }
        }
        want += 1.0 / denom;
        REQUIRE(model.baseline_times[k] == data.time(i));
        REQUIRE(model.baseline_cumhaz[k] == Catch::Approx(want).epsilon(1e-12));
        ++k;
    }
    REQUIRE(k == model.baseline_times.size());
}

TEST_CASE("cox survival predictions") {
    const Dataset data = six_row_fixture();
    const CoxModel model = cox_fit(data);

    SECTION("survival is one at time zero and nonincreasing") {
        Eigen::VectorXd w(1);
        w << 0.8;
        REQUIRE(cox_predict_survival(model, w, 0.0) == 1.0);
        double prev = 1.0;
        for (double t = 0.5; t <= 7.0; t += 0.5) {
            const double s = cox_predict_survival(model, w, t);
            REQUIRE(s <= prev + 1e-15);
            REQUIRE(s >= 0.0);
            prev = s;
        }
    }
    SECTION("at the center the curve is the baseline") {
        Eigen::VectorXd w(1);
        w << model.center[0];
        for (std::size_t j = 0; j < model.baseline_times.size(); ++j) {
            REQUIRE(cox_predict_survival(model, w, model.baseline_times[j]) ==
                    Catch::Approx(std::exp(-model.baseline_cumhaz[j])).epsilon(1e-14));
        }
    }
    SECTION("restricted mean agrees with the curve integral") {
        Eigen::VectorXd w(1);
        w << 0.2;
        const CurvePtr curve = model.survival_curve(w);
        REQUIRE(cox_predict_rms(model, w, 4.5) ==
                restricted_mean_from_curve(*curve, 4.5));
        REQUIRE(cox_predict_rms(model, w, 4.5) > 0.0);
    }
    SECTION("width mismatch is rejected") {
        Eigen::VectorXd w(2);
        w << 0.1, 0.2;
        REQUIRE_THROWS_AS(cox_predict_survival(model, w, 1.0), DimensionMismatchError);
    }
}

TEST_CASE("cox on a larger simulated sample tracks the generating coefficient") {
    Rng rng(66);
    const std::size_t n = 800;
    std::vector<double> times;
    std::vector<int> events;
    std::vector<std::vector<double>> covs;
    const double beta_true = 0.7;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = rng.normal();
        const double t_fail = rng.exponential(1.0) / std::exp(beta_true * w);
        const double t_cens = rng.exponential(2.0);
        times.push_back(std::min(t_fail, t_cens));
        events.push_back(t_fail <= t_cens ? 1 : 0);
        covs.push_back({w});
    }
    const Dataset data = testutil::make_dataset(std::move(times), std::move(events), covs);
    const CoxModel model = cox_fit(data);
    REQUIRE(model.coefficients[0] == Catch::Approx(beta_true).margin(0.15));
}

TEST_CASE("perfect separation raises a separation error") {
    std::vector<double> times;
    std::vector<int> events;
    std::vector<std::vector<double>> covs;
    for (int i = 0; i < 20; ++i) {
        const bool early = i < 10;
        times.push_back(early ? 1.0 + 0.1 * i : 10.0 + 0.1 * i);
        events.push_back(1);
        covs.push_back({early ? 0.05 : -0.05});
    }
    const Dataset data = testutil::make_dataset(std::move(times), std::move(events), covs);
    REQUIRE_THROWS_AS(cox_fit(data), SeparationError);
}

TEST_CASE("cox fit requires events") {
    const Dataset data = testutil::make_dataset({1.0, 2.0}, {0, 0}, {{0.1}, {0.2}});
    REQUIRE_THROWS_AS(cox_fit(data), InsufficientDataError);
}
