#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "cudl/censoring_tree.hpp"
#include "cudl/curves.hpp"
#include "cudl/data.hpp"
#include "cudl/errors.hpp"
#include "cudl/kaplan_meier.hpp"
#include "cudl/rng.hpp"
#include "cudl/simulation.hpp"
#include "cudl/survival_forest.hpp"
#include "cudl/transforms.hpp"

#include "helpers.hpp"

using namespace cudl;

namespace {

StepSurvivalCurve random_positive_curve(Rng& rng, std::size_t n_jumps, double floor) {
    std::vector<double> times;
    for (std::size_t j = 0; j < n_jumps; ++j) {
        times.push_back(rng.uniform() * 5.0 + 0.05);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<double> values;
    double v = 1.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        v *= 0.4 + 0.55 * rng.uniform();
        values.push_back(std::max(v, floor));
    }
    for (std::size_t j = 1; j < values.size(); ++j) {
        values[j] = std::min(values[j], values[j - 1]);
    }
    return StepSurvivalCurve(std::move(times), std::move(values));
}

}  // namespace

TEST_CASE("transform hand example") {
    const StepSurvivalCurve g({2.0}, {0.5});
    const StepSurvivalCurve s({1.0, 3.0}, {0.5, 0.0});
    Observation obs;
    obs.time = 2.0;
    obs.event = 0;

    const TermTriple k1 = compute_terms(obs, g, s, Outcome::identity(), 1);
    REQUIRE(k1.a == 0.0);
    REQUIRE(k1.b == Catch::Approx(6.0).epsilon(1e-14));
    REQUIRE(k1.c == Catch::Approx(3.0).epsilon(1e-14));
    REQUIRE(k1.a + k1.b - k1.c == Catch::Approx(3.0).epsilon(1e-14));

    const TermTriple k0 = compute_terms(obs, g, s, Outcome::identity(), 0);
    REQUIRE(k0.a + k0.b - k0.c == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("uncensored row with unit censoring curve") {
    const StepSurvivalCurve unit_g;
    const StepSurvivalCurve s({1.0, 4.0}, {0.6, 0.0});
    Observation obs;
    obs.time = 2.5;
    obs.event = 1;

    SECTION("a term is the plain outcome power, b and c vanish") {
        const TermTriple k1 = compute_terms(obs, unit_g, s, Outcome::identity(), 1);
        REQUIRE(k1.a == 2.5);
        REQUIRE(k1.b == 0.0);
        REQUIRE(k1.c == 0.0);
        const TermTriple k2 = compute_terms(obs, unit_g, s, Outcome::identity(), 2);
        REQUIRE(k2.a == 2.5 * 2.5);
        const TermTriple ind = compute_terms(obs, unit_g, s, Outcome::at_least(2.0), 1);
        REQUIRE(ind.a == 1.0);
    }
}

TEST_CASE("censored row with unit censoring curve is the conditional mean") {
    const StepSurvivalCurve unit_g;
    Rng rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        const StepSurvivalCurve s = random_positive_curve(rng, 6, 0.0);
        const double c_time = s.jump_times().front() * 0.9;
        Observation obs;
        obs.time = c_time;
        obs.event = 0;
        const TermTriple k1 = compute_terms(obs, unit_g, s, Outcome::identity(), 1);
        REQUIRE(k1.b == Catch::Approx(m_k(s, c_time, 1, Outcome::identity())).epsilon(1e-14));
        REQUIRE(k1.a == 0.0);
        REQUIRE(k1.c == 0.0);
    }
}

TEST_CASE("terms agree with a straight-line oracle on random curves") {
    Rng rng(88);
    const Outcome outcomes[] = {Outcome::identity(), Outcome::at_least(1.5)};
    for (int rep = 0; rep < 50; ++rep) {
        const StepSurvivalCurve g = random_positive_curve(rng, 8, 0.05);
        const StepSurvivalCurve base = random_positive_curve(rng, 8, 0.05);
        std::vector<double> s_times = base.jump_times();
        std::vector<double> s_values = base.values();
        s_times.push_back(10.0);
        s_values.push_back(0.0);
        const StepSurvivalCurve s(std::move(s_times), std::move(s_values));
        Observation obs;
        obs.time = rng.uniform() * 5.0 + 0.01;
        obs.event = rng.uniform() < 0.5 ? 1 : 0;
        for (const Outcome& h : outcomes) {
            for (int k = 0; k <= 2; ++k) {
                const TermTriple got = compute_terms(obs, g, s, h, k);
                const testutil::BruteTerms want = testutil::brute_terms(obs.time, obs.event, g, s, h, k);
                REQUIRE(got.a == Catch::Approx(want.a).margin(1e-12).epsilon(1e-10));
                REQUIRE(got.b == Catch::Approx(want.b).margin(1e-12).epsilon(1e-10));
                REQUIRE(got.c == Catch::Approx(want.c).margin(1e-12).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("zeroth moment identity holds row by row on fitted curves") {
    SettingConfig sim;
    sim.setting = 1;
    sim.n = 200;
    sim.p = 15;
    sim.seed = 42;
    const Dataset data = simulate(sim);

    const CensoringTree g_tree = censoring_tree_fit(data, {});
    SurvivalForestConfig fcfg;
    fcfg.n_trees = 25;
    const SurvivalForest s_forest = forest_fit(data, fcfg, 7);

    for (const Outcome& h : {Outcome::identity(), Outcome::at_least(0.5)}) {
        const std::vector<TransformTerms> terms = compute_all_terms(data, g_tree, s_forest, h);
        REQUIRE(terms.size() == data.n());
        for (const TransformTerms& t : terms) {
            REQUIRE(std::abs(t.identity_gap()) < 1e-10);
        }
    }
}

TEST_CASE("fully uncensored data reproduces the outcome exactly") {
    Rng rng(5);
    std::vector<double> times;
    std::vector<int> events;
    std::vector<std::vector<double>> covs;
    for (int i = 0; i < 40; ++i) {
        times.push_back(rng.exponential(1.0));
        events.push_back(1);
        covs.push_back({rng.normal()});
    }
    const Dataset data = testutil::make_dataset(times, events, covs);
    const UnitCurveModel unit;
    Standardizer std_fit = fit_standardizer(data.covariates());
    const TransformedData td =
        transform_dataset(data, unit, unit, Outcome::identity(), std_fit);
    for (std::size_t i = 0; i < data.n(); ++i) {
        REQUIRE(td.d[static_cast<Eigen::Index>(i)] == data.time(i));
    }
    REQUIRE(td.x.rows() == 40);
    REQUIRE(td.x.cols() == 1);
}

TEST_CASE("restricted rows at the cap get pseudo-response one for the brier outcome") {
    SettingConfig sim;
    sim.setting = 1;
    sim.n = 150;
    sim.p = 15;
    sim.seed = 13;
    const Dataset data = simulate(sim);
    std::vector<double> sorted = data.times();
    std::sort(sorted.begin(), sorted.end());
    const double t = sorted[sorted.size() / 2];

    const Dataset restricted = restrict_dataset(data, t);
    const UnitCurveModel unit;
    const KaplanMeier s_km = km_fit(restricted);
    Standardizer std_fit = fit_standardizer(restricted.covariates());
    const TransformedData td =
        transform_dataset(restricted, unit, s_km, Outcome::at_least(t), std_fit);
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.time(i) >= t) {
            REQUIRE(restricted.event(i) == 1);
            REQUIRE(td.d[static_cast<Eigen::Index>(i)] == 1.0);
        }
    }
}

TEST_CASE("positivity failure names the offending row") {
    const StepSurvivalCurve g({1.0}, {0.0});
    const StepSurvivalCurve s({3.0}, {0.0});
    Observation obs;
    obs.time = 2.0;
    obs.event = 1;
    try {
        compute_terms(obs, g, s, Outcome::identity(), 1, 4);
        FAIL("expected PositivityError");
    } catch (const PositivityError& e) {
        REQUIRE(e.row() == 4);
        REQUIRE(std::string(e.what()).find("row 5") != std::string::npos);
    }
}

TEST_CASE("invalid moment order is rejected") {
    const StepSurvivalCurve unit_g;
    Observation obs;
    obs.time = 1.0;
    obs.event = 1;
    REQUIRE_THROWS_AS(compute_terms(obs, unit_g, unit_g, Outcome::identity(), 3),
                      InvalidParameterError);
    REQUIRE_THROWS_AS(compute_terms(obs, unit_g, unit_g, Outcome::identity(), -1),
                      InvalidParameterError);
}
