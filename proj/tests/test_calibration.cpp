#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fdidet/calibration.hpp"
#include "fdidet/errors.hpp"

using namespace fdidet;

TEST_CASE("step_schedules at n = 0 returns the base gains") {
    SpsaSchedule s{0.1, 0.05, 0.1};
    auto [a, b, d] = step_schedules(s, 0);
    CHECK(a == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(b == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(d == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("schedule decay rates: timescale separation and square summability") {
    SpsaSchedule s{0.1, 0.05, 0.1};
    // b(n)/a(n) ~ (n+1)^{-0.2} -> 0 (fast/slow timescale separation)
    auto [a1, b1, d1] = step_schedules(s, 10);
    auto [a2, b2, d2] = step_schedules(s, 100000);
    CHECK(b2 / a2 < 0.2 * (b1 / a1));
    double expected = std::pow(11.0 / 100001.0, 0.2);
    CHECK((b2 / a2) / (b1 / a1) == doctest::Approx(expected).epsilon(1e-10));
    // sum a(n)^2 / delta(n)^2 over a long horizon stays bounded
    double acc = 0.0;
    for (int n = 0; n < 1000000; ++n) {
        auto [a, b, d] = step_schedules(s, n);
        acc += (a * a) / (d * d);
    }
    CHECK(acc < 10.0);
    CHECK(std::isfinite(acc));
}

TEST_CASE("SPSA finds the minimizer of a noisy quadratic") {
    // E[d | Gamma] = (Gamma - 0.6)^2 with common additive noise at both
    // perturbations, so the gradient estimate is exact up to the SPSA bias.
    SpsaObjective objective = [](int, double gp, double gm, double g, double,
                                 std::mt19937_64& rng) {
        std::normal_distribution<double> nd(0.0, 0.1);
        double noise = nd(rng);
        SpsaCostSample s;
        s.d_plus = (gp - 0.6) * (gp - 0.6) + noise;
        s.d_minus = (gm - 0.6) * (gm - 0.6) + noise;
        std::bernoulli_distribution fa(std::min(1.0, std::max(0.0, 1.0 - g)));
        s.fa_at_gamma = fa(rng);
        return s;
    };
    CalibrationResult r =
        spsa_calibrate(objective, SpsaSchedule{0.1, 0.05, 0.1}, 0.1, 5000, 71, 0.2, 1.0);
    CHECK(std::abs(r.gamma_star - 0.6) < 0.02);
}

TEST_CASE("SPSA iterates respect the projection bounds") {
    SpsaObjective objective = [](int, double gp, double gm, double, double,
                                 std::mt19937_64& rng) {
        std::normal_distribution<double> nd(0.0, 1.0);
        SpsaCostSample s;
        s.d_plus = 100.0 * gp + nd(rng);
        s.d_minus = 100.0 * gm + nd(rng);
        s.fa_at_gamma = false;
        return s;
    };
    // Enormous gains: every update overshoots, projection must clamp.
    CalibrationResult r =
        spsa_calibrate(objective, SpsaSchedule{1000.0, 1000.0, 0.3}, 0.1, 200, 3, 0.5, 1.0);
    for (const auto& p : r.trace) {
        CHECK(p.gamma >= 0.0);
        CHECK(p.gamma <= 1.0);
        CHECK(p.lambda >= 0.0);
    }
}

TEST_CASE("SPSA is deterministic given the seed") {
    SpsaObjective objective = [](int, double gp, double gm, double g, double,
                                 std::mt19937_64& rng) {
        std::normal_distribution<double> nd(0.0, 0.3);
        double noise = nd(rng);
        SpsaCostSample s;
        s.d_plus = (gp - 0.4) * (gp - 0.4) + noise;
        s.d_minus = (gm - 0.4) * (gm - 0.4) + noise;
        s.fa_at_gamma = g < 0.5;
        return s;
    };
    auto r1 = spsa_calibrate(objective, SpsaSchedule{0.1, 0.05, 0.1}, 0.1, 500, 42);
    auto r2 = spsa_calibrate(objective, SpsaSchedule{0.1, 0.05, 0.1}, 0.1, 500, 42);
    CHECK(r1.gamma_star == r2.gamma_star);
    CHECK(r1.lambda_star == r2.lambda_star);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
        CHECK(r1.trace[i].gamma == r2.trace[i].gamma);
        CHECK(r1.trace[i].lambda == r2.trace[i].lambda);
        CHECK(r1.trace[i].fa == r2.trace[i].fa);
    }
}

TEST_CASE("Robbins-Monro drives the Bernoulli false-alarm rate to alpha") {
    // P(FA | eta) = min(1, c/eta) with c = 2: the root of P(FA) = alpha
    // at alpha = 0.1 is eta* = c / alpha = 20.
    const double c = 2.0;
    FalseAlarmObjective objective = [c](int, double eta, std::mt19937_64& rng) {
        double p = eta <= c ? 1.0 : c / eta;
        std::bernoulli_distribution fa(p);
        return fa(rng);
    };
    double eta = scalar_threshold_calibrate(objective, 0.1, 4.0, 200000, 11, 5.0);
    CHECK(std::abs(eta - 20.0) < 0.05 * 20.0);
}

TEST_CASE("Robbins-Monro with alpha = 1 collapses the threshold to zero") {
    FalseAlarmObjective objective = [](int, double eta, std::mt19937_64& rng) {
        std::bernoulli_distribution fa(eta > 0.5 ? 0.2 : 0.9);
        return fa(rng);
    };
    double eta = scalar_threshold_calibrate(objective, 1.0, 4.0, 5000, 2, 10.0);
    // 1_FA - 1 <= 0 every step, so the iterate is non-increasing toward 0.
    CHECK(eta < 0.5);
    CHECK_THROWS_AS(scalar_threshold_calibrate(objective, 0.0, 4.0, 10, 2, 1.0), ConfigError);
    CHECK_THROWS_AS(scalar_threshold_calibrate(objective, 1.5, 4.0, 10, 2, 1.0), ConfigError);
}
