#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fdidet/attack.hpp"
#include "fdidet/detectors.hpp"
#include "fdidet/errors.hpp"
#include "fdidet/rng.hpp"
#include "support/helpers.hpp"

using namespace fdidet;

TEST_CASE("onset sampling: theta = 1 is immediate") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) CHECK(sample_attack_onset(1.0, rng) == 1);
}

TEST_CASE("onset sampling: mean and KS distance at theta = 0.05") {
    const double theta = 0.05;
    const int n = 100000;
    std::mt19937_64 rng(11);
    std::vector<int> draws(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        draws[i] = sample_attack_onset(theta, rng);
        sum += draws[i];
    }
    double mean = sum / n;
    double se = std::sqrt((1.0 - theta) / (theta * theta) / n);
    CHECK(std::abs(mean - 1.0 / theta) < 3.0 * se);

    // Discrete KS: compare CDFs at the support points (ties make the
    // order-statistic form of the statistic meaningless here).
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    std::size_t idx = 0;
    while (idx < draws.size()) {
        int v = draws[idx];
        while (idx < draws.size() && draws[idx] == v) ++idx;
        double emp = static_cast<double>(idx) / n;  // #draws <= v
        double cdf = 1.0 - std::pow(1.0 - theta, v);
        ks = std::max(ks, std::abs(emp - cdf));
    }
    CHECK(ks < 1.628 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("onset sampling: invalid theta") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(sample_attack_onset(0.0, rng), ConfigError);
    CHECK_THROWS_AS(sample_attack_onset(1.5, rng), ConfigError);
}

TEST_CASE("apply_linear_attack: identity scheme is a no-op and consumes no randomness") {
    auto scheme = testutil::identity_scheme();
    Eigen::VectorXd z(4);
    z << 0.1, -0.5, 2.0, 0.3;
    std::mt19937_64 rng(77), fresh(77);
    Eigen::VectorXd zt = apply_linear_attack(scheme, z, 2, 5, 1, rng);
    CHECK((zt - z).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rng() == fresh());  // stream untouched
}

TEST_CASE("apply_linear_attack: sign flip on the unsafe block only") {
    auto scheme = testutil::flip_scheme();
    Eigen::VectorXd z(4);
    z << 0.1, -0.5, 2.0, 0.3;
    std::mt19937_64 rng(77);
    Eigen::VectorXd zt = apply_linear_attack(scheme, z, 2, 5, 1, rng);
    CHECK(zt(0) == z(0));
    CHECK(zt(1) == z(1));
    CHECK(zt(2) == -z(2));
    CHECK(zt(3) == -z(3));
}

TEST_CASE("apply_linear_attack: identity before the onset") {
    auto scheme = testutil::flip_scheme();
    Eigen::VectorXd z(4);
    z << 1.0, 2.0, 3.0, 4.0;
    std::mt19937_64 rng(5);
    for (int k = 1; k < 9; ++k) {
        Eigen::VectorXd zt = apply_linear_attack(scheme, z, 2, k, 9, rng);
        CHECK((zt - z).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("apply_linear_attack: output covariance is T Sigma T' + Sigma_b") {
    Eigen::MatrixXd T(2, 2);
    T << 1.0, 0.5, 0.0, -2.0;
    Eigen::MatrixXd Sb(2, 2);
    Sb << 0.3, 0.1, 0.1, 0.2;
    LinearAttackScheme scheme(T, Sb);

    Eigen::MatrixXd Sigma(2, 2);
    Sigma << 2.0, 0.4, 0.4, 1.0;
    Eigen::MatrixXd L = Sigma.llt().matrixL();

    const int n = 100000;
    std::mt19937_64 rng(123);
    std::normal_distribution<double> n01;
    std::vector<Eigen::VectorXd> outs;
    outs.reserve(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd u(2);
        u << n01(rng), n01(rng);
        Eigen::VectorXd z(2);
        z = L * u;
        Eigen::VectorXd full(2);  // pure unsafe block (m_safe = 0)
        full = z;
        outs.push_back(apply_linear_attack(scheme, full, 0, 3, 1, rng));
    }
    Eigen::MatrixXd expected = T * Sigma * T.transpose() + Sb;
    Eigen::MatrixXd cov = testutil::sample_cov(outs);
    CHECK((cov - expected).cwiseAbs().maxCoeff() < 0.05 * expected.norm());
}

TEST_CASE("scheme validation") {
    CHECK_THROWS_AS(LinearAttackScheme(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)),
                    ConfigError);  // singular T
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;  // symmetric but indefinite
    CHECK_THROWS_AS(LinearAttackScheme(Eigen::MatrixXd::Identity(2, 2), bad), ConfigError);
}

TEST_CASE("constant innovation attack: passthrough before onset, constant after") {
    Eigen::VectorXd c(2), z(2);
    c << 9.0, -9.0;
    z << 1.0, 2.0;
    CHECK((constant_innovation_attack(c, z, 3, 5) - z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((constant_innovation_attack(c, z, 5, 5) - c).cwiseAbs().maxCoeff() == 0.0);
    CHECK((constant_innovation_attack(c, z, 9, 5) - c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant innovation attack evades or trips the windowed residue test") {
    auto model = testutil::reference_model();
    Eigen::MatrixXd Sigma_z = innovation_covariance(model);
    const int J = 3;
    const double eta = 30.0;

    // direction: all-ones, scaled so the full-window statistic hits the target
    Eigen::VectorXd dir = Eigen::VectorXd::Ones(4);
    double base = dir.dot(Sigma_z.llt().solve(dir));
    auto scaled = [&](double target) {
        return dir * std::sqrt(target / (J * base));
    };

    SUBCASE("c = 0 keeps the statistic at zero") {
        Chi2Detector det(Sigma_z, J, eta);
        for (int k = 1; k <= 50; ++k) {
            auto d = det.step(Eigen::VectorXd::Zero(4));
            CHECK(d.statistic == 0.0);
            CHECK_FALSE(d.stop);
        }
    }

    SUBCASE("0.9 eta never fires, 1.1 eta fires within the window") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(derive_seed(9, seed));
            Chi2Detector evade(Sigma_z, J, eta), trip(Sigma_z, J, eta);
            Eigen::VectorXd c_low = scaled(0.9 * eta), c_high = scaled(1.1 * eta);
            bool fired_low = false;
            int fired_high_at = 0;
            for (int k = 1; k <= 100; ++k) {
                Eigen::VectorXd z = Eigen::VectorXd::Zero(4);  // onset t=1: never seen
                Eigen::VectorXd zl = constant_innovation_attack(c_low, z, k, 1);
                Eigen::VectorXd zh = constant_innovation_attack(c_high, z, k, 1);
                if (evade.step(zl).stop) fired_low = true;
                if (fired_high_at == 0 && trip.step(zh).stop) fired_high_at = k;
            }
            CHECK_FALSE(fired_low);
            CHECK(fired_high_at > 0);
            CHECK(fired_high_at <= J);
        }
    }
}

TEST_CASE("identity scheme leaves whole trajectories bit-identical") {
    auto model = testutil::reference_model();
    auto id = testutil::identity_scheme();
    PathRng a(314), b(314);
    Eigen::VectorXd xa = Eigen::VectorXd::Zero(2), xb = xa;
    KalmanState ka = steady_state_init(model), kb = ka;
    for (int k = 1; k <= 40; ++k) {
        auto [xan, ya] = simulate_step(xa, model, a.process);
        auto [xbn, yb] = simulate_step(xb, model, b.process);
        xa = xan;
        xb = xbn;
        Eigen::VectorXd za = ya - model.C() * (model.A() * ka.x_hat);
        Eigen::VectorXd zb = yb - model.C() * (model.A() * kb.x_hat);
        Eigen::VectorXd zat = apply_linear_attack(id, za, 2, k, 10, a.attack);  // "attacked"
        CHECK((zat - zb).cwiseAbs().maxCoeff() == 0.0);                         // vs untouched
        ka = kf_step_with_innovation(ka, model, zat);
        kb = kf_step_with_innovation(kb, model, zb);
    }
}
