#pragma once

#include <Eigen/Dense>
#include <memory>
#include <random>
#include <vector>

#include "fdidet/attack.hpp"
#include "fdidet/harness.hpp"
#include "fdidet/state_space.hpp"

namespace testutil {

// Two-state plant with one safe and one unsafe two-channel sensor; the
// configuration every cross-module test shares.
inline fdidet::StateSpaceModel reference_model() {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Cs(2, 2), Cu(2, 2);
    Cs << 0.0, 0.5, 1.0, 0.0;
    Cu << 0.5, 0.0, 0.0, 1.0;
    std::vector<fdidet::Sensor> sensors;
    sensors.push_back({Cs, Eigen::MatrixXd::Identity(2, 2), true});
    sensors.push_back({Cu, Eigen::MatrixXd::Identity(2, 2), false});
    return fdidet::StateSpaceModel(A, Q, std::move(sensors));
}

inline fdidet::LinearAttackScheme flip_scheme() {
    return fdidet::LinearAttackScheme(-Eigen::MatrixXd::Identity(2, 2),
                                      Eigen::MatrixXd::Zero(2, 2));
}

inline fdidet::LinearAttackScheme identity_scheme() {
    return fdidet::LinearAttackScheme(Eigen::MatrixXd::Identity(2, 2),
                                      Eigen::MatrixXd::Zero(2, 2));
}

inline fdidet::StateSpaceModel scalar_model(double a, double q, double c, double r,
                                            bool validate = true) {
    Eigen::MatrixXd A(1, 1), Q(1, 1), C(1, 1), R(1, 1);
    A << a;
    Q << q;
    C << c;
    R << r;
    return fdidet::StateSpaceModel(A, Q, {{C, R, true}}, validate);
}

inline fdidet::ExperimentConfig reference_config(std::uint64_t seed = 20260826) {
    fdidet::ExperimentConfig cfg;
    cfg.model = std::make_shared<fdidet::StateSpaceModel>(reference_model());
    cfg.scheme = std::make_shared<fdidet::LinearAttackScheme>(flip_scheme());
    cfg.theta = 0.05;
    cfg.alphas = {0.1};
    cfg.n_paths = 1000;
    cfg.T_max = 400;
    cfg.seed = seed;
    return cfg;
}

inline Eigen::VectorXd sample_mean(const std::vector<Eigen::VectorXd>& xs) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(xs.front().size());
    for (const auto& x : xs) m += x;
    return m / static_cast<double>(xs.size());
}

inline Eigen::MatrixXd sample_cov(const std::vector<Eigen::VectorXd>& xs) {
    Eigen::VectorXd m = sample_mean(xs);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m.size(), m.size());
    for (const auto& x : xs) c += (x - m) * (x - m).transpose();
    return c / static_cast<double>(xs.size() - 1);
}

// Random orthogonal matrix from a QR factorization of Gaussian noise.
inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = n01(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    return q;
}

}  // namespace testutil
