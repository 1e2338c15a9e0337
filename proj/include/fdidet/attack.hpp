#pragma once

#include <Eigen/Dense>
#include <limits>
#include <random>

#include "fdidet/gaussian.hpp"

namespace fdidet {

// Onset time standing in for "no attack on this path".
inline constexpr int kNeverOnset = std::numeric_limits<int>::max();

// Linear FDI scheme acting on the unsafe innovation block:
// z~_A = T_A z_A + b,  b ~ N(0, Sigma_b). Safe block passes through.
class LinearAttackScheme {
  public:
    LinearAttackScheme(Eigen::MatrixXd T_A, Eigen::MatrixXd Sigma_b);

    const Eigen::MatrixXd& T_A() const { return T_A_; }
    const Eigen::MatrixXd& T_A_inv() const { return T_A_inv_; }
    const Eigen::MatrixXd& Sigma_b() const { return Sigma_b_; }
    int unsafe_dim() const { return static_cast<int>(T_A_.rows()); }
    bool noiseless() const { return noise_.is_degenerate(); }
    bool is_identity() const { return identity_; }

    Eigen::MatrixXd full_T(int m_safe) const;

    Eigen::VectorXd sample_noise(std::mt19937_64& rng) const { return noise_(rng); }

  private:
    Eigen::MatrixXd T_A_, T_A_inv_, Sigma_b_;
    GaussianSampler noise_;
    bool identity_ = false;
};

// Geometric onset: P(t = k) = theta (1-theta)^{k-1}, k >= 1.
int sample_attack_onset(double theta, std::mt19937_64& rng);

// Identity before the onset; per-block transformation afterwards. The noise
// stream is not consumed when Sigma_b = 0, so identity schemes leave the rng
// untouched.
Eigen::VectorXd apply_linear_attack(const LinearAttackScheme& scheme, const Eigen::VectorXd& z,
                                    int m_safe, int k, int t, std::mt19937_64& rng);

// The chi^2-evading attack: replaces the whole innovation with a constant c
// from the onset onwards.
Eigen::VectorXd constant_innovation_attack(const Eigen::VectorXd& c, const Eigen::VectorXd& z,
                                           int k, int t);

}  // namespace fdidet
