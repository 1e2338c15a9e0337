#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fdidet/attack.hpp"
#include "fdidet/state_space.hpp"

namespace fdidet {

// Reference implementation of the attack posterior by direct enumeration.
//
// Given the full innovation record z~_{1:k}, the posterior P(t <= k | z~_{1:k})
// is computed exactly: one modified Kalman filter per onset hypothesis, every
// covariance propagated per hypothesis and per step, every density evaluated
// with a fresh factorization. O(k^2) work, no shared caches, no recursive
// odds update — deliberately nothing in common with the sequential engine
// beyond the model classes, so the two can cross-check each other.
class BayesEnumerationOracle {
  public:
    BayesEnumerationOracle(const StateSpaceModel& model, const LinearAttackScheme& scheme,
                           double theta);

    // Posterior P(t <= k | z~_{1:k}) for the full record.
    double posterior(const std::vector<Eigen::VectorXd>& ztilde) const;

    // Posterior trajectory: element k-1 is P(t <= k | z~_{1:k}).
    std::vector<double> posterior_path(const std::vector<Eigen::VectorXd>& ztilde) const;

    // Onset posterior P(t = i | t <= k, z~_{1:k}) for i = 1..k.
    std::vector<double> onset_posterior(const std::vector<Eigen::VectorXd>& ztilde) const;

    // log p(z~_{1:k} | t = onset), onset may exceed k (pure no-attack terms).
    double log_evidence(const std::vector<Eigen::VectorXd>& ztilde, int onset) const;

  private:
    const StateSpaceModel& model_;
    const LinearAttackScheme& scheme_;
    double theta_;
    Eigen::MatrixXd P_post_ss_;   // standard-filter steady-state posterior cov
    Eigen::MatrixXd Sigma_z_;     // no-attack innovation covariance
    Eigen::MatrixXd R_mod_;       // blkdiag(R_S, R_A + T^-1 Sigma_b T^-T)
    Eigen::MatrixXd G_;           // blkdiag(I, T_A)
};

}  // namespace fdidet
