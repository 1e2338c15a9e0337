#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fdidet/attack.hpp"
#include "fdidet/gaussian.hpp"
#include "fdidet/state_space.hpp"

namespace fdidet {

// Observation model available to the estimator once an attack (with known
// T_A, Sigma_b) is hypothesized: same A, Q, C but observation noise
// covariance blkdiag(R_S, R_A + T_A^{-1} Sigma_b T_A^{-T}).
//
// The covariance recursion of the per-onset Kalman filter is data
// independent, so the prediction covariance, gain and innovation-density
// factors are precomputed per filter age and shared by every hypothesis.
class ModifiedModel {
  public:
    ModifiedModel(const StateSpaceModel& model, const LinearAttackScheme& scheme,
                  int horizon = 2048);

    struct StepData {
        Eigen::MatrixXd P_pred;            // prediction covariance at this age
        Eigen::MatrixXd K;                 // modified-filter gain
        GaussianLogDensity ztilde_density; // joint law of the observed z~ residual
        Eigen::MatrixXd Sigma_ztilde;      // its covariance G (C P_pred C' + R~~) G'
    };

    // age >= 1: steps elapsed since the hypothesized onset (age 1 at k = t).
    const StepData& step(int age) const;

    const StateSpaceModel& base() const { return model_; }
    const LinearAttackScheme& scheme() const { return scheme_; }
    const Eigen::MatrixXd& R_mod() const { return R_mod_; }
    // Limit of the prediction-covariance recursion.
    const Eigen::MatrixXd& steady_state_P() const { return steady_P_; }
    int table_size() const { return static_cast<int>(table_.size()); }

  private:
    const StateSpaceModel& model_;
    LinearAttackScheme scheme_;
    Eigen::MatrixXd R_mod_;
    Eigen::MatrixXd steady_P_;
    std::vector<StepData> table_;
};

// y~~_A = T_A^{-1} z~_A + C_A A x~_{k-1}: the pseudo-observation the
// estimator reconstructs from the attacked unsafe innovation.
Eigen::VectorXd recover_pseudo_observation(const LinearAttackScheme& scheme,
                                           const Eigen::VectorXd& ztilde_unsafe,
                                           const Eigen::VectorXd& xhat_prev,
                                           const StateSpaceModel& model);

// One per-onset hypothesis: the modified filter state plus the running log
// of conditional innovation densities accumulated since activation.
struct HypothesisFilter {
    int onset = 0;
    int age = 0;              // filter steps taken so far
    Eigen::VectorXd x;        // x~_{k|a}
    double log_weight = 0.0;  // sum_{j>=onset} log p_c(z~_j | t = onset)
    double pre_log = 0.0;     // sum_{j<onset} log p0(z~_j), frozen at spawn
};

HypothesisFilter make_hypothesis(int onset, const Eigen::VectorXd& xhat_prev_std,
                                 double pre_log);

// Advances one hypothesis by one step and returns log p_c(z~_k | t = onset).
// xhat_prev_std is the standard filter's posterior estimate at k-1.
double mkf_step(HypothesisFilter& h, const ModifiedModel& mm, const Eigen::VectorXd& ztilde,
                const Eigen::VectorXd& xhat_prev_std);

// Joint Gaussian log-density of the observed innovation under a hypothesized
// attack, evaluated from first principles (no cached factors). mkf_step uses
// the per-age cache; this form exists for direct evaluation and testing.
double conditional_innovation_logdensity(const Eigen::VectorXd& ztilde,
                                         const Eigen::VectorXd& xhat_prev_std,
                                         const Eigen::VectorXd& xhat_prev_attack,
                                         const Eigen::MatrixXd& P_pred_mod,
                                         const StateSpaceModel& model,
                                         const LinearAttackScheme& scheme);

}  // namespace fdidet
