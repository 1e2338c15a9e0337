#pragma once

#include <Eigen/Dense>
#include <random>
#include <utility>
#include <vector>

#include "fdidet/gaussian.hpp"

namespace fdidet {

struct Sensor {
    Eigen::MatrixXd C;
    Eigen::MatrixXd R;
    bool safe = false;
};

// Linear-Gaussian plant x_{k+1} = A x_k + w,  y_k = C x_k + v, with the
// observation matrix stacked safe-sensors-first. Validated at construction:
// Q PSD, R_i PD, (A, Q^{1/2}) stabilizable, (A, C_i) detectable.
class StateSpaceModel {
  public:
    // validate=false skips the PD requirement on R and the PBH tests; it
    // exists for deliberately degenerate models (noise-free plants) whose
    // downstream use never factorizes the offending matrices.
    StateSpaceModel(Eigen::MatrixXd A, Eigen::MatrixXd Q, std::vector<Sensor> sensors,
                    bool validate = true);

    int state_dim() const { return static_cast<int>(A_.rows()); }
    int obs_dim() const { return static_cast<int>(C_.rows()); }
    int safe_dim() const { return m_safe_; }
    int unsafe_dim() const { return static_cast<int>(C_.rows()) - m_safe_; }

    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::MatrixXd& Q() const { return Q_; }
    const Eigen::MatrixXd& C() const { return C_; }
    const Eigen::MatrixXd& R() const { return R_; }
    const std::vector<Sensor>& sensors() const { return sensors_; }

    Eigen::Block<const Eigen::MatrixXd> C_safe() const {
        return C_.topRows(m_safe_);
    }
    Eigen::Block<const Eigen::MatrixXd> C_unsafe() const {
        return C_.bottomRows(C_.rows() - m_safe_);
    }
    Eigen::MatrixXd R_safe() const { return R_.topLeftCorner(m_safe_, m_safe_); }
    Eigen::MatrixXd R_unsafe() const {
        int ma = unsafe_dim();
        return R_.bottomRightCorner(ma, ma);
    }

    const GaussianSampler& process_noise() const { return w_sampler_; }
    const GaussianSampler& observation_noise() const { return v_sampler_; }

  private:
    Eigen::MatrixXd A_, Q_, C_, R_;
    std::vector<Sensor> sensors_;
    int m_safe_ = 0;
    GaussianSampler w_sampler_, v_sampler_;
};

// One Kalman filter instance. P is the posterior covariance, P_pred the
// one-step prior.
struct KalmanState {
    Eigen::VectorXd x_hat;
    Eigen::MatrixXd P;
    Eigen::VectorXd x_pred;
    Eigen::MatrixXd P_pred;
    Eigen::MatrixXd K;
};

// Unique stabilizing fixed point of the prediction-covariance recursion,
// found by fixed-point iteration from P0 = Q.
Eigen::MatrixXd solve_steady_state_riccati(const StateSpaceModel& model,
                                           double tol = 1e-12,
                                           long max_iters = 1000000);

// Sigma_z = C Pbar C' + R at the Riccati fixed point.
Eigen::MatrixXd innovation_covariance(const StateSpaceModel& model);

// Steady-state posterior covariance (I - K C) Pbar.
Eigen::MatrixXd steady_state_posterior_covariance(const StateSpaceModel& model);

// Filter started in steady state: x_hat = 0 and P chosen so the first
// prediction covariance already equals Pbar.
KalmanState steady_state_init(const StateSpaceModel& model);

std::pair<KalmanState, Eigen::VectorXd> kf_step(const KalmanState& state,
                                                const StateSpaceModel& model,
                                                const Eigen::VectorXd& observation);

// Same recursion but driven by an externally supplied innovation (the form
// the attacked closed loop uses: the estimator never sees y, only z-tilde).
KalmanState kf_step_with_innovation(const KalmanState& state,
                                    const StateSpaceModel& model,
                                    const Eigen::VectorXd& innovation);

std::pair<Eigen::VectorXd, Eigen::VectorXd> simulate_step(const Eigen::VectorXd& x,
                                                          const StateSpaceModel& model,
                                                          std::mt19937_64& rng);

}  // namespace fdidet
