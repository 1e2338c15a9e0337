#pragma once

#include <Eigen/Dense>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "fdidet/belief.hpp"
#include "fdidet/recovery.hpp"
#include "fdidet/state_space.hpp"

namespace fdidet {

struct Decision {
    bool stop = false;
    double statistic = 0.0;
};

// Stop iff pi_k >= gamma (tie stops).
Decision quickdet_step(double pi, double gamma);

// b = |log alpha|.
double gcusum_threshold(double alpha);

// Windowed residue test: sum over the last J innovations of z' Sigma_z^{-1} z.
// The window is zero-padded until J samples exist.
class Chi2Detector {
  public:
    Chi2Detector(const Eigen::MatrixXd& sigma_z, int window, double eta);

    Decision step(const Eigen::VectorXd& z);
    void reset();
    double eta() const { return eta_; }
    void set_eta(double eta) { eta_ = eta; }

  private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    int window_;
    double eta_;
    std::deque<double> terms_;
    double running_ = 0.0;
};

// Windowed quadratic form on the difference of two blind per-sensor-group
// Kalman estimates. Sigma is the steady-state covariance of that difference
// under no attack, estimated offline.
class DetDetector {
  public:
    DetDetector(const StateSpaceModel& model, const Eigen::MatrixXd& sigma, int window,
                double eta);

    // Pseudo-observations for the two blind filters at this step.
    Decision step(const Eigen::VectorXd& y_safe, const Eigen::VectorXd& y_unsafe);
    // Window update from externally supplied estimates (bypasses the blind
    // filters; the statistic itself is just a windowed quadratic form).
    Decision step_with_estimates(const Eigen::VectorXd& x_safe, const Eigen::VectorXd& x_unsafe);
    void reset();
    double eta() const { return eta_; }
    void set_eta(double eta) { eta_ = eta; }

    const Eigen::VectorXd& safe_estimate() const { return safe_state_.x_hat; }
    const Eigen::VectorXd& unsafe_estimate() const { return unsafe_state_.x_hat; }

  private:
    std::shared_ptr<const StateSpaceModel> safe_model_, unsafe_model_;
    KalmanState safe_state_, unsafe_state_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    int window_;
    double eta_;
    std::deque<double> terms_;
    double running_ = 0.0;
};

// Monte Carlo estimate of the no-attack steady-state covariance of the blind
// estimate difference, used to whiten the DET statistic.
Eigen::MatrixXd estimate_det_sigma(const StateSpaceModel& model, int n_steps,
                                   std::uint64_t seed, int burn_in = 200);

// Generalized CUSUM state: per-onset clamped running log-likelihood sums.
struct GCusumState {
    std::vector<int> onsets;
    std::vector<double> S;
    double S_max = 0.0;
};

// Pure recursion given this step's per-onset log densities and the no-attack
// log density. Assumes hyp_log_density[i] aligns with state.onsets after the
// caller appended the newly spawned onset.
Decision gcusum_update(GCusumState& state, const std::vector<double>& hyp_log_density,
                       double no_attack_log_density, double b);

// Full detector: owns the hypothesis bank over the modified model, spawns an
// onset per step and prunes to the most recent `window` onsets plus the
// current maximum carrier.
class GCusumDetector {
  public:
    GCusumDetector(const StateSpaceModel& model, const LinearAttackScheme& scheme, double b,
                   int window = 128, int horizon = 2048);

    Decision step(const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xhat_prev_std);
    void reset();
    double b() const { return b_; }
    void set_b(double b) { b_ = b; }
    const GCusumState& state() const { return state_; }

  private:
    const StateSpaceModel& model_;
    std::shared_ptr<const ModifiedModel> mm_;
    GaussianLogDensity no_attack_dens_;
    double b_;
    int window_;
    int k_ = 0;
    GCusumState state_;
    std::vector<HypothesisFilter> bank_;
};

}  // namespace fdidet
