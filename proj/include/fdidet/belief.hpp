#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "fdidet/recovery.hpp"
#include "fdidet/state_space.hpp"

namespace fdidet {

// f_k(theta) = (1-(1-theta)^k) / ((1-theta)(1-(1-theta)^{k-1})), k >= 2.
double prior_mass_f(int k, double theta);

// beta / (beta + 1); +inf maps to 1.
double belief_from_odds(double beta);

struct PruneConfig {
    double epsilon = std::numeric_limits<double>::infinity();  // log-mass gap
    int max_bank = std::numeric_limits<int>::max();
};

struct BeliefState {
    double pi = 0.0;
    double log_beta = -std::numeric_limits<double>::infinity();
    std::vector<HypothesisFilter> bank;
    std::vector<double> bank_log_mass;  // normalized onset posterior, aligned with bank
    double no_attack_log_total = 0.0;   // sum_j log p0(z~_j)
    int k = 0;

    // per-step diagnostics, reused by the m-ary engine
    double last_log_p_mix = 0.0;  // log p_c(z~_k | t <= k)
    double last_log_p0 = 0.0;     // log p0(z~_k)

    int map_onset() const;
};

// Recursive attack-belief computation over a growing bank of onset
// hypotheses. One engine per (model, scheme); one BeliefState per path.
class BeliefEngine {
  public:
    BeliefEngine(const StateSpaceModel& model, const LinearAttackScheme& scheme, double theta,
                 PruneConfig prune = {}, int horizon = 2048);

    BeliefState init(double pi0 = 0.0) const;

    // Advance by one step. ztilde is the observed (possibly attacked)
    // innovation at time k, xhat_prev_std the standard filter's posterior
    // estimate at k-1 (before ingesting ztilde).
    void step(BeliefState& state, const Eigen::VectorXd& ztilde,
              const Eigen::VectorXd& xhat_prev_std) const;

    double theta() const { return theta_; }
    const ModifiedModel& modified_model() const { return *mm_; }
    const GaussianLogDensity& no_attack_density() const { return no_attack_dens_; }
    const PruneConfig& prune_config() const { return prune_; }

  private:
    const StateSpaceModel& model_;
    std::shared_ptr<const ModifiedModel> mm_;
    double theta_;
    PruneConfig prune_;
    GaussianLogDensity no_attack_dens_;
};

void update_belief(BeliefState& state, const Eigen::VectorXd& ztilde,
                   const KalmanState& standard_filter, const BeliefEngine& engine);

// Drops hypotheses with onset-posterior mass below e^{-epsilon} of the max
// and caps the bank size; surviving masses are renormalized.
void prune_hypotheses(BeliefState& state, double epsilon, int max_bank);

// m-ary extension: an unknown attack matrix from a finite set, identity
// included. Conditional beliefs are maintained per non-identity T; the
// posterior over the set is Bayes-updated from per-T predictive densities.
struct MultiTBeliefState {
    std::vector<BeliefState> cond;  // aligned with MultiTBeliefEngine::schemes()
    std::vector<double> log_post;   // over {I} + schemes(), I at index 0
    double pi = 0.0;                // sum over T != I of pi_k^T
    int k = 0;
};

class MultiTBeliefEngine {
  public:
    // prior: over {I} + schemes, identity first; normalized internally.
    MultiTBeliefEngine(const StateSpaceModel& model, std::vector<LinearAttackScheme> schemes,
                       std::vector<double> prior, double theta, PruneConfig prune = {},
                       int horizon = 2048);

    MultiTBeliefState init() const;
    void step(MultiTBeliefState& state, const Eigen::VectorXd& ztilde,
              const Eigen::VectorXd& xhat_prev_std) const;

    // argmax over non-identity T of pi_{k|T} / pi_k^T; index into schemes().
    int ml_index(const MultiTBeliefState& state) const;
    int map_index(const MultiTBeliefState& state) const;

    const std::vector<LinearAttackScheme>& schemes() const { return schemes_; }

  private:
    std::vector<LinearAttackScheme> schemes_;
    std::vector<BeliefEngine> engines_;
    std::vector<double> log_prior_;
    GaussianLogDensity no_attack_dens_;
    double theta_;
};

}  // namespace fdidet
