#include "fdidet/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fdidet/errors.hpp"

namespace fdidet {

namespace {
constexpr double kSaturation = 1.0 - 1e-15;
}

double prior_mass_f(int k, double theta) {
    if (k < 2) throw ConfigError("prior_mass_f: k must be >= 2");
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("prior_mass_f: theta must lie in (0,1)");
    double one_minus = 1.0 - theta;
    double num = 1.0 - std::pow(one_minus, k);
    double den = one_minus * (1.0 - std::pow(one_minus, k - 1));
    return num / den;
}

double belief_from_odds(double beta) {
    if (std::isnan(beta) || beta < 0.0) throw ConfigError("belief_from_odds: beta must be >= 0");
    if (std::isinf(beta)) return 1.0;
    return beta / (beta + 1.0);
}

int BeliefState::map_onset() const {
    if (bank.empty()) return 0;
    auto it = std::max_element(bank_log_mass.begin(), bank_log_mass.end());
    return bank[static_cast<std::size_t>(it - bank_log_mass.begin())].onset;
}

BeliefEngine::BeliefEngine(const StateSpaceModel& model, const LinearAttackScheme& scheme,
                           double theta, PruneConfig prune, int horizon)
    : model_(model),
      mm_(std::make_shared<ModifiedModel>(model, scheme, horizon)),
      theta_(theta),
      prune_(prune) {
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("BeliefEngine: theta must lie in (0,1)");
    if (prune_.max_bank < 1) throw ConfigError("BeliefEngine: max_bank must be >= 1");
    no_attack_dens_ = GaussianLogDensity(innovation_covariance(model));
}

BeliefState BeliefEngine::init(double pi0) const {
    if (pi0 < 0.0 || pi0 >= 1.0) throw ConfigError("BeliefEngine: pi0 must lie in [0,1)");
    BeliefState st;
    st.pi = pi0;
    st.log_beta = pi0 > 0.0 ? std::log(pi0 / (1.0 - pi0))
                            : -std::numeric_limits<double>::infinity();
    return st;
}

void BeliefEngine::step(BeliefState& state, const Eigen::VectorXd& ztilde,
                        const Eigen::VectorXd& xhat_prev_std) const {
    const int k = state.k + 1;
    const double log_1mtheta = std::log1p(-theta_);
    const double pi_prev = state.pi;
    const bool saturated = pi_prev >= kSaturation;

    // spawn hypothesis t = k, initialized from the standard filter at k-1
    state.bank.push_back(make_hypothesis(k, xhat_prev_std, state.no_attack_log_total));

    // onset-posterior weights from data up to k-1 (pre-advance log weights)
    const std::size_t n = state.bank.size();
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const HypothesisFilter& h = state.bank[i];
        w[i] = std::log(theta_) + (h.onset - 1) * log_1mtheta + h.pre_log + h.log_weight;
    }
    double lse_w = log_sum_exp(w);

    // advance every hypothesis and combine
    std::vector<double> wl(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ld = mkf_step(state.bank[i], *mm_, ztilde, xhat_prev_std);
        wl[i] = w[i] + ld;
    }
    double lse_wl = log_sum_exp(wl);
    double log_p_mix = lse_wl - lse_w;
    double log_p0 = no_attack_dens_(ztilde);

    // beta_k = [p_mix / p0] * [pi/( (1-theta)(1-pi) ) + theta/(1-theta)]
    double pc = std::min(pi_prev, kSaturation);
    double odds_factor = (pc + theta_ * (1.0 - pc)) / ((1.0 - theta_) * (1.0 - pc));
    state.log_beta = (log_p_mix - log_p0) + std::log(odds_factor);
    state.pi = saturated ? 1.0 : 1.0 / (1.0 + std::exp(-state.log_beta));

    state.bank_log_mass.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) state.bank_log_mass[i] = wl[i] - lse_wl;

    state.last_log_p_mix = log_p_mix;
    state.last_log_p0 = log_p0;
    state.no_attack_log_total += log_p0;
    state.k = k;

    prune_hypotheses(state, prune_.epsilon, prune_.max_bank);
}

void update_belief(BeliefState& state, const Eigen::VectorXd& ztilde,
                   const KalmanState& standard_filter, const BeliefEngine& engine) {
    engine.step(state, ztilde, standard_filter.x_hat);
}

void prune_hypotheses(BeliefState& state, double epsilon, int max_bank) {
    if (max_bank < 1) throw ConfigError("prune_hypotheses: max_bank must be >= 1");
    const std::size_t n = state.bank.size();
    if (n == 0) return;
    double max_mass = *std::max_element(state.bank_log_mass.begin(), state.bank_log_mass.end());

    std::vector<std::size_t> keep;
    keep.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (state.bank_log_mass[i] >= max_mass - epsilon) keep.push_back(i);

    if (static_cast<int>(keep.size()) > max_bank) {
        std::nth_element(keep.begin(), keep.begin() + max_bank, keep.end(),
                         [&](std::size_t a, std::size_t b) {
                             return state.bank_log_mass[a] > state.bank_log_mass[b];
                         });
        keep.resize(static_cast<std::size_t>(max_bank));
        std::sort(keep.begin(), keep.end());
    }
    if (keep.size() == n) return;

    std::vector<HypothesisFilter> bank;
    std::vector<double> mass;
    bank.reserve(keep.size());
    mass.reserve(keep.size());
    for (std::size_t i : keep) {
        bank.push_back(std::move(state.bank[i]));
        mass.push_back(state.bank_log_mass[i]);
    }
    double lse = log_sum_exp(mass);
    for (double& m : mass) m -= lse;
    state.bank = std::move(bank);
    state.bank_log_mass = std::move(mass);
}

MultiTBeliefEngine::MultiTBeliefEngine(const StateSpaceModel& model,
                                       std::vector<LinearAttackScheme> schemes,
                                       std::vector<double> prior, double theta,
                                       PruneConfig prune, int horizon)
    : schemes_(std::move(schemes)), theta_(theta) {
    if (schemes_.empty())
        throw ConfigError("MultiTBeliefEngine: need at least one non-identity scheme");
    if (prior.size() != schemes_.size() + 1)
        throw ConfigError("MultiTBeliefEngine: prior must cover {I} plus every scheme");
    double total = std::accumulate(prior.begin(), prior.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("MultiTBeliefEngine: prior must have positive mass");
    log_prior_.reserve(prior.size());
    for (double p : prior) {
        if (p < 0.0) throw ConfigError("MultiTBeliefEngine: prior entries must be >= 0");
        log_prior_.push_back(std::log(p / total));
    }
    engines_.reserve(schemes_.size());
    for (const auto& s : schemes_) engines_.emplace_back(model, s, theta, prune, horizon);
    no_attack_dens_ = GaussianLogDensity(innovation_covariance(model));
}

MultiTBeliefState MultiTBeliefEngine::init() const {
    MultiTBeliefState st;
    st.cond.reserve(engines_.size());
    for (const auto& e : engines_) st.cond.push_back(e.init());
    st.log_post = log_prior_;
    return st;
}

void MultiTBeliefEngine::step(MultiTBeliefState& state, const Eigen::VectorXd& ztilde,
                              const Eigen::VectorXd& xhat_prev_std) const {
    const double log_p0 = no_attack_dens_(ztilde);
    std::vector<double> log_pred(engines_.size() + 1);
    log_pred[0] = log_p0;  // conditional on identity, innovations stay i.i.d. no-attack

    for (std::size_t j = 0; j < engines_.size(); ++j) {
        double pi_prev = state.cond[j].pi;
        engines_[j].step(state.cond[j], ztilde, xhat_prev_std);
        // p_c(z~_k | T) as a two-branch mixture; robust at pi_prev -> 1
        double attacked = state.cond[j].last_log_p_mix +
                          std::log(pi_prev + theta_ * (1.0 - pi_prev));
        double clean = (pi_prev < 1.0)
                           ? log_p0 + std::log((1.0 - pi_prev) * (1.0 - theta_))
                           : -std::numeric_limits<double>::infinity();
        log_pred[j + 1] = log_add(attacked, clean);
    }

    for (std::size_t j = 0; j < state.log_post.size(); ++j) state.log_post[j] += log_pred[j];
    double lse = log_sum_exp(state.log_post);
    for (double& lp : state.log_post) lp -= lse;

    state.pi = 0.0;
    for (std::size_t j = 0; j < engines_.size(); ++j)
        state.pi += state.cond[j].pi * std::exp(state.log_post[j + 1]);
    state.k += 1;
}

int MultiTBeliefEngine::ml_index(const MultiTBeliefState& state) const {
    int best = 0;
    for (std::size_t j = 1; j < state.cond.size(); ++j)
        if (state.cond[j].pi > state.cond[static_cast<std::size_t>(best)].pi)
            best = static_cast<int>(j);
    return best;
}

int MultiTBeliefEngine::map_index(const MultiTBeliefState& state) const {
    int best = 0;
    double best_mass = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < state.cond.size(); ++j) {
        double mass = state.cond[j].pi * std::exp(state.log_post[j + 1]);
        if (mass > best_mass) {
            best_mass = mass;
            best = static_cast<int>(j);
        }
    }
    return best;
}

}  // namespace fdidet
