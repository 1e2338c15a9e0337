#include "fdidet/detectors.hpp"

#include <cmath>

#include "fdidet/errors.hpp"
#include "fdidet/rng.hpp"

namespace fdidet {

Decision quickdet_step(double pi, double gamma) {
    // gamma > 1 is allowed as a sentinel that can never be crossed.
    if (!(gamma >= 0.0)) throw ConfigError("quickdet: gamma must be >= 0");
    return {pi >= gamma, pi};
}

double gcusum_threshold(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("gcusum_threshold: alpha outside (0,1)");
    return std::abs(std::log(alpha));
}

Chi2Detector::Chi2Detector(const Eigen::MatrixXd& sigma_z, int window, double eta)
    : window_(window), eta_(eta) {
    if (window < 1) throw ConfigError("chi2: window must be >= 1");
    llt_.compute(sigma_z);
    if (llt_.info() != Eigen::Success) throw ConfigError("chi2: Sigma_z must be positive definite");
}

Decision Chi2Detector::step(const Eigen::VectorXd& z) {
    double term = llt_.matrixL().solve(z).squaredNorm();
    terms_.push_back(term);
    running_ += term;
    if (static_cast<int>(terms_.size()) > window_) {
        running_ -= terms_.front();
        terms_.pop_front();
    }
    return {running_ > eta_, running_};
}

void Chi2Detector::reset() {
    terms_.clear();
    running_ = 0.0;
}

namespace {

std::shared_ptr<const StateSpaceModel> sub_model(const StateSpaceModel& model, bool safe) {
    std::vector<Sensor> group;
    for (const Sensor& s : model.sensors())
        if (s.safe == safe) group.push_back(s);
    if (group.empty())
        throw ConfigError(std::string("DET: no ") + (safe ? "safe" : "unsafe") + " sensors");
    return std::make_shared<StateSpaceModel>(model.A(), model.Q(), std::move(group));
}

}  // namespace

DetDetector::DetDetector(const StateSpaceModel& model, const Eigen::MatrixXd& sigma, int window,
                         double eta)
    : safe_model_(sub_model(model, true)),
      unsafe_model_(sub_model(model, false)),
      window_(window),
      eta_(eta) {
    if (window < 1) throw ConfigError("DET: window must be >= 1");
    llt_.compute(sigma);
    if (llt_.info() != Eigen::Success) throw ConfigError("DET: Sigma must be positive definite");
    reset();
}

void DetDetector::reset() {
    safe_state_ = steady_state_init(*safe_model_);
    unsafe_state_ = steady_state_init(*unsafe_model_);
    terms_.clear();
    running_ = 0.0;
}

Decision DetDetector::step(const Eigen::VectorXd& y_safe, const Eigen::VectorXd& y_unsafe) {
    safe_state_ = kf_step(safe_state_, *safe_model_, y_safe).first;
    unsafe_state_ = kf_step(unsafe_state_, *unsafe_model_, y_unsafe).first;
    return step_with_estimates(safe_state_.x_hat, unsafe_state_.x_hat);
}

Decision DetDetector::step_with_estimates(const Eigen::VectorXd& x_safe,
                                          const Eigen::VectorXd& x_unsafe) {
    Eigen::VectorXd diff = x_unsafe - x_safe;
    double term = llt_.matrixL().solve(diff).squaredNorm();
    terms_.push_back(term);
    running_ += term;
    if (static_cast<int>(terms_.size()) > window_) {
        running_ -= terms_.front();
        terms_.pop_front();
    }
    return {running_ > eta_, running_};
}

Eigen::MatrixXd estimate_det_sigma(const StateSpaceModel& model, int n_steps, std::uint64_t seed,
                                   int burn_in) {
    auto safe = sub_model(model, true);
    auto unsafe = sub_model(model, false);
    KalmanState ks = steady_state_init(*safe);
    KalmanState ku = steady_state_init(*unsafe);
    std::mt19937_64 rng(derive_seed(seed, 0xde7));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.state_dim());
    const int ms = model.safe_dim();
    const int q = model.state_dim();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
    long count = 0;
    for (int k = 0; k < n_steps + burn_in; ++k) {
        auto [x_next, y] = simulate_step(x, model, rng);
        x = x_next;
        ks = kf_step(ks, *safe, y.head(ms)).first;
        ku = kf_step(ku, *unsafe, y.tail(y.size() - ms)).first;
        if (k < burn_in) continue;
        Eigen::VectorXd d = ku.x_hat - ks.x_hat;
        mean += d;
        acc += d * d.transpose();
        ++count;
    }
    mean /= static_cast<double>(count);
    Eigen::MatrixXd cov = acc / static_cast<double>(count) - mean * mean.transpose();
    cov = 0.5 * (cov + cov.transpose());
    cov += 1e-9 * Eigen::MatrixXd::Identity(q, q);
    return cov;
}

Decision gcusum_update(GCusumState& state, const std::vector<double>& hyp_log_density,
                       double no_attack_log_density, double b) {
    if (hyp_log_density.size() != state.onsets.size())
        throw ConfigError("gcusum_update: density count does not match onset count");
    if (state.S.size() != state.onsets.size())
        state.S.resize(state.onsets.size(), 0.0);
    double mx = 0.0;
    for (std::size_t i = 0; i < state.S.size(); ++i) {
        double L = hyp_log_density[i] - no_attack_log_density;
        state.S[i] = std::max(0.0, state.S[i] + L);
        mx = std::max(mx, state.S[i]);
    }
    state.S_max = mx;
    return {mx >= b, mx};
}

GCusumDetector::GCusumDetector(const StateSpaceModel& model, const LinearAttackScheme& scheme,
                               double b, int window, int horizon)
    : model_(model),
      mm_(std::make_shared<ModifiedModel>(model, scheme, horizon)),
      no_attack_dens_(innovation_covariance(model)),
      b_(b),
      window_(window) {
    if (window_ < 1) throw ConfigError("gcusum: window must be >= 1");
}

void GCusumDetector::reset() {
    k_ = 0;
    state_ = GCusumState{};
    bank_.clear();
}

Decision GCusumDetector::step(const Eigen::VectorXd& ztilde,
                              const Eigen::VectorXd& xhat_prev_std) {
    k_ += 1;
    bank_.push_back(make_hypothesis(k_, xhat_prev_std, 0.0));
    state_.onsets.push_back(k_);
    state_.S.push_back(0.0);

    std::vector<double> dens(bank_.size());
    for (std::size_t i = 0; i < bank_.size(); ++i)
        dens[i] = mkf_step(bank_[i], *mm_, ztilde, xhat_prev_std);
    Decision dec = gcusum_update(state_, dens, no_attack_dens_(ztilde), b_);

    // prune: keep the most recent `window_` onsets plus the running max
    if (static_cast<int>(bank_.size()) > window_) {
        std::size_t argmax = 0;
        for (std::size_t i = 1; i < state_.S.size(); ++i)
            if (state_.S[i] > state_.S[argmax]) argmax = i;
        std::size_t cutoff = bank_.size() - static_cast<std::size_t>(window_);
        std::vector<HypothesisFilter> bank;
        GCusumState st;
        for (std::size_t i = 0; i < bank_.size(); ++i) {
            if (i >= cutoff || i == argmax) {
                bank.push_back(std::move(bank_[i]));
                st.onsets.push_back(state_.onsets[i]);
                st.S.push_back(state_.S[i]);
            }
        }
        st.S_max = state_.S_max;
        bank_ = std::move(bank);
        state_ = std::move(st);
    }
    return dec;
}

}  // namespace fdidet
