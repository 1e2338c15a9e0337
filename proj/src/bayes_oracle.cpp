#include "fdidet/bayes_oracle.hpp"

#include <cmath>
#include <numbers>

#include "fdidet/errors.hpp"

namespace fdidet {

namespace {

// Self-contained multivariate normal log pdf (LDLT, no cached factors).
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("oracle: covariance factorization failed");
    Eigen::VectorXd r = x - mean;
    double quad = r.dot(ldlt.solve(r));
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        double d = ldlt.vectorD()(i);
        if (d <= 0.0) throw NumericalError("oracle: covariance not positive definite");
        logdet += std::log(d);
    }
    double n = static_cast<double>(cov.rows());
    return -0.5 * (quad + logdet + n * std::log(2.0 * std::numbers::pi));
}

double lse(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

BayesEnumerationOracle::BayesEnumerationOracle(const StateSpaceModel& model,
                                               const LinearAttackScheme& scheme, double theta)
    : model_(model), scheme_(scheme), theta_(theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ConfigError("oracle: theta must lie in (0,1)");
    P_post_ss_ = steady_state_posterior_covariance(model);
    Sigma_z_ = innovation_covariance(model);

    const int ms = model.safe_dim();
    const int ma = model.unsafe_dim();
    const int m = ms + ma;
    Eigen::MatrixXd extra =
        scheme.T_A_inv() * scheme.Sigma_b() * scheme.T_A_inv().transpose();
    R_mod_ = model.R();
    R_mod_.bottomRightCorner(ma, ma) += extra;
    G_ = Eigen::MatrixXd::Identity(m, m);
    G_.bottomRightCorner(ma, ma) = scheme.T_A();
}

double BayesEnumerationOracle::log_evidence(const std::vector<Eigen::VectorXd>& ztilde,
                                            int onset) const {
    const Eigen::MatrixXd& A = model_.A();
    const Eigen::MatrixXd& C = model_.C();
    const int ms = model_.safe_dim();
    const int ma = model_.unsafe_dim();
    const int n = model_.state_dim();
    const int k = static_cast<int>(ztilde.size());

    double total = 0.0;

    // The standard (attack-unaware) filter drives everything; it ingests the
    // observed innovation directly.
    Eigen::VectorXd x_std = Eigen::VectorXd::Zero(n);
    // steady-state standard gain: Pbar C' (C Pbar C' + R)^-1
    Eigen::MatrixXd P_bar = A * P_post_ss_ * A.transpose() + model_.Q();
    Eigen::MatrixXd K_std =
        P_bar * C.transpose() *
        Sigma_z_.ldlt().solve(Eigen::MatrixXd::Identity(Sigma_z_.rows(), Sigma_z_.cols()));

    // Attacked-hypothesis filter, activated at the onset.
    Eigen::VectorXd x_hyp;
    Eigen::MatrixXd P_hyp;

    for (int j = 1; j <= k; ++j) {
        const Eigen::VectorXd& z = ztilde[static_cast<std::size_t>(j - 1)];
        if (j < onset) {
            total += mvn_logpdf(z, Eigen::VectorXd::Zero(z.size()), Sigma_z_);
        } else {
            if (j == onset) {
                x_hyp = x_std;       // hypotheses branch off the common estimate
                P_hyp = P_post_ss_;  // both filters sit in the standard steady state
            }
            // predict
            Eigen::VectorXd xp_hyp = A * x_hyp;
            Eigen::MatrixXd Pp_hyp = A * P_hyp * A.transpose() + model_.Q();
            Eigen::VectorXd d = xp_hyp - A * x_std;

            // observed z~ given this hypothesis: mean G C d' style blocks
            Eigen::VectorXd mean(z.size());
            mean.head(ms) = model_.C_safe() * d;
            mean.tail(ma) = scheme_.T_A() * (model_.C_unsafe() * d);
            Eigen::MatrixXd S = C * Pp_hyp * C.transpose() + R_mod_;
            Eigen::MatrixXd cov = G_ * S * G_.transpose();
            total += mvn_logpdf(z, mean, cov);

            // hypothesis-filter measurement update on the de-attacked innovation
            Eigen::VectorXd zmod(z.size());
            zmod.head(ms) = z.head(ms) - model_.C_safe() * d;
            zmod.tail(ma) = scheme_.T_A_inv() * z.tail(ma) - model_.C_unsafe() * d;
            Eigen::MatrixXd K = Pp_hyp * C.transpose() * S.ldlt().solve(
                                                             Eigen::MatrixXd::Identity(
                                                                 S.rows(), S.cols()));
            x_hyp = xp_hyp + K * zmod;
            P_hyp = Pp_hyp - K * C * Pp_hyp;
            P_hyp = 0.5 * (P_hyp + P_hyp.transpose()).eval();
        }
        // standard filter ingests the observed innovation regardless
        x_std = A * x_std + K_std * z;
    }
    return total;
}

double BayesEnumerationOracle::posterior(const std::vector<Eigen::VectorXd>& ztilde) const {
    const int k = static_cast<int>(ztilde.size());
    if (k == 0) return 0.0;
    std::vector<double> attack_terms;
    attack_terms.reserve(static_cast<std::size_t>(k));
    for (int i = 1; i <= k; ++i) {
        double log_prior = std::log(theta_) + (i - 1) * std::log1p(-theta_);
        attack_terms.push_back(log_prior + log_evidence(ztilde, i));
    }
    double log_num = lse(attack_terms);
    double log_den = k * std::log1p(-theta_) + log_evidence(ztilde, k + 1);
    // P(t<=k|z) = num / (num + den)
    double log_odds = log_num - log_den;
    if (log_odds > 500.0) return 1.0;
    double odds = std::exp(log_odds);
    return odds / (1.0 + odds);
}

std::vector<double> BayesEnumerationOracle::posterior_path(
    const std::vector<Eigen::VectorXd>& ztilde) const {
    std::vector<double> out;
    out.reserve(ztilde.size());
    std::vector<Eigen::VectorXd> prefix;
    prefix.reserve(ztilde.size());
    for (const auto& z : ztilde) {
        prefix.push_back(z);
        out.push_back(posterior(prefix));
    }
    return out;
}

std::vector<double> BayesEnumerationOracle::onset_posterior(
    const std::vector<Eigen::VectorXd>& ztilde) const {
    const int k = static_cast<int>(ztilde.size());
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(k));
    for (int i = 1; i <= k; ++i) {
        double log_prior = std::log(theta_) + (i - 1) * std::log1p(-theta_);
        logs.push_back(log_prior + log_evidence(ztilde, i));
    }
    double z = lse(logs);
    std::vector<double> out(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) out[i] = std::exp(logs[i] - z);
    return out;
}

}  // namespace fdidet
