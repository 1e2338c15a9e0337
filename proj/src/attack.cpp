#include "fdidet/attack.hpp"

#include <cmath>

#include "fdidet/errors.hpp"

namespace fdidet {

LinearAttackScheme::LinearAttackScheme(Eigen::MatrixXd T_A, Eigen::MatrixXd Sigma_b)
    : T_A_(std::move(T_A)), Sigma_b_(std::move(Sigma_b)) {
    if (T_A_.rows() != T_A_.cols()) throw ConfigError("scheme/T_A must be square");
    if (Sigma_b_.rows() != T_A_.rows() || Sigma_b_.cols() != T_A_.cols())
        throw ConfigError("scheme/Sigma_b dimension mismatch with T_A");
    if ((Sigma_b_ - Sigma_b_.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, Sigma_b_.cwiseAbs().maxCoeff()))
        throw ConfigError("scheme/Sigma_b must be symmetric");

    Eigen::FullPivLU<Eigen::MatrixXd> lu(T_A_);
    if (!lu.isInvertible()) throw ConfigError("scheme/T_A must be invertible");
    T_A_inv_ = lu.inverse();
    try {
        noise_ = GaussianSampler(Sigma_b_);
    } catch (const NumericalError&) {
        throw ConfigError("scheme/Sigma_b must be positive semidefinite");
    }
    identity_ = T_A_.isIdentity(0.0) && noise_.is_degenerate();
}

Eigen::MatrixXd LinearAttackScheme::full_T(int m_safe) const {
    int m = m_safe + unsafe_dim();
    Eigen::MatrixXd T = Eigen::MatrixXd::Identity(m, m);
    T.bottomRightCorner(unsafe_dim(), unsafe_dim()) = T_A_;
    return T;
}

int sample_attack_onset(double theta, std::mt19937_64& rng) {
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
    if (theta == 1.0) return 1;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u;
    do {
        u = unif(rng);
    } while (u <= 0.0);
    double k = 1.0 + std::floor(std::log(u) / std::log1p(-theta));
    if (k >= static_cast<double>(kNeverOnset)) return kNeverOnset;
    return static_cast<int>(k);
}

Eigen::VectorXd apply_linear_attack(const LinearAttackScheme& scheme, const Eigen::VectorXd& z,
                                    int m_safe, int k, int t, std::mt19937_64& rng) {
    if (z.size() != m_safe + scheme.unsafe_dim())
        throw ConfigError("apply_linear_attack: innovation dimension mismatch with scheme");
    if (k < t) return z;
    Eigen::VectorXd out = z;
    auto za = z.tail(scheme.unsafe_dim());
    out.tail(scheme.unsafe_dim()) = scheme.T_A() * za;
    if (!scheme.noiseless()) out.tail(scheme.unsafe_dim()) += scheme.sample_noise(rng);
    return out;
}

Eigen::VectorXd constant_innovation_attack(const Eigen::VectorXd& c, const Eigen::VectorXd& z,
                                           int k, int t) {
    return k >= t ? c : z;
}

}  // namespace fdidet
