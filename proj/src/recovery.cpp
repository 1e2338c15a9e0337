#include "fdidet/recovery.hpp"

#include "fdidet/errors.hpp"

namespace fdidet {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Eigen::MatrixXd joint_ztilde_cov(const Eigen::MatrixXd& P_pred, const StateSpaceModel& model,
                                 const LinearAttackScheme& scheme, const Eigen::MatrixXd& R_mod) {
    const int ms = model.safe_dim();
    const int ma = model.unsafe_dim();
    Eigen::MatrixXd S = model.C() * P_pred * model.C().transpose() + R_mod;
    // z~ = G z~~ + mean with G = blkdiag(I, T_A)
    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(ms + ma, ms + ma);
    G.bottomRightCorner(ma, ma) = scheme.T_A();
    return symmetrize(G * S * G.transpose());
}

}  // namespace

ModifiedModel::ModifiedModel(const StateSpaceModel& model, const LinearAttackScheme& scheme,
                             int horizon)
    : model_(model), scheme_(scheme) {
    if (scheme_.unsafe_dim() != model_.unsafe_dim())
        throw ConfigError("scheme/T_A dimension does not match the model's unsafe block");
    const int ms = model_.safe_dim();
    const int ma = model_.unsafe_dim();
    R_mod_ = model_.R();
    R_mod_.bottomRightCorner(ma, ma) +=
        scheme_.T_A_inv() * scheme_.Sigma_b() * scheme_.T_A_inv().transpose();
    R_mod_ = symmetrize(R_mod_);
    (void)ms;

    // Hypotheses are spawned from the standard filter's steady-state
    // posterior, so every hypothesis shares one covariance trajectory.
    Eigen::MatrixXd Ppost = steady_state_posterior_covariance(model_);
    const Eigen::MatrixXd& A = model_.A();
    const Eigen::MatrixXd& C = model_.C();
    table_.reserve(64);
    for (int age = 1; age <= horizon; ++age) {
        StepData sd;
        sd.P_pred = symmetrize(A * Ppost * A.transpose() + model_.Q());
        Eigen::MatrixXd S = symmetrize(C * sd.P_pred * C.transpose() + R_mod_);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("modified filter: innovation covariance not decomposable");
        sd.K = ldlt.solve(C * sd.P_pred).transpose();
        sd.Sigma_ztilde = joint_ztilde_cov(sd.P_pred, model_, scheme_, R_mod_);
        sd.ztilde_density = GaussianLogDensity(sd.Sigma_ztilde);
        Ppost = symmetrize(sd.P_pred - sd.K * C * sd.P_pred);
        bool converged = !table_.empty() &&
                         (sd.P_pred - table_.back().P_pred).norm() <=
                             1e-13 * (1.0 + sd.P_pred.norm());
        table_.push_back(std::move(sd));
        if (converged) break;
    }
    steady_P_ = table_.back().P_pred;
}

const ModifiedModel::StepData& ModifiedModel::step(int age) const {
    if (age < 1) throw ConfigError("ModifiedModel::step: age must be >= 1");
    int idx = std::min<int>(age, static_cast<int>(table_.size())) - 1;
    return table_[static_cast<std::size_t>(idx)];
}

Eigen::VectorXd recover_pseudo_observation(const LinearAttackScheme& scheme,
                                           const Eigen::VectorXd& ztilde_unsafe,
                                           const Eigen::VectorXd& xhat_prev,
                                           const StateSpaceModel& model) {
    return scheme.T_A_inv() * ztilde_unsafe + model.C_unsafe() * (model.A() * xhat_prev);
}

HypothesisFilter make_hypothesis(int onset, const Eigen::VectorXd& xhat_prev_std,
                                 double pre_log) {
    HypothesisFilter h;
    h.onset = onset;
    h.age = 0;
    h.x = xhat_prev_std;
    h.log_weight = 0.0;
    h.pre_log = pre_log;
    return h;
}

double mkf_step(HypothesisFilter& h, const ModifiedModel& mm, const Eigen::VectorXd& ztilde,
                const Eigen::VectorXd& xhat_prev_std) {
    const StateSpaceModel& model = mm.base();
    const LinearAttackScheme& scheme = mm.scheme();
    const int ms = model.safe_dim();
    const int ma = model.unsafe_dim();
    const ModifiedModel::StepData& sd = mm.step(h.age + 1);

    // d = A (x~_{k-1|a} - x~_{k-1})
    Eigen::VectorXd d = model.A() * (h.x - xhat_prev_std);
    Eigen::VectorXd cs_d = model.C_safe() * d;
    Eigen::VectorXd ca_d = model.C_unsafe() * d;

    Eigen::VectorXd residual(ms + ma);
    residual.head(ms) = ztilde.head(ms) - cs_d;
    residual.tail(ma) = ztilde.tail(ma) - scheme.T_A() * ca_d;
    double log_density = sd.ztilde_density(residual);

    // modified innovation: z~~_S = z~_S - C_S d, z~~_A = T_A^{-1} z~_A - C_A d
    Eigen::VectorXd zmod(ms + ma);
    zmod.head(ms) = ztilde.head(ms) - cs_d;
    zmod.tail(ma) = scheme.T_A_inv() * ztilde.tail(ma) - ca_d;

    h.x = model.A() * h.x + sd.K * zmod;
    h.age += 1;
    h.log_weight += log_density;
    return log_density;
}

double conditional_innovation_logdensity(const Eigen::VectorXd& ztilde,
                                         const Eigen::VectorXd& xhat_prev_std,
                                         const Eigen::VectorXd& xhat_prev_attack,
                                         const Eigen::MatrixXd& P_pred_mod,
                                         const StateSpaceModel& model,
                                         const LinearAttackScheme& scheme) {
    const int ms = model.safe_dim();
    const int ma = model.unsafe_dim();
    Eigen::MatrixXd R_mod = model.R();
    R_mod.bottomRightCorner(ma, ma) +=
        scheme.T_A_inv() * scheme.Sigma_b() * scheme.T_A_inv().transpose();
    Eigen::MatrixXd Sigma = joint_ztilde_cov(P_pred_mod, model, scheme, R_mod);
    GaussianLogDensity dens(Sigma);

    Eigen::VectorXd d = model.A() * (xhat_prev_attack - xhat_prev_std);
    Eigen::VectorXd residual(ms + ma);
    residual.head(ms) = ztilde.head(ms) - model.C_safe() * d;
    residual.tail(ma) = ztilde.tail(ma) - scheme.T_A() * (model.C_unsafe() * d);
    return dens(residual);
}

}  // namespace fdidet
