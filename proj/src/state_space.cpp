#include "fdidet/state_space.hpp"

#include <cmath>
#include <sstream>

#include "fdidet/errors.hpp"

namespace fdidet {

namespace {

bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-9) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

int numerical_rank(const Eigen::MatrixXcd& m, double rel_cutoff = 1e-9) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    double cutoff = rel_cutoff * sv(0);
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    return r;
}

// PBH tests at the (possibly marginally) unstable eigenvalues of A.
void check_stabilizable_detectable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q,
                                   const std::vector<Sensor>& sensors) {
    const int q = static_cast<int>(A.rows());
    Eigen::MatrixXd sqrtQ = psd_sqrt(Q);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of A failed");
    for (Eigen::Index i = 0; i < q; ++i) {
        std::complex<double> lam = es.eigenvalues()(i);
        if (std::abs(lam) < 1.0 - 1e-9) continue;
        Eigen::MatrixXcd pbh_stab(q, q + q);
        pbh_stab << (A.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(q, q)),
            sqrtQ.cast<std::complex<double>>();
        if (numerical_rank(pbh_stab) < q) {
            std::ostringstream os;
            os << "(A, Q^{1/2}) not stabilizable at eigenvalue " << lam;
            throw ConfigError(os.str());
        }
        for (std::size_t s = 0; s < sensors.size(); ++s) {
            const Eigen::MatrixXd& Ci = sensors[s].C;
            Eigen::MatrixXcd pbh_det(q + Ci.rows(), q);
            pbh_det << (A.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(q, q)),
                Ci.cast<std::complex<double>>();
            if (numerical_rank(pbh_det) < q) {
                std::ostringstream os;
                os << "(A, C_" << s << ") not detectable at eigenvalue " << lam;
                throw ConfigError(os.str());
            }
        }
    }
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// One pass of the prediction-covariance recursion.
Eigen::MatrixXd riccati_map(const Eigen::MatrixXd& Ppred, const StateSpaceModel& model) {
    const Eigen::MatrixXd& A = model.A();
    const Eigen::MatrixXd& C = model.C();
    Eigen::MatrixXd S = C * Ppred * C.transpose() + model.R();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("Riccati iteration: innovation covariance not decomposable");
    Eigen::MatrixXd K = ldlt.solve(C * Ppred).transpose();
    Eigen::MatrixXd Ppost = symmetrize(Ppred - K * C * Ppred);
    return symmetrize(A * Ppost * A.transpose() + model.Q());
}

// Fixed-point solve followed by polish iterations until the residual stops
// improving; downstream density ratios need the fixed point at close to
// machine precision.
Eigen::MatrixXd riccati_polished(const StateSpaceModel& model) {
    Eigen::MatrixXd P = solve_steady_state_riccati(model);
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
        Eigen::MatrixXd next = riccati_map(P, model);
        double diff = (next - P).norm();
        if (diff >= best) break;
        best = diff;
        P = std::move(next);
        if (diff == 0.0) break;
    }
    return P;
}

}  // namespace

StateSpaceModel::StateSpaceModel(Eigen::MatrixXd A, Eigen::MatrixXd Q, std::vector<Sensor> sensors,
                                 bool validate)
    : A_(std::move(A)), Q_(std::move(Q)), sensors_(std::move(sensors)) {
    const int q = static_cast<int>(A_.rows());
    if (A_.rows() != A_.cols()) throw ConfigError("A must be square");
    if (Q_.rows() != q || Q_.cols() != q) throw ConfigError("Q must be q x q");
    if (!is_symmetric(Q_)) throw ConfigError("Q must be symmetric");
    if (sensors_.empty()) throw ConfigError("at least one sensor required");

    bool seen_unsafe = false;
    int m = 0;
    for (std::size_t i = 0; i < sensors_.size(); ++i) {
        const Sensor& s = sensors_[i];
        if (s.C.cols() != q) {
            std::ostringstream os;
            os << "sensors[" << i << "].C must have " << q << " columns";
            throw ConfigError(os.str());
        }
        if (s.R.rows() != s.C.rows() || s.R.cols() != s.C.rows()) {
            std::ostringstream os;
            os << "sensors[" << i << "].R dimension mismatch";
            throw ConfigError(os.str());
        }
        if (!is_symmetric(s.R)) throw ConfigError("sensor R must be symmetric");
        if (validate && Eigen::LLT<Eigen::MatrixXd>(s.R).info() != Eigen::Success)
            throw ConfigError("sensor R must be positive definite");
        if (s.safe && seen_unsafe)
            throw ConfigError("sensor ordering: safe sensors must precede unsafe sensors");
        if (!s.safe) seen_unsafe = true;
        m += static_cast<int>(s.C.rows());
    }

    if (validate) check_stabilizable_detectable(A_, Q_, sensors_);

    C_.setZero(m, q);
    R_.setZero(m, m);
    int row = 0;
    for (const Sensor& s : sensors_) {
        int mi = static_cast<int>(s.C.rows());
        C_.middleRows(row, mi) = s.C;
        R_.block(row, row, mi, mi) = s.R;
        if (s.safe) m_safe_ += mi;
        row += mi;
    }

    w_sampler_ = GaussianSampler(Q_);
    v_sampler_ = GaussianSampler(R_);
}

Eigen::MatrixXd solve_steady_state_riccati(const StateSpaceModel& model, double tol,
                                           long max_iters) {
    Eigen::MatrixXd P = model.Q();
    for (long it = 0; it < max_iters; ++it) {
        Eigen::MatrixXd next = riccati_map(P, model);
        double diff = (next - P).norm();
        P = next;
        if (diff <= tol) return P;
    }
    throw NumericalError("Riccati iteration did not converge within the iteration cap");
}

Eigen::MatrixXd innovation_covariance(const StateSpaceModel& model) {
    Eigen::MatrixXd Pbar = riccati_polished(model);
    return model.C() * Pbar * model.C().transpose() + model.R();
}

Eigen::MatrixXd steady_state_posterior_covariance(const StateSpaceModel& model) {
    Eigen::MatrixXd Pbar = riccati_polished(model);
    const Eigen::MatrixXd& C = model.C();
    Eigen::MatrixXd S = C * Pbar * C.transpose() + model.R();
    Eigen::MatrixXd K = Eigen::LDLT<Eigen::MatrixXd>(S).solve(C * Pbar).transpose();
    Eigen::MatrixXd Ppost = Pbar - K * C * Pbar;
    return 0.5 * (Ppost + Ppost.transpose());
}

KalmanState steady_state_init(const StateSpaceModel& model) {
    KalmanState st;
    const int q = model.state_dim();
    st.x_hat = Eigen::VectorXd::Zero(q);
    st.P = steady_state_posterior_covariance(model);
    st.x_pred = Eigen::VectorXd::Zero(q);
    st.P_pred = riccati_polished(model);
    st.K = Eigen::MatrixXd::Zero(q, model.obs_dim());
    return st;
}

KalmanState kf_step_with_innovation(const KalmanState& state, const StateSpaceModel& model,
                                    const Eigen::VectorXd& innovation) {
    const Eigen::MatrixXd& A = model.A();
    const Eigen::MatrixXd& C = model.C();
    KalmanState next;
    next.x_pred = A * state.x_hat;
    next.P_pred = A * state.P * A.transpose() + model.Q();
    next.P_pred = 0.5 * (next.P_pred + next.P_pred.transpose());
    Eigen::MatrixXd S = C * next.P_pred * C.transpose() + model.R();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success || ldlt.isNegative())
        throw NumericalError("kf_step: singular innovation covariance");
    next.K = ldlt.solve(C * next.P_pred).transpose();
    next.x_hat = next.x_pred + next.K * innovation;
    next.P = next.P_pred - next.K * C * next.P_pred;
    next.P = 0.5 * (next.P + next.P.transpose());
    return next;
}

std::pair<KalmanState, Eigen::VectorXd> kf_step(const KalmanState& state,
                                                const StateSpaceModel& model,
                                                const Eigen::VectorXd& observation) {
    if (observation.size() != model.obs_dim())
        throw ConfigError("kf_step: observation dimension mismatch");
    Eigen::VectorXd z = observation - model.C() * (model.A() * state.x_hat);
    KalmanState next = kf_step_with_innovation(state, model, z);
    return {std::move(next), std::move(z)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> simulate_step(const Eigen::VectorXd& x,
                                                          const StateSpaceModel& model,
                                                          std::mt19937_64& rng) {
    Eigen::VectorXd x_next = model.A() * x + model.process_noise()(rng);
    Eigen::VectorXd y = model.C() * x_next + model.observation_noise()(rng);
    return {std::move(x_next), std::move(y)};
}

}  // namespace fdidet
