#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fdidet/errors.hpp"

namespace fdidet {

// Symmetric PSD square root via eigendecomposition; tolerates singular
// matrices (negative eigenvalues below -tol are rejected).
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol = 1e-9) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError("psd_sqrt: eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    Eigen::VectorXd root(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -tol * scale)
            throw NumericalError("psd_sqrt: matrix is not positive semidefinite");
        root[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Multivariate Gaussian log-density with a cached Cholesky factor.
class GaussianLogDensity {
  public:
    GaussianLogDensity() = default;

    explicit GaussianLogDensity(const Eigen::MatrixXd& cov) {
        llt_.compute(cov);
        if (llt_.info() != Eigen::Success)
            throw NumericalError("GaussianLogDensity: covariance is not positive definite");
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < cov.rows(); ++i)
            log_det += 2.0 * std::log(llt_.matrixL()(i, i));
        constant_ = -0.5 * (static_cast<double>(cov.rows()) * std::log(2.0 * M_PI) + log_det);
    }

    // log N(x; mean, cov)
    double operator()(const Eigen::VectorXd& residual) const {
        Eigen::VectorXd w = llt_.matrixL().solve(residual);
        return constant_ - 0.5 * w.squaredNorm();
    }

    double log_normalizer() const { return constant_; }

  private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double constant_ = 0.0;
};

// Zero-mean Gaussian sampler with a square-root factor cached at construction.
class GaussianSampler {
  public:
    GaussianSampler() = default;
    explicit GaussianSampler(const Eigen::MatrixXd& cov)
        : sqrt_(psd_sqrt(cov)), zero_(sqrt_.isZero(0.0)) {}

    Eigen::VectorXd operator()(std::mt19937_64& rng) const {
        if (zero_) return Eigen::VectorXd::Zero(sqrt_.rows());
        Eigen::VectorXd u(sqrt_.rows());
        std::normal_distribution<double> n01(0.0, 1.0);
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = n01(rng);
        return sqrt_ * u;
    }

    bool is_degenerate() const { return zero_; }
    Eigen::Index dim() const { return sqrt_.rows(); }

  private:
    Eigen::MatrixXd sqrt_;
    bool zero_ = true;
};

inline double log_sum_exp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (!std::isfinite(a)) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace fdidet
