#include "fdidet/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "fdidet/errors.hpp"
#include "fdidet/rng.hpp"

namespace fdidet {

std::tuple<double, double, double> step_schedules(const SpsaSchedule& schedule, int n) {
    if (n < 0) throw ConfigError("step_schedules: n must be >= 0");
    double np1 = static_cast<double>(n) + 1.0;
    return {schedule.a0 / std::pow(np1, 0.8), schedule.b0 / std::pow(np1, schedule.b_exponent),
            schedule.delta0 / std::pow(np1, 0.2)};
}

CalibrationResult spsa_calibrate(const SpsaObjective& objective, const SpsaSchedule& schedule,
                                 double alpha, int n_iters, std::uint64_t seed, double gamma0,
                                 double lambda0, bool keep_trace) {
    if (n_iters < 1) throw ConfigError("spsa_calibrate: n_iters must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("spsa_calibrate: alpha outside (0,1)");
    if (!(schedule.a0 > 0.0 && schedule.b0 > 0.0 && schedule.delta0 > 0.0))
        throw ConfigError("spsa_calibrate: schedule constants must be positive");

    CalibrationResult result;
    if (keep_trace) result.trace.reserve(static_cast<std::size_t>(n_iters));
    double gamma = std::clamp(gamma0, 0.0, 1.0);
    double lambda = std::max(lambda0, 0.0);

    // Polyak tail average: the reported optimum is the mean of the last
    // quarter of the iterates, which removes most of the residual wander of
    // the slowly-decaying gamma gain.
    int tail_start = n_iters - std::max(1, n_iters / 4);
    double gamma_sum = 0.0, lambda_sum = 0.0;
    long tail_count = 0;

    for (int n = 0; n < n_iters; ++n) {
        auto [a, b, delta] = step_schedules(schedule, n);
        double gp = std::min(gamma + delta, 1.0);
        double gm = std::max(gamma - delta, 0.0);
        std::mt19937_64 path_rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
        SpsaCostSample s = objective(n, gp, gm, gamma, lambda, path_rng);

        if (keep_trace)
            result.trace.push_back(
                {n, gamma, lambda, s.fa_at_gamma ? 1 : 0, s.d_plus, s.d_minus});

        gamma = std::clamp(gamma - a * (s.d_plus - s.d_minus) / (2.0 * delta), 0.0, 1.0);
        lambda = std::max(lambda + b * ((s.fa_at_gamma ? 1.0 : 0.0) - alpha), 0.0);

        if (n >= tail_start) {
            gamma_sum += gamma;
            lambda_sum += lambda;
            ++tail_count;
        }
    }

    result.gamma_star = gamma_sum / static_cast<double>(tail_count);
    result.lambda_star = lambda_sum / static_cast<double>(tail_count);
    result.converged = true;
    return result;
}

double scalar_threshold_calibrate(const FalseAlarmObjective& objective, double alpha, double a0,
                                  int n_iters, std::uint64_t seed, double eta0,
                                  double gain_exponent) {
    if (n_iters < 1) throw ConfigError("scalar_threshold_calibrate: n_iters must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ConfigError("scalar_threshold_calibrate: alpha outside (0,1]");
    double eta = std::max(eta0, 0.0);
    for (int n = 0; n < n_iters; ++n) {
        double a = a0 / std::pow(static_cast<double>(n) + 1.0, gain_exponent);
        std::mt19937_64 path_rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
        bool fa = objective(n, eta, path_rng);
        eta = std::max(eta + a * ((fa ? 1.0 : 0.0) - alpha), 0.0);
    }
    return eta;
}

}  // namespace fdidet
