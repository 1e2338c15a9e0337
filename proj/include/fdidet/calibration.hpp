#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <tuple>
#include <vector>

namespace fdidet {

// Two-timescale gain sequences: a(n) = a0/(n+1)^0.8, b(n) = b0/(n+1),
// delta(n) = delta0/(n+1)^0.2. These exponents satisfy the usual stochastic
// approximation conditions with b(n)/a(n) -> 0 and sum a^2/delta^2 < inf.
struct SpsaSchedule {
    double a0 = 0.1;
    double b0 = 0.05;
    double delta0 = 0.1;
    // Decay exponent for b(n). Must stay above 0.8 so b(n)/a(n) -> 0; values
    // below 1 keep late-stage corrective capacity (a pure 1/n gain freezes
    // the multiplier at whatever level the early transient reached).
    double b_exponent = 1.0;
};

std::tuple<double, double, double> step_schedules(const SpsaSchedule& schedule, int n);

struct SpsaTracePoint {
    int n = 0;
    double gamma = 0.0;
    double lambda = 0.0;
    int fa = 0;
    double d_plus = 0.0;
    double d_minus = 0.0;
};

struct CalibrationResult {
    double gamma_star = 0.0;
    double lambda_star = 0.0;
    std::vector<SpsaTracePoint> trace;
    bool converged = false;
};

// One sample-path evaluation under common random numbers: costs at the two
// perturbed thresholds and the false-alarm indicator at the unperturbed one.
struct SpsaCostSample {
    double d_plus = 0.0;
    double d_minus = 0.0;
    bool fa_at_gamma = false;
};

using SpsaObjective = std::function<SpsaCostSample(
    int n, double gamma_plus, double gamma_minus, double gamma, double lambda,
    std::mt19937_64& path_rng)>;

// Projected two-timescale SPSA on (Gamma, lambda):
//   Gamma(n+1) = [Gamma(n) - a(n) (d+ - d-)/(2 delta(n))]_0^1
//   lambda(n+1) = [lambda(n) + b(n) (1_FA(n) - alpha)]_0^inf
CalibrationResult spsa_calibrate(const SpsaObjective& objective, const SpsaSchedule& schedule,
                                 double alpha, int n_iters, std::uint64_t seed,
                                 double gamma0 = 0.5, double lambda0 = 1.0,
                                 bool keep_trace = true);

using FalseAlarmObjective =
    std::function<bool(int n, double eta, std::mt19937_64& path_rng)>;

// Single-timescale Robbins-Monro driving P(false alarm) to alpha:
//   eta(n+1) = [eta(n) + a(n) (1_FA(n) - alpha)]_0^inf
// with a(n) = a0/(n+1)^gain_exponent.
double scalar_threshold_calibrate(const FalseAlarmObjective& objective, double alpha, double a0,
                                  int n_iters, std::uint64_t seed, double eta0,
                                  double gain_exponent = 0.7);

}  // namespace fdidet
