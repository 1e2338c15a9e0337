#include "fdidet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fdidet/errors.hpp"
#include "fdidet/rng.hpp"

namespace fdidet {

using nlohmann::json;

std::string to_string(DetectorType t) {
    switch (t) {
        case DetectorType::quickdet: return "quickdet";
        case DetectorType::chi2: return "chi2";
        case DetectorType::det: return "det";
        case DetectorType::gcusum: return "gcusum";
    }
    return "?";
}

DetectorType detector_type_from_string(const std::string& s) {
    if (s == "quickdet") return DetectorType::quickdet;
    if (s == "chi2") return DetectorType::chi2;
    if (s == "det") return DetectorType::det;
    if (s == "gcusum") return DetectorType::gcusum;
    throw ConfigError("unknown detector type '" + s + "'");
}

// ---------------------------------------------------------------------------
// config parsing (strict: unknown keys are errors, reported with field paths)

namespace {

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw ConfigError(path + "/" + it.key() + ": unknown key");
    }
}

const json& at(const json& j, const std::string& path, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "/" + key + ": missing");
    return *it;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(path + ": expected a nested array (row-major matrix)");
    std::size_t rows = j.size();
    std::size_t cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ConfigError(path + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ConfigError(path + ": non-numeric entry");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "", {"model", "scheme", "theta", "detector", "alphas", "n_paths", "T_max",
                       "pruning", "calibration", "seed", "out"});
    ExperimentConfig cfg;

    const json& jm = at(j, "", "model");
    check_keys(jm, "model", {"A", "Q", "sensors"});
    Eigen::MatrixXd A = parse_matrix(at(jm, "model", "A"), "model/A");
    Eigen::MatrixXd Q = parse_matrix(at(jm, "model", "Q"), "model/Q");
    const json& js = at(jm, "model", "sensors");
    if (!js.is_array() || js.empty()) throw ConfigError("model/sensors: expected a non-empty array");
    std::vector<Sensor> sensors;
    for (std::size_t i = 0; i < js.size(); ++i) {
        std::string p = "model/sensors[" + std::to_string(i) + "]";
        check_keys(js[i], p, {"C", "R", "safe"});
        Sensor s;
        s.C = parse_matrix(at(js[i], p, "C"), p + "/C");
        s.R = parse_matrix(at(js[i], p, "R"), p + "/R");
        s.safe = at(js[i], p, "safe").get<bool>();
        sensors.push_back(std::move(s));
    }
    cfg.model = std::make_shared<StateSpaceModel>(A, Q, std::move(sensors));

    const json& jsch = at(j, "", "scheme");
    check_keys(jsch, "scheme", {"T_A", "Sigma_b"});
    Eigen::MatrixXd T_A = parse_matrix(at(jsch, "scheme", "T_A"), "scheme/T_A");
    Eigen::MatrixXd Sigma_b = parse_matrix(at(jsch, "scheme", "Sigma_b"), "scheme/Sigma_b");
    if (static_cast<int>(T_A.rows()) != cfg.model->unsafe_dim())
        throw ConfigError("scheme/T_A: dimension does not match the model's unsafe block");
    cfg.scheme = std::make_shared<LinearAttackScheme>(std::move(T_A), std::move(Sigma_b));

    cfg.theta = at(j, "", "theta").get<double>();
    if (!(cfg.theta > 0.0 && cfg.theta < 1.0)) throw ConfigError("theta: must lie in (0,1)");

    const json& jd = at(j, "", "detector");
    check_keys(jd, "detector", {"type", "gamma", "eta", "b", "J"});
    std::string type = at(jd, "detector", "type").get<std::string>();
    if (type == "all") {
        cfg.all_detectors = true;
    } else {
        cfg.detector.type = detector_type_from_string(type);
    }
    if (jd.contains("gamma")) cfg.detector.gamma = jd["gamma"].get<double>();
    if (jd.contains("eta")) cfg.detector.eta = jd["eta"].get<double>();
    if (jd.contains("b")) cfg.detector.b = jd["b"].get<double>();
    if (jd.contains("J")) cfg.detector.J = jd["J"].get<int>();
    if (cfg.detector.J < 1) throw ConfigError("detector/J: must be >= 1");

    for (const auto& a : at(j, "", "alphas")) {
        double alpha = a.get<double>();
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alphas: entries must lie in (0,1)");
        cfg.alphas.push_back(alpha);
    }
    cfg.n_paths = at(j, "", "n_paths").get<int>();
    if (cfg.n_paths < 1) throw ConfigError("n_paths: must be >= 1");
    cfg.T_max = at(j, "", "T_max").get<int>();
    if (cfg.T_max < 1) throw ConfigError("T_max: must be >= 1");

    if (j.contains("pruning")) {
        const json& jp = j["pruning"];
        check_keys(jp, "pruning", {"epsilon", "max_bank", "W"});
        if (jp.contains("epsilon")) cfg.pruning.epsilon = jp["epsilon"].get<double>();
        if (jp.contains("max_bank")) cfg.pruning.max_bank = jp["max_bank"].get<int>();
        if (jp.contains("W")) cfg.pruning.W = jp["W"].get<int>();
        if (cfg.pruning.max_bank < 1) throw ConfigError("pruning/max_bank: must be >= 1");
        if (cfg.pruning.W < 1) throw ConfigError("pruning/W: must be >= 1");
    }

    if (j.contains("calibration")) {
        const json& jc = j["calibration"];
        check_keys(jc, "calibration",
                   {"a0", "b0", "delta0", "b_exponent", "n_iters", "gamma0", "lambda0",
                    "scalar_a0", "scalar_n_iters", "scalar_exponent"});
        auto& c = cfg.calibration;
        if (jc.contains("a0")) c.spsa.a0 = jc["a0"].get<double>();
        if (jc.contains("b0")) c.spsa.b0 = jc["b0"].get<double>();
        if (jc.contains("delta0")) c.spsa.delta0 = jc["delta0"].get<double>();
        if (jc.contains("b_exponent")) c.spsa.b_exponent = jc["b_exponent"].get<double>();
        if (jc.contains("n_iters")) c.n_iters = jc["n_iters"].get<int>();
        if (jc.contains("gamma0")) c.gamma0 = jc["gamma0"].get<double>();
        if (jc.contains("lambda0")) c.lambda0 = jc["lambda0"].get<double>();
        if (jc.contains("scalar_a0")) c.scalar_a0 = jc["scalar_a0"].get<double>();
        if (jc.contains("scalar_n_iters")) c.scalar_n_iters = jc["scalar_n_iters"].get<int>();
        if (jc.contains("scalar_exponent")) c.scalar_exponent = jc["scalar_exponent"].get<double>();
    }

    cfg.seed = at(j, "", "seed").get<std::uint64_t>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["model"]["A"] = matrix_to_json(cfg.model->A());
    j["model"]["Q"] = matrix_to_json(cfg.model->Q());
    j["model"]["sensors"] = json::array();
    for (const Sensor& s : cfg.model->sensors())
        j["model"]["sensors"].push_back(
            {{"C", matrix_to_json(s.C)}, {"R", matrix_to_json(s.R)}, {"safe", s.safe}});
    j["scheme"]["T_A"] = matrix_to_json(cfg.scheme->T_A());
    j["scheme"]["Sigma_b"] = matrix_to_json(cfg.scheme->Sigma_b());
    j["theta"] = cfg.theta;
    j["detector"] = {{"type", cfg.all_detectors ? "all" : to_string(cfg.detector.type)},
                     {"gamma", cfg.detector.gamma},
                     {"eta", cfg.detector.eta},
                     {"b", cfg.detector.b},
                     {"J", cfg.detector.J}};
    j["alphas"] = cfg.alphas;
    j["n_paths"] = cfg.n_paths;
    j["T_max"] = cfg.T_max;
    j["pruning"] = {{"epsilon", cfg.pruning.epsilon},
                    {"max_bank", cfg.pruning.max_bank},
                    {"W", cfg.pruning.W}};
    const auto& c = cfg.calibration;
    j["calibration"] = {{"a0", c.spsa.a0},
                        {"b0", c.spsa.b0},
                        {"delta0", c.spsa.delta0},
                        {"b_exponent", c.spsa.b_exponent},
                        {"n_iters", c.n_iters},
                        {"gamma0", c.gamma0},
                        {"lambda0", c.lambda0},
                        {"scalar_a0", c.scalar_a0},
                        {"scalar_n_iters", c.scalar_n_iters},
                        {"scalar_exponent", c.scalar_exponent}};
    j["seed"] = cfg.seed;
    j["out"] = cfg.out;
    return j;
}

// ---------------------------------------------------------------------------
// path execution

PathRunner::PathRunner(const ExperimentConfig& cfg) : cfg_(cfg) {
    PruneConfig pc{cfg_.pruning.epsilon, cfg_.pruning.max_bank};
    belief_engine_ = std::make_shared<BeliefEngine>(*cfg_.model, *cfg_.scheme, cfg_.theta, pc,
                                                    cfg_.T_max + 8);
}

const Eigen::MatrixXd& PathRunner::det_sigma() const {
    if (!det_sigma_)
        det_sigma_ = std::make_shared<Eigen::MatrixXd>(
            estimate_det_sigma(*cfg_.model, 100000, derive_seed(cfg_.seed, 0xd5)));
    return *det_sigma_;
}

namespace {

// Drives one sample path, handing each step's attacked innovation (and the
// standard filter's previous estimate) to the visitor. The visitor returns
// true to halt the simulation.
template <typename Visitor>
int drive_path(const ExperimentConfig& cfg, std::uint64_t path_seed, const PathOptions& opts,
               Visitor&& visit) {
    PathRng prng(path_seed);
    const StateSpaceModel& model = *cfg.model;
    const int ms = model.safe_dim();
    int t;
    if (opts.force_no_attack)
        t = kNeverOnset;
    else if (opts.forced_onset)
        t = *opts.forced_onset;
    else
        t = sample_attack_onset(cfg.theta, prng.attack);

    int horizon = opts.horizon.value_or(cfg.T_max);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.state_dim());
    KalmanState kf = steady_state_init(model);
    for (int k = 1; k <= horizon; ++k) {
        auto [x_next, y] = simulate_step(x, model, prng.process);
        x = x_next;
        Eigen::VectorXd z = y - model.C() * (model.A() * kf.x_hat);
        Eigen::VectorXd ztilde = apply_linear_attack(*cfg.scheme, z, ms, k, t, prng.attack);
        const Eigen::VectorXd& xhat_prev = kf.x_hat;
        if (visit(k, ztilde, xhat_prev, t)) return t;
        kf = kf_step_with_innovation(kf, model, ztilde);
    }
    return t;
}

PathOutcome outcome_from(std::optional<int> tau, int t) {
    PathOutcome o;
    o.tau = tau;
    o.t = t;
    if (tau) {
        o.false_alarm = *tau < t;
        o.detected = !o.false_alarm;
        o.delay = o.detected ? *tau - t : 0;
    }
    return o;
}

}  // namespace

PathOutcome PathRunner::run(const DetectorSpec& spec, std::uint64_t path_seed,
                            const PathOptions& opts) const {
    const StateSpaceModel& model = *cfg_.model;
    const int ms = model.safe_dim();
    std::optional<int> tau;

    switch (spec.type) {
        case DetectorType::quickdet: {
            BeliefState bs = belief_engine_->init();
            drive_path(cfg_, path_seed, opts,
                       [&](int k, const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xprev,
                           int) {
                           belief_engine_->step(bs, ztilde, xprev);
                           if (quickdet_step(bs.pi, spec.gamma).stop) {
                               tau = k;
                               return true;
                           }
                           return false;
                       });
            break;
        }
        case DetectorType::chi2: {
            Chi2Detector chi2(innovation_covariance(model), spec.J, spec.eta);
            drive_path(cfg_, path_seed, opts,
                       [&](int k, const Eigen::VectorXd& ztilde, const Eigen::VectorXd&, int) {
                           if (chi2.step(ztilde).stop) {
                               tau = k;
                               return true;
                           }
                           return false;
                       });
            break;
        }
        case DetectorType::det: {
            DetDetector det(model, det_sigma(), spec.J, spec.eta);
            drive_path(cfg_, path_seed, opts,
                       [&](int k, const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xprev,
                           int) {
                           Eigen::VectorXd pred = model.A() * xprev;
                           Eigen::VectorXd ys = ztilde.head(ms) + model.C_safe() * pred;
                           Eigen::VectorXd yu =
                               ztilde.tail(ztilde.size() - ms) + model.C_unsafe() * pred;
                           if (det.step(ys, yu).stop) {
                               tau = k;
                               return true;
                           }
                           return false;
                       });
            break;
        }
        case DetectorType::gcusum: {
            GCusumDetector g(model, *cfg_.scheme, spec.b, cfg_.pruning.W, cfg_.T_max + 8);
            drive_path(cfg_, path_seed, opts,
                       [&](int k, const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xprev,
                           int) {
                           if (g.step(ztilde, xprev).stop) {
                               tau = k;
                               return true;
                           }
                           return false;
                       });
            break;
        }
    }

    // recover the onset for bookkeeping (drive_path returned it, but the
    // lambdas above close over tau only)
    PathRng prng(path_seed);
    int t;
    if (opts.force_no_attack)
        t = kNeverOnset;
    else if (opts.forced_onset)
        t = *opts.forced_onset;
    else
        t = sample_attack_onset(cfg_.theta, prng.attack);
    return outcome_from(tau, t);
}

PathRunner::CrossingResult PathRunner::quickdet_crossings(const std::vector<double>& gammas,
                                                          std::uint64_t path_seed,
                                                          const PathOptions& opts) const {
    CrossingResult res;
    res.tau.assign(gammas.size(), std::nullopt);
    BeliefState bs = belief_engine_->init();
    std::size_t remaining = gammas.size();
    res.t = drive_path(cfg_, path_seed, opts,
                       [&](int k, const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xprev,
                           int) {
                           belief_engine_->step(bs, ztilde, xprev);
                           for (std::size_t i = 0; i < gammas.size(); ++i) {
                               if (!res.tau[i] && bs.pi >= gammas[i]) {
                                   res.tau[i] = k;
                                   --remaining;
                               }
                           }
                           return remaining == 0;
                       });
    return res;
}

PathRunner::Trajectory PathRunner::trajectory(DetectorType type, std::uint64_t path_seed,
                                              const PathOptions& opts) const {
    const StateSpaceModel& model = *cfg_.model;
    const int ms = model.safe_dim();
    Trajectory traj;
    traj.stat.reserve(static_cast<std::size_t>(opts.horizon.value_or(cfg_.T_max)));

    switch (type) {
        case DetectorType::quickdet: {
            BeliefState bs = belief_engine_->init();
            traj.t = drive_path(cfg_, path_seed, opts,
                                [&](int, const Eigen::VectorXd& ztilde,
                                    const Eigen::VectorXd& xprev, int) {
                                    belief_engine_->step(bs, ztilde, xprev);
                                    traj.stat.push_back(bs.pi);
                                    return false;
                                });
            break;
        }
        case DetectorType::chi2: {
            Chi2Detector chi2(innovation_covariance(model), cfg_.detector.J,
                              std::numeric_limits<double>::infinity());
            traj.t = drive_path(cfg_, path_seed, opts,
                                [&](int, const Eigen::VectorXd& ztilde, const Eigen::VectorXd&,
                                    int) {
                                    traj.stat.push_back(chi2.step(ztilde).statistic);
                                    return false;
                                });
            break;
        }
        case DetectorType::det: {
            DetDetector det(model, det_sigma(), cfg_.detector.J,
                            std::numeric_limits<double>::infinity());
            traj.t = drive_path(
                cfg_, path_seed, opts,
                [&](int, const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xprev, int) {
                    Eigen::VectorXd pred = model.A() * xprev;
                    Eigen::VectorXd ys = ztilde.head(ms) + model.C_safe() * pred;
                    Eigen::VectorXd yu = ztilde.tail(ztilde.size() - ms) + model.C_unsafe() * pred;
                    traj.stat.push_back(det.step(ys, yu).statistic);
                    return false;
                });
            break;
        }
        case DetectorType::gcusum: {
            GCusumDetector g(model, *cfg_.scheme, std::numeric_limits<double>::infinity(),
                             cfg_.pruning.W, opts.horizon.value_or(cfg_.T_max) + 8);
            traj.t = drive_path(cfg_, path_seed, opts,
                                [&](int, const Eigen::VectorXd& ztilde,
                                    const Eigen::VectorXd& xprev, int) {
                                    traj.stat.push_back(g.step(ztilde, xprev).statistic);
                                    return false;
                                });
            break;
        }
    }
    return traj;
}

std::vector<TraceRow> PathRunner::belief_trace(std::uint64_t path_seed,
                                               const PathOptions& opts) const {
    std::vector<TraceRow> rows;
    BeliefState bs = belief_engine_->init();
    drive_path(cfg_, path_seed, opts,
               [&](int k, const Eigen::VectorXd& ztilde, const Eigen::VectorXd& xprev, int) {
                   belief_engine_->step(bs, ztilde, xprev);
                   rows.push_back({k, bs.pi, static_cast<int>(bs.bank.size()), bs.map_onset()});
                   return false;
               });
    return rows;
}

// ---------------------------------------------------------------------------
// calibration wiring

namespace {

double path_cost(std::optional<int> tau, int t, double lambda, int T_max) {
    if (!tau) return std::max(0, T_max - t);  // timeout: neither FA nor detection
    if (*tau < t) return lambda;
    return static_cast<double>(*tau - t);
}

}  // namespace

CalibrationResult calibrate_quickdet(const PathRunner& runner, double alpha, std::uint64_t seed) {
    const ExperimentConfig& cfg = runner.config();
    SpsaObjective objective = [&](int, double gp, double gm, double g0, double lambda,
                                  std::mt19937_64& path_rng) {
        std::uint64_t path_seed = path_rng();
        auto res = runner.quickdet_crossings({gm, g0, gp}, path_seed);
        SpsaCostSample s;
        s.d_minus = path_cost(res.tau[0], res.t, lambda, cfg.T_max);
        s.d_plus = path_cost(res.tau[2], res.t, lambda, cfg.T_max);
        s.fa_at_gamma = res.tau[1] && *res.tau[1] < res.t;
        return s;
    };
    return spsa_calibrate(objective, cfg.calibration.spsa, alpha, cfg.calibration.n_iters, seed,
                          cfg.calibration.gamma0, cfg.calibration.lambda0);
}

double calibrate_scalar(const PathRunner& runner, DetectorType type, double alpha,
                        std::uint64_t seed) {
    if (type != DetectorType::chi2 && type != DetectorType::det)
        throw ConfigError("calibrate_scalar: detector family must be chi2 or det");
    const ExperimentConfig& cfg = runner.config();
    DetectorSpec spec = cfg.detector;
    spec.type = type;
    // start near the H0 mean of the windowed statistic
    double dim = (type == DetectorType::chi2) ? cfg.model->obs_dim() : cfg.model->state_dim();
    double eta0 = spec.J * dim;
    FalseAlarmObjective objective = [&, spec](int, double eta, std::mt19937_64& path_rng) mutable {
        spec.eta = eta;
        std::uint64_t path_seed = path_rng();
        PathOutcome o = runner.run(spec, path_seed);
        return o.false_alarm;
    };
    return scalar_threshold_calibrate(objective, alpha, cfg.calibration.scalar_a0,
                                      cfg.calibration.scalar_n_iters, seed, eta0,
                                      cfg.calibration.scalar_exponent);
}

// ---------------------------------------------------------------------------
// evaluation

EvalStats evaluate_detector(const PathRunner& runner, const DetectorSpec& spec, int n_paths,
                            std::uint64_t seed) {
    EvalStats st;
    std::map<int, std::pair<long, double>> bins;  // onset bin -> (count, delay sum)
    constexpr int kBinWidth = 5;
    double delay_sum = 0.0, delay_sq = 0.0;
    for (int i = 0; i < n_paths; ++i) {
        PathOutcome o = runner.run(spec, derive_seed(seed, static_cast<std::uint64_t>(i)));
        if (o.false_alarm) {
            ++st.n_false_alarm;
        } else if (o.tau) {
            ++st.n_detected;
            delay_sum += o.delay;
            delay_sq += static_cast<double>(o.delay) * o.delay;
            auto& bin = bins[o.t / kBinWidth];
            bin.first += 1;
            bin.second += o.delay;
        } else {
            ++st.n_timeout;
        }
    }
    st.pfa = static_cast<double>(st.n_false_alarm) / n_paths;
    if (st.n_detected > 0) {
        st.mean_delay = delay_sum / st.n_detected;
        if (st.n_detected > 1) {
            double var = (delay_sq - delay_sum * delay_sum / st.n_detected) / (st.n_detected - 1);
            st.delay_se = std::sqrt(std::max(var, 0.0) / st.n_detected);
        }
        // max / weighted-mean over onset bins with enough mass: finite-sample
        // proxies for the Lorden / Pollak criteria
        double wadd = 0.0, cadd_num = 0.0;
        long cadd_den = 0;
        bool any = false;
        for (const auto& [bin, cs] : bins) {
            if (cs.first < 20) continue;
            any = true;
            wadd = std::max(wadd, cs.second / cs.first);
            cadd_num += cs.second;
            cadd_den += cs.first;
        }
        if (any) {
            st.wadd = wadd;
            st.cadd = cadd_num / cadd_den;
        }
    }
    return st;
}

double estimate_far(const PathRunner& runner, const DetectorSpec& spec, int n_paths, int horizon,
                    std::uint64_t seed) {
    PathOptions opts;
    opts.force_no_attack = true;
    opts.horizon = horizon;
    long alarms = 0;
    double total_time = 0.0;
    for (int i = 0; i < n_paths; ++i) {
        PathOutcome o =
            runner.run(spec, derive_seed(seed ^ 0xfa12, static_cast<std::uint64_t>(i)), opts);
        if (o.tau) {
            ++alarms;
            total_time += *o.tau;
        } else {
            total_time += horizon;
        }
    }
    return total_time > 0.0 ? alarms / total_time : 0.0;
}

std::vector<SweepRow> monte_carlo_sweep(const ExperimentConfig& cfg) {
    PathRunner runner(cfg);
    std::vector<DetectorType> types;
    if (cfg.all_detectors)
        types = {DetectorType::quickdet, DetectorType::chi2, DetectorType::det,
                 DetectorType::gcusum};
    else
        types = {cfg.detector.type};

    std::vector<SweepRow> rows;
    for (double alpha : cfg.alphas) {
        for (DetectorType type : types) {
            DetectorSpec spec = cfg.detector;
            spec.type = type;
            std::uint64_t calib_seed =
                derive_seed(cfg.seed, 0xca11b ^ static_cast<std::uint64_t>(type) ^
                                          static_cast<std::uint64_t>(alpha * 1e6));
            double threshold = 0.0;
            switch (type) {
                case DetectorType::quickdet: {
                    CalibrationResult cr = calibrate_quickdet(runner, alpha, calib_seed);
                    spec.gamma = threshold = cr.gamma_star;
                    break;
                }
                case DetectorType::chi2:
                case DetectorType::det:
                    spec.eta = threshold = calibrate_scalar(runner, type, alpha, calib_seed);
                    break;
                case DetectorType::gcusum:
                    spec.b = threshold = gcusum_threshold(alpha);
                    break;
            }

            std::uint64_t eval_seed = derive_seed(cfg.seed, 0xe7a1 ^ static_cast<std::uint64_t>(
                                                                         alpha * 1e6));
            EvalStats st = evaluate_detector(runner, spec, cfg.n_paths, eval_seed);

            SweepRow row;
            row.detector = to_string(type);
            row.alpha = alpha;
            row.threshold = threshold;
            row.pfa = st.pfa;
            row.mean_delay = st.mean_delay;
            row.wadd = st.wadd;
            row.cadd = st.cadd;
            row.n_paths = cfg.n_paths;
            row.seed = cfg.seed;
            row.n_detected = st.n_detected;
            row.n_false_alarm = st.n_false_alarm;
            row.n_timeout = st.n_timeout;
            row.flagged = st.n_detected == 0;
            if (type == DetectorType::gcusum)
                row.far = estimate_far(runner, spec, std::min(cfg.n_paths, 1000), 2 * cfg.T_max,
                                       eval_seed);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << "detector,alpha,threshold,pfa,far,mean_delay,wadd,cadd,n_paths,seed\n";
    for (const SweepRow& r : rows) {
        out << r.detector << ',' << r.alpha << ',' << r.threshold << ',' << r.pfa << ','
            << r.far << ',' << r.mean_delay << ',' << r.wadd << ',' << r.cadd << ','
            << r.n_paths << ',' << r.seed << '\n';
    }
}

void emit_trace_csv(const std::vector<TraceRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << "k,statistic,bank_size,map_onset\n";
    for (const TraceRow& r : rows)
        out << r.k << ',' << r.statistic << ',' << r.bank_size << ',' << r.map_onset << '\n';
}

// ---------------------------------------------------------------------------
// non-Bayesian FAR matching

std::vector<PathRunner::Trajectory> collect_no_attack_trajectories(const PathRunner& runner,
                                                                   DetectorType type, int n_paths,
                                                                   int horizon,
                                                                   std::uint64_t seed) {
    PathOptions opts;
    opts.force_no_attack = true;
    opts.horizon = horizon;
    std::vector<PathRunner::Trajectory> trajs;
    trajs.reserve(static_cast<std::size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i)
        trajs.push_back(
            runner.trajectory(type, derive_seed(seed ^ 0x7a17, static_cast<std::uint64_t>(i)),
                              opts));
    return trajs;
}

double far_at_threshold(const std::vector<PathRunner::Trajectory>& trajs, double threshold,
                        DetectorType type) {
    long alarms = 0;
    double total_time = 0.0;
    for (const auto& tr : trajs) {
        bool crossed = false;
        for (std::size_t k = 0; k < tr.stat.size(); ++k) {
            bool stop = (type == DetectorType::gcusum || type == DetectorType::quickdet)
                            ? tr.stat[k] >= threshold
                            : tr.stat[k] > threshold;
            if (stop) {
                ++alarms;
                total_time += static_cast<double>(k + 1);
                crossed = true;
                break;
            }
        }
        if (!crossed) total_time += static_cast<double>(tr.stat.size());
    }
    return total_time > 0.0 ? alarms / total_time : 0.0;
}

double match_far_threshold(const std::vector<PathRunner::Trajectory>& trajs, double target_far,
                           DetectorType type) {
    double hi = 0.0;
    for (const auto& tr : trajs)
        for (double s : tr.stat) hi = std::max(hi, s);
    double lo = 0.0;
    hi *= 1.01;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (far_at_threshold(trajs, mid, type) > target_far)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

}  // namespace fdidet
