#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fdidet/errors.hpp"
#include "fdidet/harness.hpp"
#include "fdidet/rng.hpp"
#include "support/helpers.hpp"

using namespace fdidet;
using nlohmann::json;

namespace {

json reference_json() {
    json j = config_to_json(testutil::reference_config());
    return j;
}

class TempFile {
  public:
    explicit TempFile(const std::string& name) : path_("/tmp/fdidet_test_" + name) {}
    ~TempFile() { std::remove(path_.c_str()); }
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

}  // namespace

TEST_CASE("config round-trips through JSON") {
    json j = reference_json();
    TempFile f("roundtrip.json");
    {
        std::ofstream out(f.path());
        out << j.dump(2);
    }
    ExperimentConfig cfg = load_config(f.path());
    CHECK(config_to_json(cfg).dump() == j.dump());
}

TEST_CASE("unknown config keys are rejected with a field path") {
    json j = reference_json();
    j["modell"] = 1;
    bool threw = false;
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("modell") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("dimension mismatches are config errors") {
    json j = reference_json();
    j["scheme"]["T_A"] = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    json j2 = reference_json();
    j2["model"]["sensors"][0]["safee"] = true;  // typo inside a nested object
    CHECK_THROWS_AS(parse_config(j2), ConfigError);
}

TEST_CASE("sweep CSV has the exact header and row count") {
    SweepRow row;
    row.detector = "quickdet";
    row.alpha = 0.1;
    row.threshold = 0.7;
    row.pfa = 0.09;
    row.far = 0.001;
    row.mean_delay = 2.5;
    row.wadd = 3.0;
    row.cadd = 2.6;
    row.n_paths = 100;
    row.seed = 7;
    TempFile f("sweep.csv");
    emit_csv({row, row}, f.path());
    std::ifstream in(f.path());
    std::string header;
    std::getline(in, header);
    CHECK(header == "detector,alpha,threshold,pfa,far,mean_delay,wadd,cadd,n_paths,seed");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("an unreachable belief threshold never stops") {
    ExperimentConfig cfg = testutil::reference_config(5);
    cfg.T_max = 120;
    PathRunner runner(cfg);
    DetectorSpec spec;
    spec.type = DetectorType::quickdet;
    spec.gamma = std::nextafter(1.0, 2.0);
    PathOptions opts;
    opts.force_no_attack = true;
    for (std::uint64_t p = 0; p < 20; ++p) {
        PathOutcome o = runner.run(spec, derive_seed(88, p), opts);
        CHECK_FALSE(o.tau.has_value());
        CHECK_FALSE(o.false_alarm);
        CHECK_FALSE(o.detected);
    }
}

TEST_CASE("threshold zero stops immediately; false alarm iff the onset is later") {
    ExperimentConfig cfg = testutil::reference_config(6);
    PathRunner runner(cfg);
    DetectorSpec spec;
    spec.type = DetectorType::quickdet;
    spec.gamma = 0.0;

    PathOptions late;
    late.forced_onset = 5;
    PathOutcome o = runner.run(spec, 123, late);
    REQUIRE(o.tau.has_value());
    CHECK(*o.tau == 1);
    CHECK(o.false_alarm);
    CHECK_FALSE(o.detected);

    PathOptions immediate;
    immediate.forced_onset = 1;
    o = runner.run(spec, 123, immediate);
    REQUIRE(o.tau.has_value());
    CHECK(*o.tau == 1);
    CHECK_FALSE(o.false_alarm);
    CHECK(o.detected);
    CHECK(o.delay == 0);
}

TEST_CASE("paths are deterministic given the seed") {
    ExperimentConfig cfg = testutil::reference_config(77);
    cfg.T_max = 200;
    PathRunner runner(cfg);
    DetectorSpec spec;
    spec.type = DetectorType::quickdet;
    spec.gamma = 0.8;
    for (std::uint64_t p = 0; p < 10; ++p) {
        PathOutcome a = runner.run(spec, derive_seed(9, p));
        PathOutcome b = runner.run(spec, derive_seed(9, p));
        CHECK(a.tau == b.tau);
        CHECK(a.t == b.t);
        CHECK(a.delay == b.delay);
        CHECK(a.false_alarm == b.false_alarm);
        CHECK(a.detected == b.detected);
    }
    auto t1 = runner.belief_trace(314);
    auto t2 = runner.belief_trace(314);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].statistic == t2[i].statistic);
}

TEST_CASE("evaluation accounting: every path is detected, false alarm, or timeout") {
    ExperimentConfig cfg = testutil::reference_config(404);
    cfg.T_max = 150;
    PathRunner runner(cfg);
    DetectorSpec spec;
    spec.type = DetectorType::quickdet;
    spec.gamma = 0.9;
    const int n = 500;
    EvalStats s = evaluate_detector(runner, spec, n, 2024);
    CHECK(s.n_detected + s.n_false_alarm + s.n_timeout == n);
    CHECK(s.pfa == doctest::Approx(static_cast<double>(s.n_false_alarm) / n));
    CHECK(s.n_detected > 0);
}

TEST_CASE("crossing times agree with single-threshold runs") {
    ExperimentConfig cfg = testutil::reference_config(808);
    cfg.T_max = 200;
    PathRunner runner(cfg);
    std::vector<double> gammas = {0.3, 0.6, 0.9};
    for (std::uint64_t p = 0; p < 10; ++p) {
        auto cr = runner.quickdet_crossings(gammas, derive_seed(17, p));
        for (std::size_t i = 0; i < gammas.size(); ++i) {
            DetectorSpec spec;
            spec.type = DetectorType::quickdet;
            spec.gamma = gammas[i];
            PathOutcome o = runner.run(spec, derive_seed(17, p));
            CHECK(cr.tau[i] == o.tau);
            CHECK(cr.t == o.t);
        }
    }
}

TEST_CASE("FAR matching by bisection hits the target on the cached paths") {
    ExperimentConfig cfg = testutil::reference_config(1001);
    PathRunner runner(cfg);
    auto trajs = collect_no_attack_trajectories(runner, DetectorType::chi2, 200, 150, 5150);
    for (double target : {0.01, 0.05, 0.002}) {
        double eta = match_far_threshold(trajs, target, DetectorType::chi2);
        double achieved = far_at_threshold(trajs, eta, DetectorType::chi2);
        // Bisection on a step function: the achieved rate sits just at or
        // below the target, and nudging the threshold down overshoots it.
        CHECK(achieved <= target * (1.0 + 1e-9));
        double below = far_at_threshold(trajs, eta * (1.0 - 1e-6), DetectorType::chi2);
        CHECK(below >= achieved);
    }
}

TEST_CASE("single-path sweep degenerates gracefully") {
    ExperimentConfig cfg = testutil::reference_config(31337);
    cfg.n_paths = 1;
    cfg.T_max = 60;
    cfg.alphas = {0.1};
    cfg.all_detectors = false;
    cfg.detector.type = DetectorType::quickdet;
    cfg.calibration.n_iters = 200;
    cfg.calibration.spsa = SpsaSchedule{0.5, 0.5, 0.3};
    auto rows = monte_carlo_sweep(cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].detector == "quickdet");
    CHECK(rows[0].n_paths == 1);
    CHECK(rows[0].n_detected + rows[0].n_false_alarm + rows[0].n_timeout == 1);
}
