#ifndef CNL_EXPERIMENT_HPP
#define CNL_EXPERIMENT_HPP

#include "cnl/bichar_tracer.hpp"
#include "cnl/order_calculus.hpp"
#include "cnl/regularity_probe.hpp"
#include "cnl/wave_lab.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnl::experiment {

// Bad config file, unknown key, out-of-range value: exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The calc gate refused the scenario; also exit code 2.
class GateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Tolerances {
    double transmitted = 0.25;  // |s_hat(transmitted) - s_hat(incident)|
    double oracle = 0.25;       // |r_hat(reflected) - oracle|
    double jump_gain = 0.1;     // |gain| for the jump control
    double gain_floor = 0.5;
    double margin = 0.25;
    bool loosened = false;      // required for any value looser than the defaults
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string output_dir = "out";
    std::uint64_t seed = 20240611;

    // [metric]
    std::string profile = "conormal";  // conormal | jump | constant
    order::Rational s0{5, 2};
    order::Rational eps0{1, 20};
    order::Rational s{1, 2};
    int k = 1;
    double amplitude = 0.5;
    double radius = 1.0;
    double c_left = 1.0, c_right = 1.5;  // jump; constant uses c_left

    // [wave]
    wave::Grid grid;
    wave::Sponge sponge;
    wave::PulseSpec pulse;
    std::size_t snapshot_stride = 100;

    // [probe]
    probe::FitOptions fit;
    probe::PlanOptions plan;
    double oracle_step = 0.02;

    // [commutant]
    double commutant_delta = 0.05;
    double commutant_eps = 0.3;
    int commutant_grid = 22;

    Tolerances tol;

    bool control() const { return profile != "conormal"; }
    ham::ConormalMetric metric() const;      // conormal profile; flat for controls
    wave::WaveScenario scenario() const;
    /// Sorted key = value lines of every effective setting.
    std::string canonical() const;
    std::string hash() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Keys accepted by the config file, "section.key".
const std::vector<std::string>& config_keys();

// calc ---------------------------------------------------------------------

struct CalcResult {
    order::Rational s0, eps0, s;
    int k = 1, n = 2;
    order::HyperbolicWindow window;
    order::ConstraintChainReport chain;
    order::CommutatorChainReport commutator;
    bool admissible = false;  // gate holds and s lies in the theorem window
    std::string message;      // names the violated inequality when refused
};

CalcResult calc_gate(const order::Rational& s0, const order::Rational& eps0, const order::Rational& s, int k, int n = 2);
std::string calc_json(const CalcResult& c);
/// CSV in (s0,eps0,s,k[,n]) per line, header optional; CSV out with verdicts.
std::string calc_batch(std::istream& in);

// trace / probe --------------------------------------------------------------

trace::GBBPath trace_stage(const ExperimentConfig& cfg);
std::string trace_csv(const trace::GBBPath& p);
std::string trace_events_json(const trace::GBBPath& p);

struct GainOutcome {
    std::vector<probe::ProbeWindow> windows;
    probe::RegularityReport report;
    std::optional<probe::OracleFit> oracle;  // |R| decay over the reflected band
    double expected_reflected = 0;           // r_hat(incident) + oracle r
    bool control = false;
    bool passed = false;                     // theorem verdict, or the no-gain check for controls
};

GainOutcome analyze(const ExperimentConfig& cfg, const wave::WaveField& field, const trace::GBBPath& path);
std::string outcome_json(const GainOutcome& g);
/// Human-readable lines per window, gains, oracle and verdict.
std::string summary(const ExperimentConfig& cfg, const GainOutcome& g);

// verify-commutant -------------------------------------------------------------

struct CommutantCheck {
    std::size_t points = 0;
    std::size_t in_support = 0;
    double max_hp_a = 0;
    double max_residual = 0;  // max |H_p a + b^2 - e|
    std::size_t support_violations = 0;
    bool ok = false;          // residual <= 1e-10 max|H_p a| and no violations
};

CommutantCheck verify_commutant(double delta, double eps, int per_axis, double c0 = 1.0);

// pipeline ---------------------------------------------------------------------

struct StageRecord {
    std::string name;
    std::string status;  // ok | failed | refused | skipped
    std::string message;
    std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256
    double seconds = 0;
};

struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::vector<StageRecord> stages;
    std::string verdict;  // pass | fail | inconclusive | refused | error
    int exit_code = 0;

    std::string json() const;
    const StageRecord* stage(const std::string& name) const;
};

std::string code_version();

/// calc -> trace -> wave -> probe -> report; writes every output and
/// manifest.json under cfg.output_dir. Never throws for stage failures.
RunManifest run_pipeline(const ExperimentConfig& cfg);

}  // namespace cnl::experiment

#endif
