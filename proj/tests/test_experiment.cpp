#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cnl/experiment.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cnl;
using namespace cnl::experiment;
namespace fs = std::filesystem;

namespace {

const std::string kScenario = std::string(CNL_SOURCE_DIR) + "/scenarios/reflection-gain-s0-2.5.ini";

ExperimentConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / "cnl_experiment_test" / name;
    fs::remove_all(p);
    return p;
}

std::string checksum(const RunManifest& m, const std::string& stage, const std::string& file)
{
    for (const auto& [f, sum] : m.stage(stage)->outputs)
        if (f == file) return sum;
    return "";
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(CNL_BINARY) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config: defaults, schema and tolerance flag")
{
    const auto d = parse("");
    CHECK(d.s0 == order::Rational(5, 2));
    CHECK(d.grid.cells == 16384u);
    CHECK(d.profile == "conormal");

    const auto c = parse("[metric]\ns0 = 11/5\n[wave]\npulse_width = 0.05\n[experiment]\nseed = 7\n");
    CHECK(c.s0 == order::Rational(11, 5));
    CHECK(c.pulse.width == 0.05);
    CHECK(c.scenario().pulse->seed == 7u);

    CHECK_THROWS_WITH_AS(parse("[metric]\nspeed = 2\n"), doctest::Contains("unknown key 'metric.speed'"), ConfigError);
    CHECK_THROWS_AS(parse("[extra]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("loose = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[wave]\ncells = lots\n"), ConfigError);
    CHECK_THROWS_AS(parse("[wave]\ncells = 12\n"), ConfigError);
    CHECK_THROWS_AS(parse("[metric]\nprofile = cubic\n"), ConfigError);
    CHECK_THROWS_AS(parse("[metric]\ns0 = 5/0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[metric]\ns0 = 2\ns0 = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("[wave]\ncfl = 0.95\n"), ConfigError);
    CHECK_THROWS_AS(parse("[wave]\npulse_center = -0.5\n"), ConfigError);

    // looser than the defaults needs the flag; tighter never does
    CHECK_THROWS_WITH_AS(parse("[tolerances]\noracle = 0.3\n"), doctest::Contains("loosened"), ConfigError);
    CHECK_THROWS_AS(parse("[probe]\nmin_decades = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[tolerances]\ngain_floor = 0.4\n"), ConfigError);
    CHECK(parse("[tolerances]\noracle = 0.3\nloosened = true\n").tol.oracle == 0.3);
    CHECK(parse("[tolerances]\noracle = 0.1\n").tol.oracle == 0.1);

    // every key of the canonical form is in the schema
    std::istringstream lines(d.canonical());
    std::size_t count = 0;
    for (std::string line; std::getline(lines, line); ++count) {
        const auto key = line.substr(0, line.find(' '));
        CHECK(std::find(config_keys().begin(), config_keys().end(), key) != config_keys().end());
    }
    CHECK(count == config_keys().size());
}

TEST_CASE("config hash")
{
    auto a = parse("");
    auto b = a;
    b.output_dir = "elsewhere";
    CHECK(a.hash() == b.hash());
    b.seed = 1;
    CHECK(a.hash() != b.hash());
    CHECK(a.hash().size() == 64);
}

TEST_CASE("calc gate")
{
    const auto ok = calc_gate(order::Rational(5, 2), order::Rational(1, 20), order::Rational(1, 2), 1);
    CHECK(ok.admissible);
    CHECK(ok.commutator.all_bounded());
    CHECK(ok.chain.consistent());

    const auto bad = calc_gate(order::Rational(2), order::Rational(1, 20), order::Rational(0), 1);
    CHECK_FALSE(bad.admissible);
    CHECK(bad.message.find("k+1+2ε₀ < s₀") != std::string::npos);

    const auto outside = calc_gate(order::Rational(5, 2), order::Rational(1, 20), order::Rational(1), 1);
    CHECK_FALSE(outside.admissible);
    CHECK(outside.message.find("outside") != std::string::npos);

    const auto js = nlohmann::json::parse(calc_json(ok));
    CHECK(js["theorem_window"]["hi"] == "19/20");
    CHECK(js["admissible"] == true);

    std::istringstream in("s0,eps0,s,k,n\n5/2,1/20,1/2,1,2\n2,1/20,0,1\n");
    const auto csv = calc_batch(in);
    CHECK(csv.find("5/2,1/20,1/2,1,2,true,-1/2,19/20") != std::string::npos);
    CHECK(csv.find("2,1/20,0,1,2,false") != std::string::npos);
    std::istringstream broken("5/2,1/20\n");
    CHECK_THROWS_AS(calc_batch(broken), ConfigError);
}

TEST_CASE("verify_commutant")
{
    const auto r = verify_commutant(0.05, 0.3, 22);
    CHECK(r.points >= 10000);
    CHECK(r.in_support > 0);
    CHECK(r.ok);
    CHECK(r.max_residual <= 1e-10 * r.max_hp_a);
}

TEST_CASE("pipeline: refused configuration")
{
    auto cfg = parse("[metric]\ns0 = 2\n");
    cfg.output_dir = scratch("refused").string();
    const auto m = run_pipeline(cfg);
    CHECK(m.exit_code == 2);
    CHECK(m.verdict == "refused");
    CHECK(m.stage("calc")->status == "refused");
    CHECK(m.stage("calc")->message.find("k+1+2ε₀ < s₀") != std::string::npos);
    CHECK(m.stage("wave")->status == "skipped");
    CHECK(fs::exists(fs::path(cfg.output_dir) / "calc.json"));
    CHECK_FALSE(fs::exists(fs::path(cfg.output_dir) / "field.wfld"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "manifest.json"));
}

TEST_CASE("pipeline: bundled scenario end to end, reproducible")
{
    auto cfg = load_config(kScenario);
    cfg.output_dir = scratch("run1").string();
    const auto m1 = run_pipeline(cfg);
    for (const auto& s : m1.stages) CHECK_MESSAGE(s.status == "ok", s.name << ": " << s.message);
    CHECK(m1.exit_code == 0);
    CHECK(m1.verdict == "pass");
    CHECK(m1.config_hash == cfg.hash());
    CHECK_FALSE(m1.code_version.empty());

    const auto rep = nlohmann::json::parse(std::ifstream(fs::path(cfg.output_dir) / "report.json"));
    CHECK(rep["windows"].size() == 3);
    CHECK(rep["passed"] == true);
    const double r_ref = rep["windows"][1]["r_hat"];
    const double expected = rep["oracle"]["expected_reflected"];
    CHECK(std::abs(r_ref - expected) <= 0.25);

    auto again = cfg;
    again.output_dir = scratch("run2").string();
    const auto m2 = run_pipeline(again);
    CHECK(m2.config_hash == m1.config_hash);
    for (const auto& [stage, file] : std::vector<std::pair<std::string, std::string>>{
             {"calc", "calc.json"}, {"trace", "trace.csv"}, {"trace", "trace_events.json"}, {"wave", "field.wfld"},
             {"probe", "report.json"}, {"probe", "bins.csv"}}) {
        CHECK_MESSAGE(checksum(m1, stage, file) == checksum(m2, stage, file), file);
        CHECK_FALSE(checksum(m1, stage, file).empty());
    }
}

TEST_CASE("pipeline: a failing stage keeps earlier outputs")
{
    auto cfg = parse("[wave]\ncells = 4096\n[probe]\nt_outgoing = 3.3\n");  // packets still overlap at Y
    cfg.output_dir = scratch("partial").string();
    const auto m = run_pipeline(cfg);
    CHECK(m.exit_code == 1);
    CHECK(m.stage("wave")->status == "ok");
    CHECK(m.stage("probe")->status == "failed");
    CHECK(m.stage("report")->status == "skipped");
    CHECK(fs::exists(fs::path(cfg.output_dir) / "field.wfld"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "trace.csv"));
    const auto man = nlohmann::json::parse(std::ifstream(fs::path(cfg.output_dir) / "manifest.json"));
    CHECK(man["stages"][3]["status"] == "failed");
}

TEST_CASE("cli exit codes")
{
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    CHECK(run_cli("calc --s0 5/2 --eps0 1/20 --s 1/2") == 0);
    CHECK(run_cli("calc --s0 2") == 1);
    CHECK(run_cli("verify-commutant --grid 10") == 0);
    {
        std::ofstream(dir / "refused.ini") << "[metric]\ns0 = 2\n[experiment]\noutput_dir = " << (dir / "r").string()
                                           << "\n";
        std::ofstream(dir / "bad.ini") << "[metric]\nfoo = 1\n";
    }
    CHECK(run_cli("pipeline --config " + (dir / "refused.ini").string()) == 2);
    CHECK(run_cli("pipeline --config " + (dir / "bad.ini").string()) == 2);
    CHECK(run_cli("pipeline --config " + (dir / "missing.ini").string()) == 2);
    CHECK(run_cli("no-such-command") == 2);
    CHECK(run_cli("report --run " + (dir / "r").string()) == 2);
}
