// cnl: command line front end. Exit codes: 0 pass, 1 assertion failure, 2 configuration error.
#include "cnl/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ex = cnl::experiment;
namespace fs = std::filesystem;

namespace {

constexpr int kPass = 0, kFail = 1, kConfig = 2;

ex::ExperimentConfig load(const std::string& path, const std::string& out)
{
    auto cfg = ex::load_config(path);
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
}

void save(const fs::path& p, const std::string& text)
{
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ex::ConfigError("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"conormal-interface wave experiments: order calculus, rays, waves, regularity probes"};
    app.require_subcommand(1);

    std::string config, out;

    // calc
    auto* calc = app.add_subcommand("calc", "Hyperbolic window, constraint chain and commutator terms");
    std::string s0 = "5/2", eps0 = "1/20", s = "1/2", batch;
    int k = 1, n = 2;
    calc->add_option("--s0", s0, "conormal order (rational)");
    calc->add_option("--eps0", eps0, "regularity loss (rational)");
    calc->add_option("--s", s, "Sobolev order (rational)");
    calc->add_option("--k", k, "codimension of Y");
    calc->add_option("--n", n, "ambient dimension");
    calc->add_option("--config", config, "take s0, eps0, s, k from a config file");
    calc->add_option("--batch", batch, "CSV of s0,eps0,s,k[,n]; writes CSV to --out or stdout");
    calc->add_option("--out", out, "output file");

    // trace
    auto* tr = app.add_subcommand("trace", "Trace the scenario's reflected ray");
    tr->add_option("--config", config, "config file")->required();
    tr->add_option("--out", out, "output directory (default from config)");

    // wave run
    auto* wave = app.add_subcommand("wave", "Wave solver");
    wave->require_subcommand(1);
    auto* wrun = wave->add_subcommand("run", "Run the scenario and dump the field");
    std::string field_path;
    wrun->add_option("--config", config, "config file")->required();
    wrun->add_option("--out", out, "output directory (default from config)");

    // probe
    auto* pr = app.add_subcommand("probe", "Fit decay exponents in the incident/reflected/transmitted windows");
    pr->add_option("--config", config, "config file")->required();
    pr->add_option("--field", field_path, "field dump from 'wave run' (default <out>/field.wfld)");
    pr->add_option("--out", out, "output directory (default from config)");

    // verify-commutant
    auto* vc = app.add_subcommand("verify-commutant", "Check H_p a + b^2 - e = 0 and the support estimates on a grid");
    double delta = 0.05, eps = 0.3;
    int grid = 22;
    vc->add_option("--delta", delta, "delta");
    vc->add_option("--eps", eps, "eps");
    vc->add_option("--grid", grid, "points per axis");
    vc->add_option("--config", config, "take delta, eps, grid from a config file");

    // report
    auto* rp = app.add_subcommand("report", "Print the summary of a finished run");
    std::string run_dir;
    rp->add_option("--run", run_dir, "run directory")->required();

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "calc -> trace -> wave -> probe -> report with a manifest");
    pl->add_option("--config", config, "config file")->required();
    pl->add_option("--out", out, "output directory (default from config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kPass : kConfig;
    }

    try {
        if (*calc) {
            if (!batch.empty()) {
                std::ifstream in(batch);
                if (!in) throw ex::ConfigError("cannot open " + batch);
                const auto csv = ex::calc_batch(in);
                if (out.empty())
                    std::cout << csv;
                else
                    save(out, csv);
                return kPass;
            }
            cnl::order::Rational q0, qe, qs;
            if (!config.empty()) {
                const auto cfg = ex::load_config(config);
                q0 = cfg.s0;
                qe = cfg.eps0;
                qs = cfg.s;
                k = cfg.k;
            } else {
                q0 = cnl::order::parse_rational(s0);
                qe = cnl::order::parse_rational(eps0);
                qs = cnl::order::parse_rational(s);
            }
            if (k < 1 || n <= k) throw ex::ConfigError("calc: need 1 <= k < n");
            if (qe <= 0) throw ex::ConfigError("calc: eps0 must be > 0");
            const auto r = ex::calc_gate(q0, qe, qs, k, n);
            const auto js = ex::calc_json(r);
            if (!out.empty()) save(out, js);
            std::cout << js << "\n";
            if (!r.admissible) std::cerr << r.message << "\n";
            return r.admissible ? kPass : kFail;
        }
        if (*tr) {
            const auto cfg = load(config, out);
            const auto path = ex::trace_stage(cfg);
            save(fs::path(cfg.output_dir) / "trace.csv", ex::trace_csv(path));
            save(fs::path(cfg.output_dir) / "trace_events.json", ex::trace_events_json(path));
            std::cout << ex::trace_events_json(path) << "\n";
            return path.events.empty() ? kFail : kPass;
        }
        if (*wrun) {
            const auto cfg = load(config, out);
            const auto sc = cfg.scenario();
            const auto f = cnl::wave::run(sc);
            fs::create_directories(cfg.output_dir);
            const auto p = (fs::path(cfg.output_dir) / "field.wfld").string();
            cnl::wave::write_field(f, sc, p);
            std::cout << p << " " << cnl::wave::sha256_file(p) << "\n";
            return kPass;
        }
        if (*pr) {
            const auto cfg = load(config, out);
            const auto p = field_path.empty() ? (fs::path(cfg.output_dir) / "field.wfld").string() : field_path;
            if (!fs::exists(p)) throw ex::ConfigError("no field dump at " + p + " (run 'wave run' first)");
            const auto f = cnl::wave::read_field(p);
            const auto g = ex::analyze(cfg, f, ex::trace_stage(cfg));
            save(fs::path(cfg.output_dir) / "report.json", ex::outcome_json(g));
            save(fs::path(cfg.output_dir) / "bins.csv", cnl::probe::report_csv(g.report));
            std::cout << ex::summary(cfg, g);
            return g.passed ? kPass : kFail;
        }
        if (*vc) {
            if (!config.empty()) {
                const auto cfg = ex::load_config(config);
                delta = cfg.commutant_delta;
                eps = cfg.commutant_eps;
                grid = cfg.commutant_grid;
            }
            const auto r = ex::verify_commutant(delta, eps, grid);
            nlohmann::json j{{"points", r.points},
                             {"in_support", r.in_support},
                             {"max_hp_a", r.max_hp_a},
                             {"max_residual", r.max_residual},
                             {"relative_residual", r.max_hp_a > 0 ? r.max_residual / r.max_hp_a : 0.0},
                             {"support_violations", r.support_violations},
                             {"ok", r.ok}};
            std::cout << j.dump(2) << "\n";
            return r.ok ? kPass : kFail;
        }
        if (*rp) {
            const fs::path dir(run_dir);
            const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
            if (fs::exists(dir / "summary.txt")) std::cout << slurp(dir / "summary.txt");
            for (const auto& st : manifest["stages"])
                std::cout << "stage " << st["name"].get<std::string>() << ": " << st["status"].get<std::string>()
                          << (st["message"].get<std::string>().empty() ? "" : " (" + st["message"].get<std::string>() + ")")
                          << "\n";
            std::cout << "verdict " << manifest["verdict"].get<std::string>() << "\n";
            return manifest["exit_code"].get<int>();
        }
        if (*pl) {
            const auto cfg = load(config, out);
            const auto m = ex::run_pipeline(cfg);
            std::cout << m.json() << "\n";
            if (const auto* c = m.stage("calc"); c && c->status == "refused") std::cerr << c->message << "\n";
            return m.exit_code;
        }
    } catch (const ex::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const ex::GateError& e) {
        std::cerr << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
    return kConfig;
}
