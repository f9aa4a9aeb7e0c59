#include "cnl/experiment.hpp"

#include "cnl/escape_function.hpp"
#include "json.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#ifndef CNL_VERSION
#define CNL_VERSION "unknown"
#endif

namespace cnl::experiment {

using json = nlohmann::json;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

double to_double(const order::Rational& q) { return boost::rational_cast<double>(q); }

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(out)) throw ConfigError(key + ": not a number: '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": not a boolean: '" + v + "'");
}

order::Rational parse_q(const std::string& key, const std::string& v)
{
    try {
        return order::parse_rational(v);
    } catch (const std::exception& e) {
        throw ConfigError(key + ": not a rational: '" + v + "' (" + e.what() + ")");
    }
}

struct Key {
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

long long parse_int_in(const std::string& key, const std::string& v, long long lo, long long hi)
{
    const auto n = parse_int(key, v);
    if (n < lo || n > hi)
        throw ConfigError(key + ": " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return n;
}

#define CNL_DBL(field)                                                                                       \
    Key{[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.field); }}

#define CNL_INT(field, lo, hi)                                                              \
    Key{[](ExperimentConfig& c, const std::string& k, const std::string& v) {              \
            c.field = static_cast<decltype(c.field)>(parse_int_in(k, v, lo, hi));           \
        },                                                                                  \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }}

Key rational(order::Rational ExperimentConfig::*m)
{
    return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = parse_q(k, v); },
            [m](const ExperimentConfig& c) { return order::to_string(c.*m); }};
}

Key text(std::string ExperimentConfig::*m)
{
    return {[m](ExperimentConfig& c, const std::string&, const std::string& v) { c.*m = v; },
            [m](const ExperimentConfig& c) { return c.*m; }};
}

const std::map<std::string, Key>& schema()
{
    static const std::map<std::string, Key> s = [] {
        std::map<std::string, Key> m;
        m["experiment.name"] = text(&ExperimentConfig::name);
        m["experiment.output_dir"] = text(&ExperimentConfig::output_dir);
        m["experiment.seed"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                    const auto n = parse_int(k, v);
                                    if (n < 0) throw ConfigError(k + ": must be >= 0");
                                    c.seed = static_cast<std::uint64_t>(n);
                                },
                                [](const ExperimentConfig& c) { return std::to_string(c.seed); }};

        m["metric.profile"] = {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                   if (v != "conormal" && v != "jump" && v != "constant")
                                       throw ConfigError(k + ": expected conormal, jump or constant, got '" + v + "'");
                                   c.profile = v;
                               },
                               [](const ExperimentConfig& c) { return c.profile; }};
        m["metric.s0"] = rational(&ExperimentConfig::s0);
        m["metric.eps0"] = rational(&ExperimentConfig::eps0);
        m["metric.s"] = rational(&ExperimentConfig::s);
        m["metric.k"] = CNL_INT(k, 1, 1);
        m["metric.amplitude"] = CNL_DBL(amplitude);
        m["metric.radius"] = CNL_DBL(radius);
        m["metric.c_left"] = CNL_DBL(c_left);
        m["metric.c_right"] = CNL_DBL(c_right);

        m["wave.x_lo"] = CNL_DBL(grid.x_lo);
        m["wave.x_hi"] = CNL_DBL(grid.x_hi);
        m["wave.cells"] = CNL_INT(grid.cells, 64, 1 << 22);
        m["wave.duration"] = CNL_DBL(grid.duration);
        m["wave.cfl"] = CNL_DBL(grid.cfl);
        m["wave.sponge_width"] = CNL_DBL(sponge.width);
        m["wave.sponge_strength"] = CNL_DBL(sponge.strength);
        m["wave.snapshot_stride"] = CNL_INT(snapshot_stride, 1, 1 << 20);
        m["wave.pulse_s_in"] = CNL_DBL(pulse.s_in);
        m["wave.pulse_width"] = CNL_DBL(pulse.width);
        m["wave.pulse_center"] = CNL_DBL(pulse.center);
        m["wave.pulse_analytic"] = {
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.pulse.analytic = parse_bool(k, v); },
            [](const ExperimentConfig& c) { return std::string(c.pulse.analytic ? "true" : "false"); }};

        m["probe.octaves"] = CNL_INT(fit.octaves, 1, 12);
        m["probe.bins_per_octave"] = CNL_INT(fit.bins_per_octave, 1, 16);
        m["probe.min_bins"] = CNL_INT(fit.min_bins, 2, 256);
        m["probe.min_decades"] = CNL_DBL(fit.min_decades);
        m["probe.plateau"] = CNL_DBL(fit.plateau);
        m["probe.padding"] = CNL_INT(fit.padding, 1, 16);
        m["probe.t_incident"] = CNL_DBL(plan.t_incident);
        m["probe.t_outgoing"] = CNL_DBL(plan.t_outgoing);
        m["probe.slab"] = CNL_DBL(plan.slab);
        m["probe.oracle_step"] = CNL_DBL(oracle_step);

        m["commutant.delta"] = CNL_DBL(commutant_delta);
        m["commutant.eps"] = CNL_DBL(commutant_eps);
        m["commutant.grid"] = CNL_INT(commutant_grid, 2, 64);

        m["tolerances.transmitted"] = CNL_DBL(tol.transmitted);
        m["tolerances.oracle"] = CNL_DBL(tol.oracle);
        m["tolerances.jump_gain"] = CNL_DBL(tol.jump_gain);
        m["tolerances.gain_floor"] = CNL_DBL(tol.gain_floor);
        m["tolerances.margin"] = CNL_DBL(tol.margin);
        m["tolerances.loosened"] = {
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.tol.loosened = parse_bool(k, v); },
            [](const ExperimentConfig& c) { return std::string(c.tol.loosened ? "true" : "false"); }};
        return m;
    }();
    return s;
}

void validate(const ExperimentConfig& c)
{
    if (c.name.empty()) throw ConfigError("experiment.name: empty");
    if (c.output_dir.empty()) throw ConfigError("experiment.output_dir: empty");
    if (c.eps0 <= 0) throw ConfigError("metric.eps0: must be > 0");
    if (!(c.amplitude >= 0) || !(c.radius > 0)) throw ConfigError("metric: amplitude >= 0 and radius > 0 required");
    if (!(c.c_left > 0) || !(c.c_right > 0)) throw ConfigError("metric: speeds must be > 0");
    if (!(c.fit.plateau > 0 && c.fit.plateau < 1)) throw ConfigError("probe.plateau: must lie in (0, 1)");
    if (!(c.oracle_step > 0 && c.oracle_step <= 0.05)) throw ConfigError("probe.oracle_step: must lie in (0, 0.05]");
    if (!(c.commutant_delta > 0) || !(c.commutant_eps > 0)) throw ConfigError("commutant: delta, eps must be > 0");

    // Tolerances may only be tightened unless explicitly loosened.
    const Tolerances d;
    const probe::FitOptions fd;
    std::vector<std::string> looser;
    if (c.tol.transmitted > d.transmitted) looser.push_back("tolerances.transmitted");
    if (c.tol.oracle > d.oracle) looser.push_back("tolerances.oracle");
    if (c.tol.jump_gain > d.jump_gain) looser.push_back("tolerances.jump_gain");
    if (c.tol.gain_floor < d.gain_floor) looser.push_back("tolerances.gain_floor");
    if (c.tol.margin > d.margin) looser.push_back("tolerances.margin");
    if (c.fit.min_decades < fd.min_decades) looser.push_back("probe.min_decades");
    if (c.fit.min_bins < fd.min_bins) looser.push_back("probe.min_bins");
    if (!looser.empty() && !c.tol.loosened) {
        std::string s;
        for (const auto& k : looser) s += (s.empty() ? "" : ", ") + k;
        throw ConfigError("looser than the defaults without tolerances.loosened = true: " + s);
    }
    for (double t : {c.tol.transmitted, c.tol.oracle, c.tol.jump_gain, c.tol.margin})
        if (!(t >= 0)) throw ConfigError("tolerances: must be >= 0");

    // A conormal order the metric cannot represent is left to the calc gate,
    // which refuses it with the violated inequality.
    if (!c.control() && c.s0 <= c.k + 1) return;
    try {
        c.scenario().validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("wave: ") + e.what());
    }
}

}  // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : schema()) k.push_back(name);
        return k;
    }();
    return keys;
}

ham::ConormalMetric ExperimentConfig::metric() const
{
    ham::ConormalMetric::Params p;
    p.k = k;
    p.n = 2;
    p.s0 = to_double(s0);
    p.radius = radius;
    if (control()) {
        // the ray only lives on the source side, where the controls are flat
        p.c_smooth = c_left;
        p.amplitude = 0;
    } else {
        p.amplitude = amplitude;
    }
    return ham::ConormalMetric(p);
}

wave::WaveScenario ExperimentConfig::scenario() const
{
    wave::WaveScenario sc;
    if (profile == "conormal")
        sc.speed = wave::SpeedProfile::conormal(metric());
    else if (profile == "jump")
        sc.speed = wave::SpeedProfile::jump(c_left, c_right);
    else
        sc.speed = wave::SpeedProfile::constant(c_left);
    sc.grid = grid;
    sc.sponge = sponge;
    auto p = pulse;
    p.seed = seed;
    sc.pulse = p;
    sc.snapshot_stride = snapshot_stride;
    return sc;
}

std::string ExperimentConfig::canonical() const
{
    std::string out;
    for (const auto& [name, key] : schema()) out += name + " = " + key.get(*this) + "\n";
    return out;
}

std::string ExperimentConfig::hash() const
{
    // where the outputs go is not part of the experiment
    auto c = *this;
    c.output_dir = "-";
    return wave::sha256_hex(c.canonical());
}

ExperimentConfig parse_config(std::istream& in)
{
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    const auto& sch = schema();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const auto it = sch.find(full);
            if (it == sch.end()) throw ConfigError("config: unknown key '" + full + "'");
            it->second.set(c, full, value.get_value<std::string>());
        }
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(in);
}

// calc ---------------------------------------------------------------------

CalcResult calc_gate(const order::Rational& s0, const order::Rational& eps0, const order::Rational& s, int k, int n)
{
    CalcResult r;
    r.s0 = s0;
    r.eps0 = eps0;
    r.s = s;
    r.k = k;
    r.n = n;
    r.window = order::hyperbolic_window(s0, eps0, k);
    r.chain = order::verify_constraint_chain(s0, eps0, s, k, n);
    const auto& th = r.window.theorem;
    const order::Rational gate_lhs = order::Rational(k + 1) + 2 * eps0;
    if (!(gate_lhs < s0)) {
        r.message = "inadmissible: k+1+2ε₀ < s₀ fails (k+1+2ε₀ = " + order::to_string(gate_lhs) +
                    ", s₀ = " + order::to_string(s0) + "); the hyperbolic window is empty";
        return r;
    }
    if (!th.contains(s)) {
        r.message = "inadmissible: s = " + order::to_string(s) + " outside the hyperbolic window " + order::to_string(th);
        return r;
    }
    r.commutator = order::hyperbolic_commutator_chain(s0, eps0, s, k, n);
    if (!r.commutator.all_bounded()) {
        r.message = "commutator chain has an unbounded term";
        return r;
    }
    if (!r.chain.consistent()) {
        r.message = "constraint chain inconsistent";
        return r;
    }
    r.admissible = true;
    r.message = "admissible";
    return r;
}

std::string calc_json(const CalcResult& c)
{
    auto win = [](const order::RegularityWindow& w) {
        return json{{"lo", w.lo ? json(order::to_string(*w.lo)) : json("-inf")},
                    {"hi", w.hi ? json(order::to_string(*w.hi)) : json("+inf")},
                    {"admissible", w.admissible},
                    {"gate", w.gate.describe()}};
    };
    json terms = json::array();
    for (const auto& t : c.commutator.checks)
        terms.push_back({{"term", t.term}, {"order", order::to_string(t.order)}, {"bounded", t.verdict.holds}});
    json j{{"s0", order::to_string(c.s0)},
           {"eps0", order::to_string(c.eps0)},
           {"s", order::to_string(c.s)},
           {"k", c.k},
           {"n", c.n},
           {"theorem_window", win(c.window.theorem)},
           {"derived_window", win(c.window.derived)},
           {"chain",
            {{"raw", c.chain.raw.holds},
             {"reduced", c.chain.reduced.holds},
             {"reduction", c.chain.reduction.holds},
             {"consistent", c.chain.consistent()}}},
           {"commutator_terms", terms},
           {"admissible", c.admissible},
           {"message", c.message}};
    return j.dump(2);
}

std::string calc_batch(std::istream& in)
{
    std::ostringstream out;
    out << "s0,eps0,s,k,n,admissible,window_lo,window_hi,chain_consistent,message\n";
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            cell.erase(0, cell.find_first_not_of(" \t\r"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            f.push_back(cell);
        }
        if (lineno == 1 && !f.empty() && f[0] == "s0") continue;  // header
        if (f.size() < 4 || f.size() > 5)
            throw ConfigError("calc batch line " + std::to_string(lineno) + ": expected s0,eps0,s,k[,n]");
        const auto at = [&](int i) { return "line " + std::to_string(lineno) + " field " + std::to_string(i + 1); };
        const auto s0 = parse_q(at(0), f[0]), eps0 = parse_q(at(1), f[1]), s = parse_q(at(2), f[2]);
        const auto k = static_cast<int>(parse_int(at(3), f[3]));
        const auto n = f.size() == 5 ? static_cast<int>(parse_int(at(4), f[4])) : k + 1;
        if (k < 1 || n <= k) throw ConfigError(at(3) + ": need 1 <= k < n");
        if (eps0 <= 0) throw ConfigError(at(1) + ": eps0 must be > 0");
        const auto r = calc_gate(s0, eps0, s, k, n);
        const auto& th = r.window.theorem;
        out << f[0] << ',' << f[1] << ',' << f[2] << ',' << k << ',' << n << ',' << (r.admissible ? "true" : "false")
            << ',' << (th.lo ? order::to_string(*th.lo) : "") << ',' << (th.hi ? order::to_string(*th.hi) : "") << ','
            << (r.chain.consistent() ? "true" : "false") << ",\"" << r.message << "\"\n";
    }
    return out.str();
}

// trace / probe --------------------------------------------------------------

trace::GBBPath trace_stage(const ExperimentConfig& cfg) { return probe::scenario_ray(cfg.metric(), cfg.scenario()); }

std::string trace_csv(const trace::GBBPath& p)
{
    std::ostringstream os;
    os << std::setprecision(17) << "leg,s,t,x,tau,xi\n";
    for (std::size_t l = 0; l < p.legs.size(); ++l)
        for (const auto& smp : p.legs[l])
            os << l << ',' << smp.t << ',' << smp.q.x[0] << ',' << smp.q.x[1] << ',' << smp.q.xi[0] << ','
               << smp.q.xi[1] << '\n';
    return os.str();
}

std::string trace_events_json(const trace::GBBPath& p)
{
    json ev = json::array();
    for (const auto& e : p.events)
        ev.push_back({{"type", trace::to_string(e.type)},
                      {"s", e.time},
                      {"point", e.point.x},
                      {"incoming", e.incoming},
                      {"outgoing", e.outgoing}});
    return json{{"legs", p.legs.size()}, {"events", ev}}.dump(2);
}

GainOutcome analyze(const ExperimentConfig& cfg, const wave::WaveField& field, const trace::GBBPath& path)
{
    const auto sc = cfg.scenario();
    if (field.scenario_hash != sc.hash()) throw ConfigError("probe: field was computed for a different scenario");
    GainOutcome g;
    g.control = cfg.control();
    g.windows = probe::window_plan(sc, path, cfg.plan);

    std::vector<probe::WindowResult> fits;
    for (const auto& w : g.windows) fits.push_back({w.label, w, probe::decay_fit(field, w, cfg.fit)});
    const auto& inc = fits[0].fit;
    const auto& ref = fits[1].fit;

    probe::GainOptions go;
    go.tol_transmitted = cfg.tol.transmitted;
    go.gain_floor = cfg.tol.gain_floor;
    go.margin = cfg.tol.margin;
    go.oracle_tol = cfg.tol.oracle;
    if (ref.confident() && inc.confident()) {
        const double half_bin = std::exp2(-0.5 / cfg.fit.bins_per_octave);
        const double a = cfg.profile == "conormal" ? -cfg.radius : -1.0;
        g.oracle = probe::helmholtz_decay(sc.speed.c, a, -a, ref.k_lo * half_bin, ref.k_hi / half_bin,
                                          cfg.fit.bins_per_octave, 8, cfg.oracle_step);
        g.expected_reflected = inc.r_hat + g.oracle->r;
        go.oracle_reflected = g.expected_reflected;
    }
    g.report = probe::gain_report(fits, cfg.s0, cfg.eps0, cfg.k, go);

    if (!g.control) {
        g.passed = g.report.verdict == probe::Verdict::Pass;
    } else if (cfg.profile == "constant") {
        g.passed = g.report.reflected_absent;
    } else {
        bool confident = true;
        for (const auto& w : g.report.windows) confident = confident && w.fit.confident();
        g.passed = confident && std::abs(g.report.gain_reflected) <= cfg.tol.jump_gain &&
                   std::abs(g.report.gain_transmitted) <= cfg.tol.transmitted &&
                   (!g.oracle || g.report.oracle_matched);
    }
    return g;
}

std::string outcome_json(const GainOutcome& g)
{
    auto j = json::parse(probe::report_json(g.report));
    j["theorem_verdict"] = j["verdict"];
    j["control"] = g.control;
    j["passed"] = g.passed;
    if (g.oracle) {
        json bins = json::array();
        for (const auto& b : g.oracle->bins) bins.push_back({b.k, b.mean});
        j["oracle"] = {{"r_reflection", g.oracle->r},
                       {"stderr", g.oracle->stderr_},
                       {"expected_reflected", g.expected_reflected},
                       {"bins", bins}};
    }
    return j.dump(2);
}

// verify-commutant -------------------------------------------------------------

CommutantCheck verify_commutant(double delta, double eps, int per_axis, double c0)
{
    const auto frame = escape::precise_localizer_frame(c0);
    escape::EscapeParams p;
    p.delta = delta;
    p.eps = eps;
    p.c0 = c0;
    p.validate();
    const auto samples = escape::box_samples(frame, p, per_axis);
    CommutantCheck r;
    r.points = samples.size();
    for (const auto& q : samples) {
        const auto d = escape::decompose_commutator(q, frame, p);
        r.max_hp_a = std::max(r.max_hp_a, std::abs(d.hp_a));
        r.max_residual = std::max(r.max_residual, std::abs(d.hp_a + d.b * d.b - d.e));
    }
    const auto sup = escape::check_support_estimates(samples, frame, p);
    r.in_support = sup.in_support;
    r.support_violations = sup.violations.size();
    r.ok = r.max_hp_a > 0 && r.max_residual <= 1e-10 * r.max_hp_a && sup.ok();
    return r;
}

// pipeline ---------------------------------------------------------------------

std::string code_version() { return CNL_VERSION; }

std::string RunManifest::json() const
{
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages) {
        nlohmann::json outs = nlohmann::json::object();
        for (const auto& [file, sum] : s.outputs) outs[file] = sum;
        st.push_back({{"name", s.name},
                      {"status", s.status},
                      {"message", s.message},
                      {"outputs", outs},
                      {"seconds", s.seconds}});
    }
    return nlohmann::json{{"config_hash", config_hash},
                          {"code_version", code_version},
                          {"stages", st},
                          {"verdict", verdict},
                          {"exit_code", exit_code}}
        .dump(2);
}

const StageRecord* RunManifest::stage(const std::string& name) const
{
    for (const auto& s : stages)
        if (s.name == name) return &s;
    return nullptr;
}

namespace {

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string summary_text(const ExperimentConfig& cfg, const GainOutcome& g)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "experiment " << cfg.name << " (" << cfg.profile << ", s0 = " << order::to_string(cfg.s0)
       << ", eps0 = " << order::to_string(cfg.eps0) << ", k = " << cfg.k << ")\n";
    for (const auto& w : g.report.windows)
        os << "  " << std::left << std::setw(12) << probe::to_string(w.label) << " r_hat " << w.fit.r_hat << " +- "
           << w.fit.stderr_ << "  s_hat " << w.fit.s_hat() << "  band [" << std::setprecision(1) << w.fit.k_lo
           << ", " << w.fit.k_hi << "]" << std::setprecision(3) << (w.fit.note.empty() ? "" : "  (" + w.fit.note + ")")
           << "\n";
    os << "  gain reflected " << g.report.gain_reflected << ", transmitted " << g.report.gain_transmitted << "\n";
    if (g.oracle)
        os << "  oracle: |R| decay " << g.oracle->r << ", expected reflected r " << g.expected_reflected << "\n";
    os << "  hyperbolic window (" << g.report.window_lo << ", " << g.report.window_hi << ")"
       << (g.report.window_admissible ? "" : " [gated]") << "\n";
    os << "  theorem verdict " << probe::to_string(g.report.verdict);
    if (g.control) os << " (control profile)";
    os << "\n";
    for (const auto& r : g.report.reasons) os << "    - " << r << "\n";
    os << "  result " << (g.passed ? "PASS" : "FAIL") << "\n";
    return os.str();
}

}  // namespace

std::string summary(const ExperimentConfig& cfg, const GainOutcome& g) { return summary_text(cfg, g); }

RunManifest run_pipeline(const ExperimentConfig& cfg)
{
    RunManifest m;
    m.config_hash = cfg.hash();
    m.code_version = code_version();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_text(dir / "config.canonical", cfg.canonical());

    const std::vector<std::string> names{"calc", "trace", "wave", "probe", "report"};
    bool stop = false;
    trace::GBBPath path;
    std::optional<wave::WaveField> field;
    std::optional<GainOutcome> outcome;
    m.verdict = "error";
    m.exit_code = 1;

    auto emit = [&](StageRecord& rec, const std::string& file, const std::string& text) {
        write_text(dir / file, text);
        rec.outputs.emplace_back(file, wave::sha256_hex(text));
    };

    for (const auto& name : names) {
        StageRecord rec;
        rec.name = name;
        if (stop) {
            rec.status = "skipped";
            m.stages.push_back(rec);
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        try {
            rec.status = "ok";
            if (name == "calc") {
                if (cfg.control()) {
                    rec.status = "skipped";
                    rec.message = "control profile: no conormal order to gate";
                } else {
                    const auto c = calc_gate(cfg.s0, cfg.eps0, cfg.s, cfg.k, 2);
                    emit(rec, "calc.json", calc_json(c));
                    rec.message = c.message;
                    if (!c.admissible) {
                        rec.status = "refused";
                        m.verdict = "refused";
                        m.exit_code = 2;
                        stop = true;
                    }
                }
            } else if (name == "trace") {
                path = trace_stage(cfg);
                emit(rec, "trace.csv", trace_csv(path));
                emit(rec, "trace_events.json", trace_events_json(path));
                rec.message = std::to_string(path.events.size()) + " event(s)";
            } else if (name == "wave") {
                const auto sc = cfg.scenario();
                field = wave::run(sc);
                const auto file = dir / "field.wfld";
                wave::write_field(*field, sc, file.string());
                rec.outputs.emplace_back("field.wfld", wave::sha256_file(file.string()));
                rec.outputs.emplace_back("field.wfld.json", wave::sha256_file(file.string() + ".json"));
                rec.message = std::to_string(field->times.size()) + " snapshots";
            } else if (name == "probe") {
                outcome = analyze(cfg, *field, path);
                emit(rec, "report.json", outcome_json(*outcome));
                emit(rec, "bins.csv", probe::report_csv(outcome->report));
                rec.message = "theorem verdict " + probe::to_string(outcome->report.verdict);
            } else {
                emit(rec, "summary.txt", summary_text(cfg, *outcome));
                const bool inconclusive = outcome->report.verdict == probe::Verdict::Inconclusive && !outcome->passed;
                m.verdict = outcome->passed ? "pass" : (inconclusive ? "inconclusive" : "fail");
                m.exit_code = outcome->passed ? 0 : 1;
                rec.message = m.verdict;
            }
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.message = e.what();
            m.verdict = "error";
            m.exit_code = 1;
            stop = true;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.stages.push_back(rec);
    }
    write_text(dir / "manifest.json", m.json());
    return m;
}

}  // namespace cnl::experiment
