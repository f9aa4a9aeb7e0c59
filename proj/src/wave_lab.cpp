#include "cnl/wave_lab.hpp"

#include "cnl/escape_function.hpp"

#include <fftw3.h>
#include "json.hpp"
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace cnl::wave {

using nlohmann::json;

SpeedProfile SpeedProfile::conormal(const ham::ConormalMetric& m)
{
    if (m.k() != 1 || m.n() != 2) throw std::invalid_argument("SpeedProfile::conormal: needs k = 1, n = 2");
    return {"conormal", {m.s0(), m.params().amplitude, m.params().radius, m.params().c_smooth}, [m](double x) {
                return m.speed({x});
            }};
}

SpeedProfile SpeedProfile::constant(double c0)
{
    if (!(c0 > 0)) throw std::invalid_argument("SpeedProfile::constant: speed must be positive");
    return {"constant", {c0}, [c0](double) { return c0; }};
}

SpeedProfile SpeedProfile::jump(double c1, double c2)
{
    if (!(c1 > 0 && c2 > 0)) throw std::invalid_argument("SpeedProfile::jump: speeds must be positive");
    return {"jump", {c1, c2}, [c1, c2](double x) { return x < 0 ? c1 : c2; }};
}

double PointSource::operator()(double t) const
{
    const double a = M_PI * f0 * (t - t0);
    return (1 - 2 * a * a) * std::exp(-a * a);
}

double WaveScenario::max_speed() const
{
    if (!speed.c) throw std::invalid_argument("scenario: no speed profile");
    const double h = grid.dx();
    double m = 0;
    for (std::size_t i = 0; i <= grid.cells; ++i) {
        m = std::max(m, speed.c(grid.x(i)));
        if (i < grid.cells) m = std::max(m, speed.c(grid.x(i) + 0.5 * h));
    }
    return m;
}

double WaveScenario::dt() const
{
    if (grid.dt_fixed > 0) return grid.dt_fixed;
    return grid.cfl * grid.dx() / max_speed();
}

std::size_t WaveScenario::steps() const { return static_cast<std::size_t>(std::ceil(grid.duration / dt() - 1e-9)); }

void WaveScenario::validate() const
{
    if (!speed.c) throw std::invalid_argument("scenario: no speed profile");
    if (!(grid.x_hi > grid.x_lo) || grid.cells < 64) throw std::invalid_argument("scenario: degenerate grid");
    if (!(grid.duration > 0)) throw std::invalid_argument("scenario: duration must be positive");
    const double courant = max_speed() * dt() / grid.dx();
    if (!(courant <= 0.9 + 1e-12))
        throw CflViolation("scenario: CFL violated, max(c) dt/dx = " + std::to_string(courant) + " > 0.9");
    if (sponge.width / grid.dx() < 20) throw std::invalid_argument("scenario: sponge narrower than 20 cells");
    if (!(sponge.strength > 0)) throw std::invalid_argument("scenario: sponge strength must be positive");
    if (snapshot_stride == 0) throw std::invalid_argument("scenario: snapshot stride must be positive");
    for (auto r : receivers)
        if (r > grid.cells) throw std::invalid_argument("scenario: receiver outside the grid");
    const double in_lo = grid.x_lo + sponge.width, in_hi = grid.x_hi - sponge.width;
    if (pulse) {
        if (pulse->s_in < -1 || pulse->s_in > 4) throw std::invalid_argument("scenario: s_in outside [-1, 4]");
        if (!(pulse->width > 0)) throw std::invalid_argument("scenario: pulse width must be positive");
        if (std::abs(pulse->center) < 10 * pulse->width)
            throw std::invalid_argument("scenario: pulse closer to the interface than 10 widths");
        if (pulse->center - 8 * pulse->width < in_lo || pulse->center + 8 * pulse->width > in_hi)
            throw std::invalid_argument("scenario: pulse overlaps the sponge");
    }
    for (const auto& s : sources)
        if (s.x < in_lo || s.x > in_hi) throw std::invalid_argument("scenario: point source inside the sponge");
}

std::string WaveScenario::canonical() const
{
    json j;
    j["speed"] = {{"label", speed.label}, {"params", speed.params}};
    j["grid"] = {{"x_lo", grid.x_lo},         {"x_hi", grid.x_hi}, {"cells", grid.cells},
                 {"duration", grid.duration}, {"cfl", grid.cfl},   {"dt_fixed", grid.dt_fixed}};
    if (pulse)
        j["pulse"] = {{"s_in", pulse->s_in},
                      {"width", pulse->width},
                      {"center", pulse->center},
                      {"analytic", pulse->analytic},
                      {"seed", pulse->seed}};
    json src = json::array();
    for (const auto& s : sources) src.push_back({{"x", s.x}, {"f0", s.f0}, {"t0", s.t0}});
    j["sources"] = src;
    j["sponge"] = {{"width", sponge.width}, {"strength", sponge.strength}};
    j["snapshot_stride"] = snapshot_stride;
    j["receivers"] = receivers;
    return j.dump();
}

std::string WaveScenario::hash() const { return sha256_hex(canonical()); }

std::size_t WaveField::nearest_snapshot(double t) const
{
    if (times.empty()) throw std::logic_error("WaveField: no snapshots");
    std::size_t best = 0;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (std::abs(times[i] - t) < std::abs(times[best] - t)) best = i;
    return best;
}

InitialData make_pulse(const PulseSpec& p, const Grid& g, double dt, double c_local)
{
    const std::size_t n = g.cells;  // periodic synthesis length; node `cells` stays zero
    const double dx = g.dx();
    const double L = g.x_hi - g.x_lo;
    const double k_nyq = M_PI / dx;
    const double k_t = k_nyq / 4;
    const std::size_t nc = n / 2 + 1;

    std::vector<double> f(n);
    double* re = fftw_alloc_real(n);
    fftw_complex* sp = fftw_alloc_complex(nc);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), re, sp, FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), sp, re, FFTW_ESTIMATE);

    if (p.analytic) {
        std::fill(f.begin(), f.end(), 1.0);
    } else {
        // Random phase theta(k) = sum_m a kappa_m sin(k / kappa_m + phi_m) with
        // |theta'(k)| <= width / 2: the group delay keeps the signal inside the
        // envelope, so the envelope does not scramble |ghat| between bins.
        std::mt19937_64 rng(p.seed);
        std::uniform_real_distribution<double> phase(0.0, 2 * M_PI), logscale(std::log(3.0), std::log(30.0));
        constexpr int modes = 8;
        double kappa[modes], phi[modes];
        for (int m = 0; m < modes; ++m) {
            kappa[m] = std::exp(logscale(rng));
            phi[m] = phase(rng);
        }
        const double amp = 0.5 * p.width / modes;
        const double r = pulse_decay_exponent(p.s_in);
        for (std::size_t j = 0; j < nc; ++j) {
            const double k = 2 * M_PI * static_cast<double>(j) / L;
            const double taper = 1 - escape::CutoffPair::chi1((k - k_t) / k_t);
            const double mag = j == 0 ? 0.0 : std::pow(1 + k * k, -r / 2) * taper;
            double th = -k * (p.center - g.x_lo);  // centered on the envelope
            for (int m = 0; m < modes; ++m) th += amp * kappa[m] * std::sin(k / kappa[m] + phi[m]);
            sp[j][0] = mag * std::cos(th);
            sp[j][1] = mag * std::sin(th);
        }
        sp[nc - 1][1] = 0;  // Nyquist bin is real for even n
        fftw_execute(inv);
        std::copy(re, re + n, f.begin());
    }
    double peak = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (g.x(i) - p.center) / p.width;
        f[i] *= z * z > 80 ? 0.0 : std::exp(-0.5 * z * z);
        peak = std::max(peak, std::abs(f[i]));
    }
    if (!(peak > 0)) throw std::logic_error("make_pulse: empty pulse");
    for (double& v : f) v /= peak;

    // right-going for the scheme: u(x, t) = sum F(k) e^{i(kx - Omega(k) t)},
    // sin(Omega dt / 2) / dt = c sin(k dx / 2) / dx
    std::copy(f.begin(), f.end(), re);
    fftw_execute(fwd);
    const double nu = c_local * dt / dx;
    for (std::size_t j = 0; j < nc; ++j) {
        const double k = 2 * M_PI * static_cast<double>(j) / L;
        const double om = 2 / dt * std::asin(std::min(1.0, nu * std::sin(k * dx / 2)));
        const std::complex<double> z(sp[j][0], sp[j][1]);
        const auto w = z * std::polar(1.0, om * dt) / static_cast<double>(n);
        sp[j][0] = w.real();
        sp[j][1] = w.imag();
    }
    sp[nc - 1][1] = 0;
    fftw_execute(inv);

    InitialData d;
    d.u0.assign(n + 1, 0.0);
    d.u_prev.assign(n + 1, 0.0);
    std::copy(f.begin(), f.end(), d.u0.begin());
    std::copy(re, re + n, d.u_prev.begin());
    d.u0[0] = d.u_prev[0] = 0;

    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(re);
    fftw_free(sp);
    return d;
}

WaveField run(const WaveScenario& sc)
{
    sc.validate();
    const std::size_t N = sc.grid.cells;
    const double dx = sc.grid.dx(), dt = sc.dt();
    const std::size_t steps = sc.steps();

    std::vector<double> c2h(N), sigma(N + 1, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double c = sc.speed.c(sc.grid.x(i) + 0.5 * dx);
        c2h[i] = c * c;
    }
    const double in_lo = sc.grid.x_lo + sc.sponge.width, in_hi = sc.grid.x_hi - sc.sponge.width;
    for (std::size_t i = 0; i <= N; ++i) {
        const double x = sc.grid.x(i);
        const double d = std::max(in_lo - x, x - in_hi);
        if (d > 0) sigma[i] = sc.sponge.strength * (d / sc.sponge.width) * (d / sc.sponge.width);
    }

    WaveField f;
    f.scenario_hash = sc.hash();
    f.x_lo = sc.grid.x_lo;
    f.dx = dx;
    f.dt = dt;
    f.nx = N + 1;
    f.c.resize(N + 1);
    for (std::size_t i = 0; i <= N; ++i) f.c[i] = sc.speed.c(sc.grid.x(i));
    f.traces.assign(sc.receivers.size(), {});

    std::vector<double> prev(N + 1, 0.0), cur(N + 1, 0.0), next(N + 1, 0.0);
    if (sc.pulse) {
        const auto d = make_pulse(*sc.pulse, sc.grid, dt, sc.speed.c(sc.pulse->center));
        cur = d.u0;
        prev = d.u_prev;
    }
    std::vector<std::size_t> src_node;
    for (const auto& s : sc.sources) src_node.push_back(static_cast<std::size_t>(std::lround((s.x - sc.grid.x_lo) / dx)));

    double absorbed = 0;
    bool pending = false;  // a snapshot of `cur` waits for its time derivative
    const double r = dt * dt / (dx * dx);
    for (std::size_t n = 0; n <= steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        if (n % sc.snapshot_stride == 0 || n == steps) {
            f.times.push_back(t);
            f.u.push_back(cur);
            pending = true;
        }
        for (std::size_t k = 0; k < sc.receivers.size(); ++k) f.traces[k].push_back(cur[sc.receivers[k]]);
        f.trace_times.push_back(t);

        for (std::size_t i = 1; i < N; ++i) {
            const double lap = c2h[i] * (cur[i + 1] - cur[i]) - c2h[i - 1] * (cur[i] - cur[i - 1]);
            const double s = 0.5 * sigma[i] * dt;
            next[i] = (2 * cur[i] - (1 - s) * prev[i] + r * lap) / (1 + s);
        }
        for (std::size_t k = 0; k < src_node.size(); ++k)
            next[src_node[k]] += dt * dt * sc.sources[k](t) / dx / (1 + 0.5 * sigma[src_node[k]] * dt);
        next[0] = next[N] = 0;

        double loss = 0;
        for (std::size_t i = 1; i < N; ++i) {
            if (sigma[i] == 0) continue;
            const double v = (next[i] - prev[i]) / (2 * dt);
            loss += sigma[i] * v * v;
        }
        absorbed += loss * dx * dt;

        if (pending) {
            std::vector<double> ut(N + 1);
            for (std::size_t i = 0; i <= N; ++i) ut[i] = (next[i] - prev[i]) / (2 * dt);
            f.ut.push_back(std::move(ut));
            f.absorbed.push_back(absorbed);
            pending = false;
        }
        if (n % 64 == 0) {
            for (std::size_t i = 0; i <= N; ++i)
                if (!std::isfinite(next[i])) {
                    std::ostringstream os;
                    os << "wave run: non-finite value at step " << n << " (t = " << t << "), node " << i
                       << " (x = " << sc.grid.x(i) << "), c = " << f.c[i];
                    throw NumericalBlowup(os.str());
                }
        }
        std::swap(prev, cur);
        std::swap(cur, next);
    }
    return f;
}

double discrete_energy(const WaveField& f, std::size_t s)
{
    if (s >= f.u.size()) throw std::out_of_range("discrete_energy: snapshot index");
    const auto& u = f.u[s];
    const auto& ut = f.ut[s];
    double e = 0;
    for (std::size_t i = 1; i + 1 < f.nx; ++i) {
        const double ux = (u[i + 1] - u[i - 1]) / (2 * f.dx);
        e += ut[i] * ut[i] + f.c[i] * f.c[i] * ux * ux;
    }
    return 0.5 * e * f.dx;
}

namespace {

template <class T>
void put(std::ofstream& os, const T& v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("read_field: truncated file");
    return v;
}

}  // namespace

void write_field(const WaveField& f, const WaveScenario& sc, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_field: cannot open " + path);
    os.write("WFLD", 4);
    put<std::uint32_t>(os, 1);
    put<std::uint64_t>(os, f.nx);
    put<std::uint64_t>(os, f.u.size());
    put(os, f.x_lo);
    put(os, f.dx);
    put(os, f.dt);
    for (double t : f.times) put(os, t);
    for (const auto& row : f.u) os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_field: write failed for " + path);

    json side;
    side["format"] = "WFLD";
    side["version"] = 1;
    side["scenario_hash"] = f.scenario_hash;
    side["scenario"] = json::parse(sc.canonical());
    side["grid"] = {{"x_lo", f.x_lo}, {"dx", f.dx}, {"dt", f.dt}, {"nx", f.nx}, {"snapshots", f.u.size()}};
    std::ofstream js(path + ".json");
    js << side.dump(2) << "\n";
}

WaveField read_field(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_field: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "WFLD", 4) != 0) throw std::runtime_error("read_field: not a WFLD file: " + path);
    if (get<std::uint32_t>(is) != 1) throw std::runtime_error("read_field: unsupported version");
    WaveField f;
    f.nx = get<std::uint64_t>(is);
    const auto ns = get<std::uint64_t>(is);
    f.x_lo = get<double>(is);
    f.dx = get<double>(is);
    f.dt = get<double>(is);
    for (std::uint64_t i = 0; i < ns; ++i) f.times.push_back(get<double>(is));
    f.u.assign(ns, std::vector<double>(f.nx));
    for (auto& row : f.u) {
        is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!is) throw std::runtime_error("read_field: truncated file");
    }
    std::ifstream js(path + ".json");
    if (js) {
        const auto side = json::parse(js, nullptr, false);
        if (!side.is_discarded() && side.contains("scenario_hash")) f.scenario_hash = side["scenario_hash"];
    }
    return f;
}

void write_field_csv(const WaveField& f, const std::string& path, std::size_t x_stride)
{
    if (x_stride == 0) throw std::invalid_argument("write_field_csv: stride must be positive");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_field_csv: cannot open " + path);
    os << std::setprecision(17) << "t,x,u\n";
    for (std::size_t s = 0; s < f.u.size(); ++s)
        for (std::size_t i = 0; i < f.nx; i += x_stride) os << f.times[s] << ',' << f.x(i) << ',' << f.u[s][i] << '\n';
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string sha256_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("sha256_file: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return sha256_hex(ss.str());
}

}  // namespace cnl::wave
