#ifndef CNL_WAVE_LAB_HPP
#define CNL_WAVE_LAB_HPP

#include "cnl/hamiltonian_field.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnl::wave {

/// Sound speed profile on the line. `label` and `params` identify it in hashes.
struct SpeedProfile {
    std::string label;
    std::vector<double> params;
    std::function<double(double)> c;

    /// c(x) = speed of a k = 1, n = 2 conormal metric at spatial point x.
    static SpeedProfile conormal(const ham::ConormalMetric& m);
    static SpeedProfile constant(double c0);
    /// c1 for x < 0, c2 for x >= 0 (the jump sits on a grid node when 0 is one).
    static SpeedProfile jump(double c1, double c2);
};

/// Right-going pulse: Gaussian envelope of width `width` around `center`
/// times a random-phase signal with |ghat| = <xi>^{-(s_in + 0.55)} up to a
/// spectral taper at a quarter of the grid Nyquist. `analytic` replaces the
/// random-phase part by 1 (plain Gaussian).
struct PulseSpec {
    double s_in = -0.5;
    double width = 0.1;
    double center = -3.0;
    bool analytic = false;
    std::uint64_t seed = 20240611;
};

/// Point source f(t) delta(x - x_s) with a Ricker wavelet of peak frequency f0, delayed by t0.
struct PointSource {
    double x = 0;
    double f0 = 5;
    double t0 = 0.3;
    double operator()(double t) const;
};

struct Grid {
    double x_lo = -9, x_hi = 9;
    std::size_t cells = 1 << 14;
    double duration = 7;
    double cfl = 0.9;      // max(c) dt / dx
    double dt_fixed = 0;   // when > 0 used instead of the cfl-derived step (still checked)
    double dx() const { return (x_hi - x_lo) / static_cast<double>(cells); }
    double x(std::size_t i) const { return x_lo + static_cast<double>(i) * dx(); }
};

struct Sponge {
    double width = 1.0;
    double strength = 20.0;  // peak damping rate sigma, quadratic ramp
};

struct WaveScenario {
    SpeedProfile speed;
    Grid grid;
    std::optional<PulseSpec> pulse;
    std::vector<PointSource> sources;
    Sponge sponge;
    std::size_t snapshot_stride = 100;
    std::vector<std::size_t> receivers;  // node indices recorded every step

    /// Throws std::invalid_argument listing the first violated invariant.
    void validate() const;
    double dt() const;
    double max_speed() const;
    std::size_t steps() const;
    /// Canonical JSON text (sorted keys, round-trip numbers) and its SHA-256.
    std::string canonical() const;
    std::string hash() const;
};

class CflViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalBlowup : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WaveField {
    std::string scenario_hash;
    double x_lo = 0, dx = 0, dt = 0;
    std::size_t nx = 0;              // nodes = cells + 1
    std::vector<double> times;       // snapshot times
    std::vector<std::vector<double>> u;   // u[snapshot][node]
    std::vector<std::vector<double>> ut;  // centered time derivative at the snapshots
    std::vector<double> c;                // speed at nodes
    std::vector<double> absorbed;         // energy removed by the sponge up to each snapshot
    std::vector<std::vector<double>> traces;  // per receiver, every step
    std::vector<double> trace_times;

    double x(std::size_t i) const { return x_lo + static_cast<double>(i) * dx; }
    std::size_t nearest_snapshot(double t) const;
};

/// Leapfrog on u_tt + sigma u_t = (c^2 u_x)_x with c^2 at half-cells.
WaveField run(const WaveScenario& sc);

/// sum_x (u_t^2 + c^2 u_x^2) dx / 2, centered differences, fixed summation order.
double discrete_energy(const WaveField& f, std::size_t snapshot);

/// Initial data (u at t = 0 and t = -dt) for the pulse on the scenario grid.
struct InitialData {
    std::vector<double> u0, u_prev;
};
/// c_local is the (constant) speed around the pulse; u_prev uses the discrete
/// dispersion relation so the pulse is right-going for the scheme itself.
InitialData make_pulse(const PulseSpec& p, const Grid& g, double dt, double c_local = 1.0);

/// Designed Fourier decay exponent of a pulse.
inline double pulse_decay_exponent(double s_in) { return s_in + 0.5 + 0.05; }

/// Dump format: "WFLD", uint32 version, uint64 nx, uint64 nsnap, doubles
/// x_lo, dx, dt, then nsnap times, then nsnap*nx values of u (row-major).
/// A JSON sidecar `<path>.json` carries the scenario and grid.
void write_field(const WaveField& f, const WaveScenario& sc, const std::string& path);
WaveField read_field(const std::string& path);
void write_field_csv(const WaveField& f, const std::string& path, std::size_t x_stride = 1);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace cnl::wave

#endif
