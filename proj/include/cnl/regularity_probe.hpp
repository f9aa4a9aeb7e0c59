#ifndef CNL_REGULARITY_PROBE_HPP
#define CNL_REGULARITY_PROBE_HPP

#include "cnl/bichar_tracer.hpp"
#include "cnl/order_calculus.hpp"
#include "cnl/wave_lab.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cnl::probe {

enum class Label { Incident, Reflected, Transmitted };
std::string to_string(Label l);

struct ProbeWindow {
    double x_lo = 0, x_hi = 0;
    double t_lo = 0, t_hi = 0;
    Label label = Label::Incident;
    double ray_x = 0;  // predicted packet center at ray_t
    double ray_t = 0;
};

/// Plateau taper on [0, 1]: 1 on the middle `plateau` fraction, smooth step
/// (chi1) to exactly 0 at both ends.
double taper(double u, double plateau = 0.5);

struct FitOptions {
    double k_hi = 0;         // 0: a quarter of the grid Nyquist
    double k_lo = 0;         // 0: k_hi / 2^octaves, raised to 8 wavelengths per window
    int octaves = 4;
    int bins_per_octave = 4;
    std::size_t min_bins = 8;
    double min_decades = 3;        // dynamic range below this -> low confidence
    double usable_decades = 1;     // bins closer than this to the floor end the band
    double smooth_curvature = 1.0; // local exponent growth across the band that marks super-polynomial decay
    double plateau = 0.5;
    int padding = 4;
};

struct BinValue {
    double k = 0;     // geometric bin center
    double mean = 0;  // mean |u_hat| over the bin (max over slices)
};

struct DecayFit {
    double r_hat = 0;
    double stderr_ = 0;
    double k_lo = 0, k_hi = 0;  // usable band actually fitted
    std::vector<BinValue> bins; // all requested bins
    std::size_t used_bins = 0;
    double noise_floor = 0;
    double dynamic_range = 0;   // decades between the weakest fitted bin and the floor
    double peak = 0;            // largest bin mean
    bool low_confidence = false;
    bool smooth_at_resolution = false;
    bool rejected = false;
    std::string note;

    double s_hat() const { return r_hat - 0.5; }
    bool confident() const { return !rejected && !low_confidence && !smooth_at_resolution; }
};

/// Fit on already extracted slices (each sampled with spacing dx), weighted by
/// the spatial taper. Aggregation over slices is the max per bin.
DecayFit decay_fit_slices(const std::vector<std::vector<double>>& slices, double dx, const FitOptions& opt = {});

/// Slices of `field` inside the window (snapshots with t in [t_lo, t_hi]).
DecayFit decay_fit(const wave::WaveField& field, const ProbeWindow& w, const FitOptions& opt = {});

struct PlanOptions {
    double t_incident = -1;  // < 0: 0.4 of the contact time
    double t_outgoing = -1;  // < 0: duration - slab
    double slab = 0.1;       // half-length of the time interval
    double envelope_widths = 6;
};

class PlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incident / reflected / transmitted windows from a reflected GBB path of the
/// scenario (first event a reflection at x = 0, t = contact time). The
/// transmitted packet position comes from the travel time through c.
std::vector<ProbeWindow> window_plan(const wave::WaveScenario& sc, const trace::GBBPath& path,
                                     const PlanOptions& opt = {});

/// Normal-incidence ray of the scenario's pulse traced with gbb_trace (k = 1, n = 2).
trace::GBBPath scenario_ray(const ham::ConormalMetric& m, const wave::WaveScenario& sc);

/// Reflection coefficient of (c^2 u')' + omega^2 u = 0 for a wave incident from
/// the left; c is constant outside [a, b]. RK4 from the right with omega h / c <= step.
std::complex<double> helmholtz_reflection(const std::function<double(double)>& c, double omega, double a, double b,
                                          double step = 0.02);

struct OracleFit {
    double r = 0;
    double stderr_ = 0;
    std::vector<BinValue> bins;
};

/// Decay exponent of |R(omega)| over quarter-octave bins in [k_lo, k_hi]
/// (k = omega / c(a)), averaging `per_bin` frequencies per bin.
OracleFit helmholtz_decay(const std::function<double(double)>& c, double a, double b, double k_lo, double k_hi,
                          int bins_per_octave = 4, int per_bin = 8, double step = 0.02);

enum class Verdict { Pass, Fail, Inconclusive };
std::string to_string(Verdict v);

struct GainOptions {
    double tol_transmitted = 0.25;
    double gain_floor = 0.5;
    double margin = 0.25;
    std::optional<double> oracle_reflected;  // expected reflected decay exponent
    double oracle_tol = 0.25;
    double absence_ratio = 1e-6;  // reflected peak below this fraction of the incident: no packet
};

struct WindowResult {
    Label label = Label::Incident;
    ProbeWindow window;
    DecayFit fit;
};

struct RegularityReport {
    std::vector<WindowResult> windows;
    double gain_reflected = 0;    // s_hat(reflected) - s_hat(incident)
    double gain_transmitted = 0;  // s_hat(transmitted) - s_hat(incident)
    bool reflected_absent = false;
    double window_lo = 0, window_hi = 0;  // hyperbolic window for (s0, eps0, k)
    bool window_admissible = false;
    double reflected_target = 0;          // min(s_inc + gain_floor, s0 - 1 - k/2 - margin)
    std::optional<double> oracle_reflected;
    bool oracle_matched = false;
    Verdict verdict = Verdict::Inconclusive;
    std::vector<std::string> reasons;

    const WindowResult& at(Label l) const;
};

/// From fits in the order incident, reflected, transmitted.
RegularityReport gain_report(const std::vector<WindowResult>& fits, const order::Rational& s0,
                             const order::Rational& eps0, int k, const GainOptions& opt = {});
RegularityReport gain_report(const wave::WaveField& field, const std::vector<ProbeWindow>& windows,
                             const order::Rational& s0, const order::Rational& eps0, int k,
                             const GainOptions& opt = {}, const FitOptions& fit = {});

/// JSON text of a report, and a CSV (label, k, mean, fit) of the per-window bins.
std::string report_json(const RegularityReport& r);
std::string report_csv(const RegularityReport& r);

}  // namespace cnl::probe

#endif
