#include "cnl/regularity_probe.hpp"

#include "cnl/escape_function.hpp"

#include <fftw3.h>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace cnl::probe {

using nlohmann::json;

std::string to_string(Label l)
{
    switch (l) {
    case Label::Incident: return "incident";
    case Label::Reflected: return "reflected";
    case Label::Transmitted: return "transmitted";
    }
    return "?";
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

double taper(double u, double plateau)
{
    if (u <= 0 || u >= 1) return 0.0;
    const double ramp = 0.5 * (1 - plateau);
    const double d = std::min(u, 1 - u);
    return escape::CutoffPair::chi1(d / ramp);
}

namespace {

struct LineFit {
    double slope = 0, intercept = 0, stderr_ = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) ssr += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    f.stderr_ = x.size() > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    return f;
}

// y = a + b x + c x^2 by normal equations (x centered); returns c.
double quadratic_coefficient(const std::vector<double>& x, const std::vector<double>& y)
{
    double mx = 0;
    for (double v : x) mx += v;
    mx /= static_cast<double>(x.size());
    double s[5] = {0, 0, 0, 0, 0}, t[3] = {0, 0, 0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = x[i] - mx;
        double p = 1;
        for (int j = 0; j < 5; ++j) {
            s[j] += p;
            if (j < 3) t[j] += p * y[i];
            p *= z;
        }
    }
    // Cramer on [[s0 s1 s2][s1 s2 s3][s2 s3 s4]] (a b c) = t
    auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h, double i) {
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    };
    const double D = det3(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
    const double Dc = det3(s[0], s[1], t[0], s[1], s[2], t[1], s[2], s[3], t[2]);
    return D == 0 ? 0.0 : Dc / D;
}

std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

DecayFit decay_fit_slices(const std::vector<std::vector<double>>& slices, double dx, const FitOptions& opt)
{
    if (slices.empty()) throw std::invalid_argument("decay_fit: no slices in the window");
    const std::size_t M = slices.front().size();
    if (M < 16) throw std::invalid_argument("decay_fit: window narrower than 16 samples");
    for (const auto& s : slices)
        if (s.size() != M) throw std::invalid_argument("decay_fit: slices of unequal length");
    if (opt.bins_per_octave < 1 || opt.octaves < 1) throw std::invalid_argument("decay_fit: bad bin layout");

    const double k_nyq = M_PI / dx;
    const double k_hi = opt.k_hi > 0 ? opt.k_hi : k_nyq / 4;
    if (k_hi > k_nyq / 4 * (1 + 1e-12))
        throw std::invalid_argument("decay_fit: top band above a quarter of the grid Nyquist");
    const double length = dx * static_cast<double>(M - 1);
    double k_lo = opt.k_lo > 0 ? opt.k_lo : k_hi / std::ldexp(1.0, opt.octaves);
    if (opt.k_lo <= 0) k_lo = std::max(k_lo, 8 * 2 * M_PI / length);
    if (!(k_lo < k_hi)) throw std::invalid_argument("decay_fit: empty band (window too short for the requested band)");

    const int nb = std::max(1, static_cast<int>(std::lround(std::log2(k_hi / k_lo) * opt.bins_per_octave)));
    std::vector<double> edges(nb + 1);
    for (int b = 0; b <= nb; ++b) edges[b] = k_lo * std::pow(k_hi / k_lo, static_cast<double>(b) / nb);

    const std::size_t P = next_pow2(M) * static_cast<std::size_t>(std::max(1, opt.padding));
    const std::size_t nc = P / 2 + 1;
    double* in = fftw_alloc_real(P);
    fftw_complex* out = fftw_alloc_complex(nc);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(P), in, out, FFTW_ESTIMATE);
    const double dk = 2 * M_PI / (static_cast<double>(P) * dx);

    std::vector<double> tw(M);
    for (std::size_t i = 0; i < M; ++i) tw[i] = taper(static_cast<double>(i) / static_cast<double>(M - 1), opt.plateau);

    DecayFit fit;
    std::vector<double> best(nb, 0.0);
    double floor = 0;
    for (const auto& s : slices) {
        std::fill(in, in + P, 0.0);
        for (std::size_t i = 0; i < M; ++i) in[i] = s[i] * tw[i];
        fftw_execute(plan);
        std::vector<double> sum(nb, 0.0);
        std::vector<int> cnt(nb, 0);
        double fsum = 0;
        int fcnt = 0;
        for (std::size_t j = 1; j < nc; ++j) {
            const double k = dk * static_cast<double>(j);
            const double mag = std::hypot(out[j][0], out[j][1]) * dx;
            if (k >= k_nyq / 2) {
                fsum += mag;
                ++fcnt;
            }
            if (k < edges[0] || k >= edges[nb]) continue;
            const auto b = std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), k) - edges.begin() - 1),
                                                 static_cast<std::size_t>(nb - 1));
            sum[b] += mag;
            ++cnt[b];
        }
        for (int b = 0; b < nb; ++b)
            if (cnt[b] > 0) best[b] = std::max(best[b], sum[b] / cnt[b]);
        if (fcnt > 0) floor = std::max(floor, fsum / fcnt);
    }
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);

    for (int b = 0; b < nb; ++b) {
        fit.bins.push_back({std::sqrt(edges[b] * edges[b + 1]), best[b]});
        fit.peak = std::max(fit.peak, best[b]);
    }
    fit.noise_floor = std::max(floor, 1e-300);

    std::vector<double> X, Y;
    const double usable = fit.noise_floor * std::pow(10.0, opt.usable_decades);
    bool truncated = false;
    for (const auto& bv : fit.bins) {
        if (!(bv.mean > usable)) {
            truncated = true;
            break;
        }
        X.push_back(std::log(bv.k));
        Y.push_back(std::log(bv.mean));
    }
    fit.used_bins = X.size();
    if (X.size() < 3) {
        fit.rejected = true;
        fit.note = "no usable band above the noise floor";
        if (truncated && fit.peak > usable * 100) fit.smooth_at_resolution = true;
        return fit;
    }
    const auto lf = fit_line(X, Y);
    fit.r_hat = -lf.slope;
    fit.stderr_ = lf.stderr_;
    fit.k_lo = fit.bins.front().k;
    fit.k_hi = fit.bins[X.size() - 1].k;
    fit.dynamic_range = std::log10(std::exp(*std::min_element(Y.begin(), Y.end())) / fit.noise_floor);
    if (fit.dynamic_range < opt.min_decades) {
        fit.low_confidence = true;
        fit.note = "dynamic range below " + std::to_string(opt.min_decades) + " decades";
    }
    if (X.size() >= 5) {
        const double c = quadratic_coefficient(X, Y);
        const double growth = -2 * c * (X.back() - X.front());
        if (growth > opt.smooth_curvature || (truncated && growth > 0.5 * opt.smooth_curvature)) {
            fit.smooth_at_resolution = true;
            fit.note = "decay faster than any fitted power: smooth at this resolution";
        }
    }
    if (fit.used_bins < opt.min_bins) {
        fit.rejected = true;
        fit.note = "usable band has " + std::to_string(fit.used_bins) + " < " + std::to_string(opt.min_bins) +
                   " bins" + (fit.smooth_at_resolution ? " (smooth at this resolution)" : "");
    }
    return fit;
}

DecayFit decay_fit(const wave::WaveField& field, const ProbeWindow& w, const FitOptions& opt)
{
    if (!(w.x_hi > w.x_lo) || !(w.t_hi >= w.t_lo)) throw std::invalid_argument("decay_fit: invalid window");
    const auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil((w.x_lo - field.x_lo) / field.dx)));
    const auto i1 = std::min(field.nx - 1, static_cast<std::size_t>(std::floor((w.x_hi - field.x_lo) / field.dx)));
    if (i1 <= i0) throw std::invalid_argument("decay_fit: window outside the grid");
    std::vector<std::vector<double>> slices;
    for (std::size_t s = 0; s < field.times.size(); ++s) {
        const double t = field.times[s];
        if (t < w.t_lo - 1e-12 || t > w.t_hi + 1e-12) continue;
        slices.emplace_back(field.u[s].begin() + static_cast<long>(i0), field.u[s].begin() + static_cast<long>(i1) + 1);
    }
    if (slices.empty()) {
        // no snapshot inside the slab: nearest one
        const auto s = field.nearest_snapshot(0.5 * (w.t_lo + w.t_hi));
        slices.emplace_back(field.u[s].begin() + static_cast<long>(i0), field.u[s].begin() + static_cast<long>(i1) + 1);
    }
    return decay_fit_slices(slices, field.dx, opt);
}

namespace {

// x(t) along the samples of a leg, interpolated in coordinate time x[0].
double leg_position(const std::vector<trace::PhaseSample>& leg, double t)
{
    if (leg.empty()) throw PlanError("window_plan: empty leg");
    auto lt = [](const trace::PhaseSample& s) { return s.q.x[0]; };
    if (t <= lt(leg.front())) return leg.front().q.x[1];
    if (t >= lt(leg.back())) return leg.back().q.x[1];
    for (std::size_t i = 1; i < leg.size(); ++i)
        if (lt(leg[i]) >= t) {
            const double u = (t - lt(leg[i - 1])) / (lt(leg[i]) - lt(leg[i - 1]));
            return leg[i - 1].q.x[1] + u * (leg[i].q.x[1] - leg[i - 1].q.x[1]);
        }
    return leg.back().q.x[1];
}

// dx/dt = c(x) from x = 0 for time t
double transmitted_position(const std::function<double(double)>& c, double t)
{
    const int n = std::max(1, static_cast<int>(std::ceil(t / 1e-3)));
    const double h = t / n;
    double x = 0;
    for (int i = 0; i < n; ++i) {
        const double k1 = c(x), k2 = c(x + 0.5 * h * k1), k3 = c(x + 0.5 * h * k2), k4 = c(x + h * k3);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

// group-velocity deficit of the leapfrog scheme at k dx = pi/4
double lag_rate(double c, double dt, double dx)
{
    const double nu = c * dt / dx;
    const double th = M_PI / 8;
    const double vg = std::cos(th) / std::sqrt(1 - nu * nu * std::sin(th) * std::sin(th));
    return c * (1 - vg);
}

}  // namespace

std::vector<ProbeWindow> window_plan(const wave::WaveScenario& sc, const trace::GBBPath& path, const PlanOptions& opt)
{
    if (!sc.pulse) throw PlanError("window_plan: scenario has no pulse");
    const auto ev = std::find_if(path.events.begin(), path.events.end(),
                                 [](const trace::GBBEvent& e) { return e.type == trace::EventType::Reflection; });
    if (ev == path.events.end() || path.legs.size() < 2)
        throw PlanError("window_plan: trace contains no reflection event");
    const double tc = ev->point.x[0];
    const double dx = sc.grid.dx(), dt = sc.dt();
    const double T = sc.grid.duration;
    const double w = sc.pulse->width;
    const double ti = opt.t_incident >= 0 ? opt.t_incident : 0.4 * tc;
    const double to = opt.t_outgoing >= 0 ? opt.t_outgoing : T - opt.slab;
    if (!(ti + opt.slab < tc)) throw PlanError("window_plan: incident time not before contact");
    if (!(to - opt.slab > tc) || to + opt.slab > T + 1e-12)
        throw PlanError("window_plan: outgoing time must lie between contact and the end of the run");

    auto make = [&](Label l, double center, double t, double c_local) {
        const double half_plateau = opt.envelope_widths * w + lag_rate(c_local, dt, dx) * t + c_local * opt.slab;
        const double half = half_plateau / 0.5;
        ProbeWindow pw;
        pw.label = l;
        pw.x_lo = center - half;
        pw.x_hi = center + half;
        pw.t_lo = t - opt.slab;
        pw.t_hi = t + opt.slab;
        pw.ray_x = center;
        pw.ray_t = t;
        return pw;
    };
    const double xi = leg_position(path.legs[0], ti);
    const double xr = leg_position(path.legs[1], to);
    const double xt = transmitted_position(sc.speed.c, to - tc);
    std::vector<ProbeWindow> out{make(Label::Incident, xi, ti, sc.speed.c(xi)),
                                 make(Label::Reflected, xr, to, sc.speed.c(xr)),
                                 make(Label::Transmitted, xt, to, sc.speed.c(xt))};

    const double in_lo = sc.grid.x_lo + sc.sponge.width, in_hi = sc.grid.x_hi - sc.sponge.width;
    const double clear = 10 * dx;
    for (const auto& pw : out) {
        const std::string name = to_string(pw.label);
        if (pw.x_lo < in_lo || pw.x_hi > in_hi)
            throw PlanError("window_plan: " + name + " window reaches the sponge; use a longer domain");
        if (pw.x_lo < clear && pw.x_hi > -clear)
            throw PlanError("window_plan: " + name + " window is not clear of the interface by 10 cells "
                            "(source too close to Y or measurement time too close to contact)");
    }
    for (std::size_t a = 0; a < out.size(); ++a)
        for (std::size_t b = a + 1; b < out.size(); ++b) {
            const bool time_overlap = out[a].t_lo <= out[b].t_hi && out[b].t_lo <= out[a].t_hi;
            if (!time_overlap) continue;
            const double gap = std::max(out[a].x_lo, out[b].x_lo) - std::min(out[a].x_hi, out[b].x_hi);
            if (gap < 5 * w)
                throw PlanError("window_plan: " + to_string(out[a].label) + " and " + to_string(out[b].label) +
                                " packets overlap at the requested time; use a longer domain or a later time");
        }
    return out;
}

trace::GBBPath scenario_ray(const ham::ConormalMetric& m, const wave::WaveScenario& sc)
{
    if (!sc.pulse) throw std::invalid_argument("scenario_ray: scenario has no pulse");
    const double x0 = sc.pulse->center;
    const double c = m.speed({x0});
    const double dir = x0 < 0 ? 1.0 : -1.0;  // towards Y
    const ham::PhasePoint q0{{0.0, x0}, {1.0, -dir / c}};
    trace::TraceOptions topt;
    topt.h = std::min(1e-3, sc.grid.dx());
    topt.max_events = 1;
    // Hamilton time s with dt/ds = 2 tau = 2
    auto paths = trace::gbb_trace(m, q0, 0.5 * sc.grid.duration, trace::BranchPolicy::Reflect, topt);
    return paths.front();
}

std::complex<double> helmholtz_reflection(const std::function<double(double)>& c, double omega, double a, double b,
                                          double step)
{
    if (!(b > a) || !(omega > 0) || !(step > 0)) throw std::invalid_argument("helmholtz_reflection: bad arguments");
    using cd = std::complex<double>;
    double cmin = std::min(c(a), c(b));
    for (int i = 0; i <= 256; ++i) cmin = std::min(cmin, c(a + (b - a) * i / 256.0));
    const double h = step * cmin / omega;

    std::vector<double> nodes;
    const auto n = static_cast<long long>(std::ceil((b - a) / h));
    for (long long j = 0; j <= n; ++j) nodes.push_back(b - (b - a) * static_cast<double>(j) / static_cast<double>(n));
    if (a < 0 && b > 0) {
        nodes.push_back(0.0);
        std::sort(nodes.begin(), nodes.end(), std::greater<>());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    }

    const double cb = c(b + 1e-9), ca = c(a - 1e-9);
    cd u = std::exp(cd(0, omega * b / cb));
    cd v = cd(0, omega * cb) * u;  // c^2 u'
    auto c2 = [&](double x) {
        const double s = c(x);
        return s * s;
    };
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double s0 = nodes[i - 1], s1 = nodes[i], ds = s1 - s0;
        // coefficients sampled strictly inside the step, so a jump at a node is seen from the correct side
        const double eps = 1e-9 * std::abs(ds);
        const double ce0 = c2(s0 - eps), cm = c2(0.5 * (s0 + s1)), ce1 = c2(s1 + eps);
        const cd k1u = v / ce0, k1v = -omega * omega * u;
        const cd k2u = (v + 0.5 * ds * k1v) / cm, k2v = -omega * omega * (u + 0.5 * ds * k1u);
        const cd k3u = (v + 0.5 * ds * k2v) / cm, k3v = -omega * omega * (u + 0.5 * ds * k2u);
        const cd k4u = (v + ds * k3v) / ce1, k4v = -omega * omega * (u + ds * k3u);
        u += ds / 6 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += ds / 6 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    const cd w = v / cd(0, omega * ca);
    const cd A = 0.5 * (u + w) * std::exp(cd(0, -omega * a / ca));
    const cd B = 0.5 * (u - w) * std::exp(cd(0, omega * a / ca));
    return B / A;
}

OracleFit helmholtz_decay(const std::function<double(double)>& c, double a, double b, double k_lo, double k_hi,
                          int bins_per_octave, int per_bin, double step)
{
    if (!(k_hi > k_lo && k_lo > 0)) throw std::invalid_argument("helmholtz_decay: bad band");
    const int nb = std::max(1, static_cast<int>(std::lround(std::log2(k_hi / k_lo) * bins_per_octave)));
    const double ca = c(a - 1e-9);
    OracleFit of;
    std::vector<double> X, Y;
    for (int bin = 0; bin < nb; ++bin) {
        const double e0 = k_lo * std::pow(k_hi / k_lo, static_cast<double>(bin) / nb);
        const double e1 = k_lo * std::pow(k_hi / k_lo, static_cast<double>(bin + 1) / nb);
        double sum = 0;
        for (int j = 0; j < per_bin; ++j) {
            const double k = e0 * std::pow(e1 / e0, (j + 0.5) / per_bin);
            sum += std::abs(helmholtz_reflection(c, k * ca, a, b, step));
        }
        const BinValue bv{std::sqrt(e0 * e1), sum / per_bin};
        of.bins.push_back(bv);
        X.push_back(std::log(bv.k));
        Y.push_back(std::log(std::max(bv.mean, 1e-300)));
    }
    if (X.size() >= 2) {
        const auto lf = fit_line(X, Y);
        of.r = -lf.slope;
        of.stderr_ = lf.stderr_;
    }
    return of;
}

const WindowResult& RegularityReport::at(Label l) const
{
    for (const auto& w : windows)
        if (w.label == l) return w;
    throw std::out_of_range("RegularityReport: no window labelled " + to_string(l));
}

RegularityReport gain_report(const std::vector<WindowResult>& fits, const order::Rational& s0,
                             const order::Rational& eps0, int k, const GainOptions& opt)
{
    RegularityReport r;
    r.windows = fits;
    const auto& inc = r.at(Label::Incident).fit;
    const auto& ref = r.at(Label::Reflected).fit;
    const auto& tr = r.at(Label::Transmitted).fit;

    const auto hw = order::hyperbolic_window(s0, eps0, k);
    r.window_admissible = hw.theorem.admissible;
    auto dbl = [](const order::Rational& q) { return boost::rational_cast<double>(q); };
    if (hw.theorem.lo) r.window_lo = dbl(*hw.theorem.lo);
    if (hw.theorem.hi) r.window_hi = dbl(*hw.theorem.hi);

    r.gain_reflected = ref.s_hat() - inc.s_hat();
    r.gain_transmitted = tr.s_hat() - inc.s_hat();
    r.reflected_absent = ref.peak < opt.absence_ratio * inc.peak;
    r.reflected_target = std::min(inc.s_hat() + opt.gain_floor, dbl(s0) - 1 - 0.5 * k - opt.margin);
    r.oracle_reflected = opt.oracle_reflected;

    bool inconclusive = false;
    if (r.reflected_absent) {
        r.reasons.push_back("no reflected packet: reflected spectrum below " + std::to_string(opt.absence_ratio) +
                            " of the incident one");
        inconclusive = true;
    }
    for (const auto& w : r.windows)
        if (!w.fit.confident() && !(w.label == Label::Reflected && r.reflected_absent)) {
            r.reasons.push_back(to_string(w.label) + " fit not confident: " + w.fit.note);
            inconclusive = true;
        }
    if (!r.window_admissible) r.reasons.push_back("hyperbolic window empty or gated: " + hw.theorem.gate.describe());

    bool fail = false;
    if (std::abs(r.gain_transmitted) > opt.tol_transmitted) {
        r.reasons.push_back("transmitted order differs from incident by " + std::to_string(r.gain_transmitted));
        fail = true;
    }
    if (ref.s_hat() < r.reflected_target) {
        r.reasons.push_back("reflected s_hat " + std::to_string(ref.s_hat()) + " below target " +
                            std::to_string(r.reflected_target));
        fail = true;
    }
    if (opt.oracle_reflected) {
        r.oracle_matched = std::abs(ref.r_hat - *opt.oracle_reflected) <= opt.oracle_tol;
        if (!r.oracle_matched) {
            r.reasons.push_back("reflected decay " + std::to_string(ref.r_hat) + " vs oracle " +
                                std::to_string(*opt.oracle_reflected));
            fail = true;
        }
    }
    r.verdict = inconclusive ? Verdict::Inconclusive : (fail ? Verdict::Fail : Verdict::Pass);
    return r;
}

RegularityReport gain_report(const wave::WaveField& field, const std::vector<ProbeWindow>& windows,
                             const order::Rational& s0, const order::Rational& eps0, int k, const GainOptions& opt,
                             const FitOptions& fit)
{
    std::vector<WindowResult> fits;
    for (const auto& w : windows) fits.push_back({w.label, w, decay_fit(field, w, fit)});
    return gain_report(fits, s0, eps0, k, opt);
}

std::string report_json(const RegularityReport& r)
{
    json j;
    json ws = json::array();
    for (const auto& w : r.windows) {
        json bins = json::array();
        for (const auto& b : w.fit.bins) bins.push_back({b.k, b.mean});
        ws.push_back({{"label", to_string(w.label)},
                      {"x", {w.window.x_lo, w.window.x_hi}},
                      {"t", {w.window.t_lo, w.window.t_hi}},
                      {"ray", {w.window.ray_t, w.window.ray_x}},
                      {"r_hat", w.fit.r_hat},
                      {"stderr", w.fit.stderr_},
                      {"s_hat", w.fit.s_hat()},
                      {"band", {w.fit.k_lo, w.fit.k_hi}},
                      {"used_bins", w.fit.used_bins},
                      {"dynamic_range_decades", w.fit.dynamic_range},
                      {"noise_floor", w.fit.noise_floor},
                      {"peak", w.fit.peak},
                      {"low_confidence", w.fit.low_confidence},
                      {"smooth_at_resolution", w.fit.smooth_at_resolution},
                      {"rejected", w.fit.rejected},
                      {"note", w.fit.note},
                      {"bins", bins}});
    }
    j["windows"] = ws;
    j["gain_reflected"] = r.gain_reflected;
    j["gain_transmitted"] = r.gain_transmitted;
    j["reflected_absent"] = r.reflected_absent;
    j["hyperbolic_window"] = {{"lo", r.window_lo}, {"hi", r.window_hi}, {"admissible", r.window_admissible}};
    j["reflected_target"] = r.reflected_target;
    j["oracle_reflected"] = r.oracle_reflected ? json(*r.oracle_reflected) : json(nullptr);
    j["oracle_matched"] = r.oracle_matched;
    j["verdict"] = to_string(r.verdict);
    j["reasons"] = r.reasons;
    return j.dump(2);
}

std::string report_csv(const RegularityReport& r)
{
    std::ostringstream os;
    os << std::setprecision(10) << "label,k,mean,fit\n";
    for (const auto& w : r.windows) {
        // fit line through the band: log mean = b - r log k, anchored at the geometric mean of the used bins
        double lx = 0, ly = 0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < w.fit.used_bins && i < w.fit.bins.size(); ++i) {
            lx += std::log(w.fit.bins[i].k);
            ly += std::log(w.fit.bins[i].mean);
            ++n;
        }
        for (std::size_t i = 0; i < w.fit.bins.size(); ++i) {
            const auto& b = w.fit.bins[i];
            os << to_string(w.label) << ',' << b.k << ',' << b.mean << ',';
            if (n > 0 && i < w.fit.used_bins) os << std::exp(ly / n - w.fit.r_hat * (std::log(b.k) - lx / n));
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace cnl::probe
