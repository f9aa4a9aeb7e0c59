#include "cnl/escape_function.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>

namespace cnl::escape {

namespace {

// exp(-1/t) underflows to 0 well before 1/t reaches this.
constexpr double kChi0Cut = 745.0;

// Forward-mode value/derivative pair, enough for the cutoffs.
struct Dual {
    double v;
    double d;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(double a, Dual b) { return {a - b.v, -b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }

Dual dual_chi0(Dual t)
{
    if (t.v <= 0 || 1.0 / t.v > kChi0Cut) return {0, 0};
    const Dual inv = Dual{1, 0} / t;
    const double ev = std::exp(-inv.v);
    return {ev, -ev * inv.d};
}

Dual dual_chi1(Dual t)
{
    if (t.v <= 0) return {0, 0};
    if (t.v >= 1) return {1, 0};
    const Dual a = dual_chi0(t);
    const Dual b = dual_chi0(1.0 - t);
    return a / (a + b);
}

double sgn(double x) { return (x > 0) - (x < 0); }

EscapeFrame coordinate_frame(std::string name, int n, VectorField hamilton)
{
    if (n < 2) throw std::invalid_argument("frame dimension n must be >= 2");
    const std::size_t d = static_cast<std::size_t>(2 * n - 1);
    std::vector<ScalarField> sigma;
    for (std::size_t j = 1; j < d; ++j) sigma.push_back([j](const Point& q) { return q[j]; });
    return EscapeFrame(std::move(name), Point(d, 0.0), [](const Point& q) { return q[0]; },
                       std::move(sigma), std::move(hamilton));
}

}  // namespace

void EscapeParams::validate() const
{
    if (!(delta > 0 && delta < delta0 && delta0 <= 1)) throw std::invalid_argument("delta must lie in (0, delta0)");
    if (!(eps > 0 && eps <= 1)) throw std::invalid_argument("eps must lie in (0, 1]");
    if (!(beta > 0 && beta <= 1)) throw std::invalid_argument("beta must lie in (0, 1]");
    if (!(F > 0)) throw std::invalid_argument("F must be positive");
    if (!(c0 > 0)) throw std::invalid_argument("c0 must be positive");
    if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (schedule_active && eps < C_prime * std::pow(delta, alpha) * (1 - 1e-12))
        throw std::invalid_argument("eps below C' delta^alpha with the schedule active");
}

double CutoffPair::chi0(double t)
{
    if (t <= 0 || 1.0 / t > kChi0Cut) return 0;
    return std::exp(-1.0 / t);
}

double CutoffPair::chi0_prime(double t)
{
    // chi0(t) = t^2 chi0'(t)
    const double c = chi0(t);
    return c == 0 ? 0 : c / (t * t);
}

double CutoffPair::chi1(double t)
{
    if (t <= 0) return 0;
    if (t >= 1) return 1;
    const double a = chi0(t);
    return a / (a + chi0(1 - t));
}

double CutoffPair::chi1_prime(double t)
{
    if (t <= 0 || t >= 1) return 0;
    const double a = chi0(t), b = chi0(1 - t);
    const double s = a + b;
    return (chi0_prime(t) * b + a * chi0_prime(1 - t)) / (s * s);
}

double CutoffPair::sqrt_chi1(double t)
{
    if (t <= 0) return 0;
    if (t >= 1) return 1;
    // e^{-1/(2t)} / sqrt(e^{-1/t} + e^{-1/(1-t)}) without the underflow in the ratio
    const double x = 1.0 / t, y = 1.0 / (1 - t);
    return 1.0 / std::sqrt(1.0 + std::exp(x - y));
}

EscapeFrame::EscapeFrame(std::string name, Point base, ScalarField eta, std::vector<ScalarField> sigma,
                         VectorField hamilton)
    : name_(std::move(name)), base_(std::move(base)), eta_(std::move(eta)), sigma_(std::move(sigma)),
      hamilton_(std::move(hamilton))
{
    if (base_.empty()) throw std::invalid_argument("EscapeFrame: empty base point");
    if (!eta_ || !hamilton_) throw std::invalid_argument("EscapeFrame: eta and hamilton are required");
}

void EscapeFrame::set_analytic(ScalarField hp_eta, std::vector<ScalarField> hp_sigma)
{
    if (hp_sigma.size() != sigma_.size())
        throw std::invalid_argument("set_analytic: one derivative per sigma required");
    hp_eta_ = std::move(hp_eta);
    hp_sigma_ = std::move(hp_sigma);
}

double EscapeFrame::omega(const Point& q) const
{
    double w = 0;
    for (const auto& s : sigma_) {
        const double v = s(q);
        w += v * v;
    }
    return w;
}

double EscapeFrame::directional_fd(const ScalarField& f, const Point& q) const
{
    const Point v = hamilton_(q);
    double scale = 0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0) return 0;
    double qs = 0;
    for (double x : q) qs = std::max(qs, std::abs(x));
    const double h = 1e-3 * std::max(qs, 1e-3) / scale;
    auto central = [&](double step) {
        Point a = q, b = q;
        for (std::size_t i = 0; i < q.size(); ++i) {
            a[i] += step * v[i];
            b[i] -= step * v[i];
        }
        return (f(a) - f(b)) / (2 * step);
    };
    return (4 * central(h / 2) - central(h)) / 3;
}

double EscapeFrame::hp_eta(const Point& q) const
{
    return hp_eta_ ? hp_eta_(q) : directional_fd(eta_, q);
}

double EscapeFrame::hp_sigma(std::size_t j, const Point& q) const
{
    return hp_eta_ ? hp_sigma_[j](q) : directional_fd(sigma_[j], q);
}

double EscapeFrame::hp_omega(const Point& q) const
{
    double out = 0;
    for (std::size_t j = 0; j < sigma_.size(); ++j) out += 2 * sigma_[j](q) * hp_sigma(j, q);
    return out;
}

void EscapeFrame::check_base(double tol) const
{
    if (std::abs(eta(base_)) > tol) throw std::logic_error(name_ + ": eta does not vanish at the base point");
    if (!(hp_eta(base_) > 0)) throw std::logic_error(name_ + ": H_p eta must be positive at the base point");
    for (std::size_t j = 0; j < sigma_.size(); ++j) {
        if (std::abs(sigma(j, base_)) > tol)
            throw std::logic_error(name_ + ": sigma_" + std::to_string(j) + " does not vanish at the base point");
        if (std::abs(hp_sigma(j, base_)) > tol)
            throw std::logic_error(name_ + ": H_p sigma_" + std::to_string(j) + " does not vanish at the base point");
    }
}

EscapeFrame precise_localizer_frame(double c0, int n)
{
    const std::size_t d = static_cast<std::size_t>(2 * n - 1);
    auto frame = coordinate_frame("precise-localizer", n, [c0, d](const Point&) {
        Point v(d, 0.0);
        v[0] = c0;
        return v;
    });
    std::vector<ScalarField> hp_sigma(d - 1, [](const Point&) { return 0.0; });
    frame.set_analytic([c0](const Point&) { return c0; }, std::move(hp_sigma));
    return frame;
}

EscapeFrame smooth_frame(double c0, double C0, int n)
{
    const std::size_t d = static_cast<std::size_t>(2 * n - 1);
    auto frame = coordinate_frame("smooth", n, [c0, C0, d](const Point& q) {
        Point v(d, C0 * q[0]);
        v[0] = c0;
        return v;
    });
    std::vector<ScalarField> hp_sigma(d - 1, [C0](const Point& q) { return C0 * q[0]; });
    frame.set_analytic([c0](const Point&) { return c0; }, std::move(hp_sigma));
    return frame;
}

EscapeFrame hoelder_frame(double c0, double C0, double alpha, int n)
{
    const std::size_t d = static_cast<std::size_t>(2 * n - 1);
    auto radius = [](const Point& q) {
        double w = 0;
        for (std::size_t i = 1; i < q.size(); ++i) w += q[i] * q[i];
        return std::sqrt(w) + std::abs(q[0]);
    };
    auto field = [=](const Point& q) {
        Point v(d);
        v[0] = c0;
        const double r = std::pow(radius(q), alpha);
        for (std::size_t i = 1; i < d; ++i) v[i] = -sgn(q[i]) * C0 * r;
        return v;
    };
    auto frame = coordinate_frame("synthetic-hoelder", n, field);
    std::vector<ScalarField> hp_sigma;
    for (std::size_t i = 1; i < d; ++i)
        hp_sigma.push_back([=](const Point& q) { return -sgn(q[i]) * C0 * std::pow(radius(q), alpha); });
    frame.set_analytic([c0](const Point&) { return c0; }, std::move(hp_sigma));
    return frame;
}

double eval_phi(const Point& q, const EscapeFrame& frame, const EscapeParams& params)
{
    return frame.eta(q) + frame.omega(q) / (params.eps * params.eps * params.delta);
}

double eval_a(const Point& q, const EscapeFrame& frame, const EscapeParams& params, const CutoffPair& cutoffs)
{
    const double phi = eval_phi(q, frame, params);
    const double T = (2 * params.beta - phi / params.delta) / params.F;
    const double S = (frame.eta(q) + params.delta) / (params.eps * params.delta) + 1;
    return cutoffs.chi0(T) * cutoffs.chi1(S);
}

SupportReport check_support_estimates(const std::vector<Point>& samples, const EscapeFrame& frame,
                                      const EscapeParams& params, const CutoffPair& cutoffs)
{
    const double d = params.delta, e = params.eps;
    const double tol = 1e-12 * d;
    SupportReport rep;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& q = samples[i];
        ++rep.checked;
        if (!(eval_a(q, frame, params, cutoffs) > 0)) continue;
        ++rep.in_support;
        const double eta = frame.eta(q);
        const double root = std::sqrt(frame.omega(q));
        rep.max_radius = std::max(rep.max_radius, root + std::abs(eta));
        auto flag = [&](std::string why) { rep.violations.push_back({i, q, std::move(why)}); };
        if (eta < -d - e * d - tol) flag("eta below -delta-eps*delta");
        if (eta > 2 * params.beta * d + tol) flag("eta above 2*beta*delta");
        if (root > 2 * e * d + tol) flag("omega^{1/2} above 2*eps*delta");
        const double S = (eta + d) / (e * d) + 1;
        if (cutoffs.chi1_prime(S) > 0) {
            ++rep.on_step;
            if (eta > -d + tol) flag("chi1' active with eta above -delta");
        }
    }
    return rep;
}

Decomposition decompose_commutator(const Point& q, const EscapeFrame& frame, const EscapeParams& params,
                                   const CutoffPair& cutoffs)
{
    const double d = params.delta, e = params.eps, F = params.F;
    Decomposition out;
    const double eta = frame.eta(q);
    const double hp_eta = frame.hp_eta(q);
    out.hp_phi = hp_eta + frame.hp_omega(q) / (e * e * d);

    const double phi = eval_phi(q, frame, params);
    const Dual T{(2 * params.beta - phi / d) / F, -out.hp_phi / (F * d)};
    const Dual S{(eta + d) / (e * d) + 1, hp_eta / (e * d)};
    const Dual a = dual_chi0(T) * dual_chi1(S);
    out.a = a.v;
    out.hp_a = a.d;

    const double c1 = cutoffs.chi1(S.v);
    const double c0p = cutoffs.chi0_prime(T.v);
    out.b_squared = out.hp_phi * c0p * c1 / (F * d);
    out.e = cutoffs.chi0(T.v) * cutoffs.chi1_prime(S.v) * hp_eta / (e * d);
    out.residual = out.hp_a + out.b_squared - out.e;
    if (out.hp_phi >= 0) {
        out.b = std::sqrt(out.hp_phi / (F * d)) * std::sqrt(c0p) * cutoffs.sqrt_chi1(S.v);
    } else {
        out.positive = !(out.a > 0);
    }
    return out;
}

double epsilon_schedule(double delta, double alpha, double C_prime)
{
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("epsilon_schedule: delta must lie in (0,1)");
    if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("epsilon_schedule: alpha must lie in (0,1]");
    return std::min(1.0, C_prime * std::pow(delta, alpha));
}

double hoelder_C_prime(double C0, double c0, double alpha, std::size_t m)
{
    // On supp a: omega^{1/2} <= 2 eps delta and |eta| <= 2 delta, so
    // |H_p omega| <= 2 sqrt(m) omega^{1/2} C0 (4 delta)^alpha <= 4 sqrt(m) C0 4^alpha eps delta^{1+alpha}.
    return 8.0 * std::sqrt(static_cast<double>(m)) * std::pow(4.0, alpha) * C0 / c0;
}

PositivityReport check_positivity(const EscapeFrame& frame, const EscapeParams& params, double C0, double alpha,
                                  const std::vector<Point>& samples, const CutoffPair& cutoffs)
{
    PositivityReport rep;
    rep.C_prime_required = hoelder_C_prime(C0, params.c0, alpha, frame.sigma_count());
    rep.schedule_satisfied =
        params.eps >= std::min(1.0, rep.C_prime_required * std::pow(params.delta, alpha)) * (1 - 1e-12);
    rep.min_hp_phi = std::numeric_limits<double>::infinity();
    const double e2d = params.eps * params.eps * params.delta;
    for (const auto& q : samples) {
        if (!(eval_a(q, frame, params, cutoffs) > 0)) continue;
        ++rep.in_support;
        rep.min_hp_phi = std::min(rep.min_hp_phi, frame.hp_eta(q) + frame.hp_omega(q) / e2d);
    }
    rep.margin = rep.min_hp_phi - params.c0 / 2;
    rep.ok = rep.in_support > 0 && rep.margin >= 0;
    return rep;
}

double absorption_factor(double s, double r_weight, double M, double F, double beta, double delta,
                         double phi_over_delta, double hp_phi, double rho_bound, double c0)
{
    const double gap = 2 * beta - phi_over_delta;
    if (std::abs(gap) > 4 + 1e-12) throw std::invalid_argument("absorption_factor: |2 beta - phi/delta| > 4");
    const double psi2 = hp_phi - c0 / 4;
    return psi2 - (((2 * s - 1) - r_weight) * rho_bound + M * M) / F * delta * gap * gap;
}

std::optional<double> find_F_threshold(double s, double r_weight, double M, double beta, double delta,
                                       double rho_bound, double c0, const std::vector<AbsorptionSample>& samples,
                                       const std::vector<double>& F_grid)
{
    std::vector<double> grid = F_grid;
    std::sort(grid.begin(), grid.end());
    for (double F : grid) {
        const bool ok = std::all_of(samples.begin(), samples.end(), [&](const AbsorptionSample& p) {
            return absorption_factor(s, r_weight, M, F, beta, delta, p.phi_over_delta, p.hp_phi, rho_bound, c0) >=
                   c0 / 8;
        });
        if (ok) return F;
    }
    return std::nullopt;
}

std::vector<double> geometric_grid(double lo, double hi, double ratio)
{
    if (!(lo > 0 && hi >= lo && ratio > 1)) throw std::invalid_argument("geometric_grid: bad arguments");
    std::vector<double> out;
    for (double x = lo; x <= hi * (1 + 1e-12); x *= ratio) out.push_back(x);
    return out;
}

std::vector<Point> box_samples(const EscapeFrame& frame, const EscapeParams& params, int per_axis,
                               std::size_t halton)
{
    if (per_axis < 2) throw std::invalid_argument("box_samples: need at least 2 points per axis");
    const std::size_t d = frame.dim();
    Point half_width(d, 3 * params.eps * params.delta);
    half_width[0] = 3 * params.delta;
    const Point& base = frame.base_point();

    std::vector<Point> out;
    std::vector<int> idx(d, 0);
    while (true) {
        Point q(d);
        for (std::size_t i = 0; i < d; ++i)
            q[i] = base[i] + half_width[i] * (-1.0 + 2.0 * idx[i] / (per_axis - 1));
        out.push_back(std::move(q));
        std::size_t i = 0;
        while (i < d && ++idx[i] == per_axis) idx[i++] = 0;
        if (i == d) break;
    }

    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (halton > 0 && d > std::size(primes)) throw std::invalid_argument("box_samples: dimension too large for Halton");
    for (std::size_t h = 1; h <= halton; ++h) {
        Point q(d);
        for (std::size_t i = 0; i < d; ++i) {
            double f = 1, r = 0;
            for (std::size_t n = h; n > 0; n /= primes[i]) {
                f /= primes[i];
                r += f * static_cast<double>(n % primes[i]);
            }
            q[i] = base[i] + half_width[i] * (2 * r - 1);
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace cnl::escape
