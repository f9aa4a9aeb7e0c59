#include "cnl/hamiltonian_field.hpp"

#include "cnl/escape_function.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cnl::ham {

namespace {

using escape::CutoffPair;

// psi(u) = 1 - chi1(2u - 1): 1 on [0, 1/2], 0 on [1, inf).
double psi(double u) { return 1.0 - CutoffPair::chi1(2 * u - 1); }
double psi_prime(double u) { return -2.0 * CutoffPair::chi1_prime(2 * u - 1); }

double dot(const Vec& a, const Vec& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

double quad(const Mat& B, const Vec& v)
{
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) s += B[i][j] * v[i] * v[j];
    return s;
}

Vec spatial(const Vec& x) { return Vec(x.begin() + 1, x.end()); }

HolderFit fit(std::vector<double> scales, std::vector<double> osc)
{
    HolderFit out;
    out.scales = scales;
    out.oscillation = osc;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (osc[i] <= 0) continue;
        lx.push_back(std::log(scales[i]));
        ly.push_back(std::log(osc[i]));
    }
    if (lx.size() < 3) {
        // constant (or numerically constant) field
        out.alpha_hat = 1;
        out.lipschitz_or_better = true;
        return out;
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    out.raw_slope = sxy / sxx;
    out.C_hat = std::exp(my - out.raw_slope * mx);
    out.lipschitz_or_better = out.raw_slope >= 0.98;
    out.alpha_hat = out.lipschitz_or_better ? 1.0 : out.raw_slope;
    return out;
}

double oscillation(const std::function<double(double)>& f, double lo, double hi, double h)
{
    const double step = h / 4;
    const auto count = static_cast<long long>(std::floor((hi - lo - h) / step));
    if (count < 1) throw std::invalid_argument("holder_estimate: scale larger than the interval");
    double best = 0;
    for (long long i = 0; i <= count; ++i) {
        const double x = lo + static_cast<double>(i) * step;
        best = std::max(best, std::abs(f(x + h) - f(x)));
    }
    return best;
}

}  // namespace

ConormalMetric::ConormalMetric(Params p) : p_(std::move(p))
{
    if (p_.n < 2) throw std::invalid_argument("ConormalMetric: n must be >= 2");
    if (p_.k < 1 || p_.k > p_.n - 1) throw std::invalid_argument("ConormalMetric: need 1 <= k <= n-1");
    if (p_.c_gradient.empty()) p_.c_gradient.assign(static_cast<std::size_t>(p_.n - 1), 0.0);
    if (p_.c_gradient.size() != static_cast<std::size_t>(p_.n - 1))
        throw std::invalid_argument("ConormalMetric: c_gradient must have n-1 entries");
    if (!(p_.c_smooth > 0)) throw std::invalid_argument("ConormalMetric: c_smooth must be positive");
    if (!(p_.radius > 0)) throw std::invalid_argument("ConormalMetric: radius must be positive");
    flat_ = p_.amplitude == 0;
    if (!flat_ && !(p_.s0 > p_.k + 1))
        throw std::invalid_argument("ConormalMetric: s0 must exceed k+1 for a C^1 metric");
    alpha_ = p_.s0 - p_.k - 1;
}

ConormalMetric ConormalMetric::minkowski(int n)
{
    Params p;
    p.n = n;
    p.amplitude = 0;
    return ConormalMetric(p);
}

double ConormalMetric::singular_part(const Vec& xs) const
{
    if (flat_) return 0;
    double r2 = 0;
    for (int i = 0; i < p_.k; ++i) r2 += xs[i] * xs[i];
    const double r = std::sqrt(r2);
    if (r >= p_.radius) return 0;
    return p_.amplitude * std::pow(r, p_.s0 - p_.k) * psi(r / p_.radius);
}

double ConormalMetric::speed(const Vec& xs) const
{
    return p_.c_smooth + dot(p_.c_gradient, xs) + singular_part(xs);
}

Vec ConormalMetric::speed_gradient(const Vec& xs) const
{
    Vec g = p_.c_gradient;
    if (flat_) return g;
    double r2 = 0;
    for (int i = 0; i < p_.k; ++i) r2 += xs[i] * xs[i];
    const double r = std::sqrt(r2);
    if (r == 0 || r >= p_.radius) return g;
    const double beta = p_.s0 - p_.k;
    const double u = r / p_.radius;
    const double dr = p_.amplitude * (beta * std::pow(r, beta - 1) * psi(u) + std::pow(r, beta) * psi_prime(u) / p_.radius);
    for (int i = 0; i < p_.k; ++i) g[i] += dr * xs[i] / r;
    return g;
}

Mat ConormalMetric::dual_metric(const Vec& x) const
{
    const auto n = static_cast<std::size_t>(p_.n);
    const double c = speed(spatial(x));
    Mat G(n, Vec(n, 0.0));
    G[0][0] = 1;
    for (std::size_t i = 1; i < n; ++i) G[i][i] = -c * c;
    return G;
}

bool ConormalMetric::lorentzian_at(const Vec& x) const
{
    const double c = speed(spatial(x));
    return std::isfinite(c) && c > 0;
}

bool ConormalMetric::y_timelike_at(const Vec& x) const
{
    // G restricted to N*Y is -c^2 |xi'|^2
    const auto G = dual_metric(x);
    for (int i = 1; i <= p_.k; ++i)
        if (!(G[i][i] < 0)) return false;
    return true;
}

double dual_hamiltonian(const ConormalMetric& m, const PhasePoint& q)
{
    const double c = m.speed(spatial(q.x));
    double xi2 = 0;
    for (std::size_t i = 1; i < q.xi.size(); ++i) xi2 += q.xi[i] * q.xi[i];
    return q.xi[0] * q.xi[0] - c * c * xi2;
}

bool on_characteristic_set(const ConormalMetric& m, const PhasePoint& q, double tol)
{
    const double s = norm(q.xi);
    if (s == 0) return false;
    return std::abs(dual_hamiltonian(m, q)) / (s * s) < tol;
}

PhasePoint hamilton_vector(const ConormalMetric& m, const PhasePoint& q)
{
    const Vec xs = spatial(q.x);
    const double c = m.speed(xs);
    const Vec gc = m.speed_gradient(xs);
    double xi2 = 0;
    for (std::size_t i = 1; i < q.xi.size(); ++i) xi2 += q.xi[i] * q.xi[i];

    PhasePoint v{Vec(q.x.size(), 0.0), Vec(q.xi.size(), 0.0)};
    v.x[0] = 2 * q.xi[0];
    for (std::size_t i = 1; i < q.x.size(); ++i) {
        v.x[i] = -2 * c * c * q.xi[i];
        v.xi[i] = 2 * c * gc[i - 1] * xi2;
    }
    return v;
}

NormalFormCoeffs normal_form(const ConormalMetric& m)
{
    if (m.k() != 1) throw std::invalid_argument("normal_form: only k = 1 is supported");
    // spatial point from split (x, y = (t, x_2, ...))
    auto xs = [](double x, const Vec& y) {
        Vec s(y.size());
        s[0] = x;
        for (std::size_t i = 1; i < y.size(); ++i) s[i] = y[i];
        return s;
    };
    NormalFormCoeffs nf;
    nf.A = [m, xs](double x, const Vec& y) {
        const double c = m.speed(xs(x, y));
        return -c * c;
    };
    nf.B = [m, xs](double x, const Vec& y) {
        const double c = m.speed(xs(x, y));
        Mat B(y.size(), Vec(y.size(), 0.0));
        B[0][0] = 1;
        for (std::size_t i = 1; i < y.size(); ++i) B[i][i] = -c * c;
        return B;
    };
    nf.C = [](double, const Vec& y) { return Vec(y.size(), 0.0); };
    return nf;
}

void validate_normal_form(const NormalFormCoeffs& nf, const std::vector<Vec>& ys, double tol)
{
    for (const auto& y : ys) {
        for (double c : nf.C(0, y))
            if (std::abs(c) > tol) throw std::logic_error("normal form: C(0,y) != 0");
        if (!(nf.A(0, y) < 0)) throw std::logic_error("normal form: A(0,y) must be negative");
        const Mat B = nf.B(0, y);
        // B is diagonal for every metric built here; sign counting suffices.
        for (std::size_t i = 0; i < B.size(); ++i)
            for (std::size_t j = 0; j < B.size(); ++j)
                if (i != j && std::abs(B[i][j]) > tol) throw std::logic_error("normal form: only diagonal B is validated");
        int pos = 0, neg = 0;
        for (std::size_t i = 0; i < B.size(); ++i) {
            if (B[i][i] > tol) ++pos;
            else if (B[i][i] < -tol) ++neg;
        }
        if (pos != 1 || neg != static_cast<int>(B.size()) - 1) throw std::logic_error("normal form: B(0,y) not Lorentzian");
    }
}

SplitPoint to_split(const PhasePoint& q)
{
    if (q.x.size() < 2) throw std::invalid_argument("to_split: need at least one spatial coordinate");
    SplitPoint s;
    s.x = q.x[1];
    s.xi = q.xi[1];
    s.y.push_back(q.x[0]);
    s.eta.push_back(q.xi[0]);
    for (std::size_t i = 2; i < q.x.size(); ++i) {
        s.y.push_back(q.x[i]);
        s.eta.push_back(q.xi[i]);
    }
    return s;
}

PhasePoint from_split(const SplitPoint& s)
{
    PhasePoint q;
    q.x = {s.y[0], s.x};
    q.xi = {s.eta[0], s.xi};
    for (std::size_t i = 1; i < s.y.size(); ++i) {
        q.x.push_back(s.y[i]);
        q.xi.push_back(s.eta[i]);
    }
    return q;
}

BCovector compress(const SplitPoint& s)
{
    return {s.x, s.y, s.x * s.xi, s.eta};
}

std::string to_string(BoundaryClass c)
{
    return c == BoundaryClass::Hyperbolic ? "hyperbolic" : "glancing";
}

BoundaryClass classify_boundary_point(const NormalFormCoeffs& nf, const Vec& y0, const Vec& eta0, double tol)
{
    const double s = norm(eta0);
    if (s == 0) throw std::domain_error("classify_boundary_point: zero covector");
    Vec e = eta0;
    for (double& v : e) v /= s;
    const double b = quad(nf.B(0, y0), e);
    if (b < -tol) throw std::domain_error("classify_boundary_point: not in the compressed characteristic set");
    return b > tol ? BoundaryClass::Hyperbolic : BoundaryClass::Glancing;
}

RelatedRays related_rays(const NormalFormCoeffs& nf, const Vec& y0, const Vec& eta0, double tol)
{
    if (classify_boundary_point(nf, y0, eta0, tol) != BoundaryClass::Hyperbolic)
        throw std::domain_error("related_rays: glancing point has no normal momentum");
    const double A = nf.A(0, y0);
    const double b = quad(nf.B(0, y0), eta0);
    RelatedRays out;
    out.normal_momentum = std::sqrt(-b / A);
    for (double sign : {1.0, -1.0}) out.points.push_back({0.0, y0, sign * out.normal_momentum, eta0});
    return out;
}

HolderFit holder_estimate(const std::function<double(double)>& f, double lo, double hi,
                          const std::vector<double>& probe_scales)
{
    if (probe_scales.size() < 3) throw std::invalid_argument("holder_estimate: need at least 3 probe scales");
    if (!(hi > lo)) throw std::invalid_argument("holder_estimate: empty interval");
    std::vector<double> osc;
    for (double h : probe_scales) osc.push_back(oscillation(f, lo, hi, h));
    return fit(probe_scales, osc);
}

HolderFit holder_estimate(const std::function<double(const Vec&)>& f, const Vec& center, double radius,
                          const std::vector<double>& probe_scales)
{
    if (probe_scales.size() < 3) throw std::invalid_argument("holder_estimate: need at least 3 probe scales");
    const std::size_t d = center.size();
    std::vector<Vec> dirs;
    for (std::size_t i = 0; i < d; ++i) {
        Vec u(d, 0.0);
        u[i] = 1;
        dirs.push_back(u);
    }
    if (d > 1 && d <= 6) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << (d - 1)); ++mask) {
            Vec u(d, 1.0 / std::sqrt(static_cast<double>(d)));
            for (std::size_t i = 1; i < d; ++i)
                if (mask & (std::size_t{1} << (i - 1))) u[i] = -u[i];
            dirs.push_back(u);
        }
    }
    std::vector<double> osc(probe_scales.size(), 0.0);
    for (const auto& u : dirs) {
        auto line = [&](double s) {
            Vec x = center;
            for (std::size_t i = 0; i < d; ++i) x[i] += s * u[i];
            return f(x);
        };
        for (std::size_t j = 0; j < probe_scales.size(); ++j)
            osc[j] = std::max(osc[j], oscillation(line, -radius, radius, probe_scales[j]));
    }
    return fit(probe_scales, osc);
}

std::vector<double> dyadic_scales(int lo, int hi)
{
    std::vector<double> out;
    for (int j = lo; j <= hi; ++j) out.push_back(std::ldexp(1.0, -j));
    return out;
}

}  // namespace cnl::ham
