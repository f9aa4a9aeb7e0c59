#include "cnl/bichar_tracer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace cnl::trace {

namespace {

double norm(const Vec& v)
{
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// RK4 on the reparametrized system. State w = (z', T), parameter s = x_n.
class Stepper {
public:
    // sign: expected sign of V_n (0 = not enforced). A sign change of V_n
    // inside a step means the curve turned back towards the other side.
    Stepper(const Field& V, std::size_t n, double floor, double sign = 0)
        : V_(V), n_(n), floor_(floor), sign_(sign)
    {
    }

    Vec full(double s, const Vec& w) const
    {
        Vec x(w.size());
        for (std::size_t i = 0, j = 0; i < x.size(); ++i) x[i] = i == n_ ? s : w[j++];
        return x;
    }

    Vec reduced(const Vec& x) const
    {
        Vec w;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (i != n_) w.push_back(x[i]);
        w.push_back(0.0);
        return w;
    }

    // Returns false when V_n degenerates.
    bool rhs(double s, const Vec& w, Vec& out) const
    {
        const Vec v = V_(full(s, w));
        const double vn = v[n_];
        if (!(std::abs(vn) >= floor_ * norm(v)) || vn == 0) return false;
        if (sign_ != 0 && vn * sign_ < 0) return false;
        out.resize(w.size());
        for (std::size_t i = 0, j = 0; i < v.size(); ++i)
            if (i != n_) out[j++] = v[i] / vn;
        out.back() = 1.0 / vn;
        return true;
    }

    bool step(double s, const Vec& w, double ds, Vec& next) const
    {
        Vec k1, k2, k3, k4, tmp(w.size());
        if (!rhs(s, w, k1)) return false;
        for (std::size_t i = 0; i < w.size(); ++i) tmp[i] = w[i] + 0.5 * ds * k1[i];
        if (!rhs(s + 0.5 * ds, tmp, k2)) return false;
        for (std::size_t i = 0; i < w.size(); ++i) tmp[i] = w[i] + 0.5 * ds * k2[i];
        if (!rhs(s + 0.5 * ds, tmp, k3)) return false;
        for (std::size_t i = 0; i < w.size(); ++i) tmp[i] = w[i] + ds * k3[i];
        if (!rhs(s + ds, tmp, k4)) return false;
        next.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) next[i] = w[i] + ds / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        return true;
    }

private:
    const Field& V_;
    std::size_t n_;
    double floor_;
    double sign_;
};

// Nodes from a to b on the lattice a + j h, with 0 inserted when crossed and the
// steps next to 0 halved `levels` times.
std::vector<double> nodes(double a, double b, double h, int levels)
{
    const double dir = b >= a ? 1.0 : -1.0;
    const double len = std::abs(b - a);
    std::vector<double> s;
    const auto m = static_cast<long long>(std::floor(len / h * (1 + 1e-12)));
    for (long long j = 0; j <= m; ++j) s.push_back(a + dir * static_cast<double>(j) * h);
    if (std::abs(s.back() - b) > 1e-12 * std::max(1.0, std::abs(b))) s.push_back(b);
    else s.back() = b;
    if ((a < 0 && b > 0) || (a > 0 && b < 0)) s.push_back(0.0);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end(), [](double x, double y) { return std::abs(x - y) < 1e-15; }), s.end());

    const auto zero = std::find(s.begin(), s.end(), 0.0);
    if (zero != s.end() && levels > 0) {
        std::vector<double> extra;
        if (zero != s.begin())
            for (int l = 1; l <= levels; ++l) extra.push_back(std::ldexp(*(zero - 1), -l));
        if (zero + 1 != s.end())
            for (int l = 1; l <= levels; ++l) extra.push_back(std::ldexp(*(zero + 1), -l));
        s.insert(s.end(), extra.begin(), extra.end());
        std::sort(s.begin(), s.end());
    }
    if (dir < 0) std::reverse(s.begin(), s.end());
    return s;
}

double sgn(double x) { return (x > 0) - (x < 0); }

Vec pack(const ham::PhasePoint& q)
{
    Vec w = q.x;
    w.insert(w.end(), q.xi.begin(), q.xi.end());
    return w;
}

ham::PhasePoint unpack(const Vec& w)
{
    const std::size_t n = w.size() / 2;
    return {Vec(w.begin(), w.begin() + static_cast<long>(n)), Vec(w.begin() + static_cast<long>(n), w.end())};
}

struct Tracer {
    const ham::ConormalMetric& metric;
    TraceOptions opt;
    BranchPolicy policy;
    double t_end;
    Field field;
    std::vector<GBBPath> out;

    // Integrate one leg from q at time t; returns the samples and whether it
    // ended on Y (true) or at t_end / a turning point.
    enum class LegEnd { Time, Interface, Turning };

    LegEnd leg(const ham::PhasePoint& q, double t, std::vector<PhaseSample>& samples)
    {
        Vec x = pack(q);
        samples.push_back({t, q});
        const double chunk = std::max(64 * opt.h, 1.0);
        while (true) {
            const double x1 = x[1];
            const double v1 = field(x)[1];
            const double dir = sgn(v1);
            Stepper st(field, 1, opt.transversal.glancing_floor, dir);
            const bool toward = x1 != 0 && x1 * v1 < 0;
            const double target = toward ? 0.0 : x1 + dir * chunk;
            const auto s = nodes(x1, target, opt.h, opt.transversal.refine_levels);
            Vec w = st.reduced(x);
            for (std::size_t i = 1; i < s.size(); ++i) {
                Vec next;
                if (!st.step(s[i - 1], w, s[i] - s[i - 1], next)) return LegEnd::Turning;
                if (t + next.back() >= t_end) {
                    // partial step hitting t_end by bisection on the step length
                    double lo = 0, hi = s[i] - s[i - 1];
                    Vec trial;
                    for (int it = 0; it < 80; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        st.step(s[i - 1], w, mid, trial);
                        (t + trial.back() < t_end ? lo : hi) = mid;
                    }
                    st.step(s[i - 1], w, hi, trial);
                    const double s_final = s[i - 1] + hi;
                    samples.push_back({t_end, unpack(st.full(s_final, trial))});
                    return LegEnd::Time;
                }
                w = next;
                const Vec full = st.full(s[i], w);
                samples.push_back({t + w.back(), unpack(full)});
            }
            t += w.back();
            x = st.full(s.back(), w);
            if (toward) return LegEnd::Interface;
        }
    }

    void branch(ham::PhasePoint q, double t, GBBPath path, int events)
    {
        while (true) {
            std::vector<PhaseSample> samples;
            const auto end = leg(q, t, samples);
            const auto last = samples.back();
            path.legs.push_back(std::move(samples));
            if (end == LegEnd::Time) break;
            if (end == LegEnd::Turning) {
                path.events.push_back({last.t, last.q, EventType::GlancingHalt, last.q.xi, last.q.xi});
                break;
            }
            if (events >= opt.max_events) break;
            // on Y: normal momentum from A xi^2 + B eta.eta = 0
            ham::PhasePoint at = last.q;
            at.x[1] = 0.0;
            Vec xs(at.x.begin() + 1, at.x.end());
            const double c = metric.speed(xs);
            double b = at.xi[0] * at.xi[0];
            for (std::size_t i = 2; i < at.xi.size(); ++i) b -= c * c * at.xi[i] * at.xi[i];
            if (!(b > 1e-9 * at.xi[0] * at.xi[0])) {
                path.events.push_back({last.t, at, EventType::GlancingHalt, at.xi, at.xi});
                break;
            }
            const double xi1 = std::sqrt(b) / c;
            auto emit = [&](EventType type) {
                ham::PhasePoint next = at;
                const double sign = type == EventType::Reflection ? -sgn(at.xi[1]) : sgn(at.xi[1]);
                next.xi[1] = sign * xi1;
                GBBPath p = path;
                p.events.push_back({last.t, at, type, at.xi, next.xi});
                return std::make_pair(next, p);
            };
            if (policy == BranchPolicy::Tree) {
                auto [qt, pt] = emit(EventType::Transmission);
                branch(qt, last.t, std::move(pt), events + 1);
            }
            auto [qn, pn] = emit(policy == BranchPolicy::Transmit ? EventType::Transmission : EventType::Reflection);
            q = qn;
            path = std::move(pn);
            t = last.t;
            ++events;
        }
        out.push_back(std::move(path));
    }
};

}  // namespace

std::vector<CurveSample> transversal_integrate(const Field& V, const Vec& x0, double span, double h,
                                               std::size_t transversal_index, const TransversalOptions& opt)
{
    if (transversal_index >= x0.size()) throw std::invalid_argument("transversal_integrate: bad transversal index");
    if (!(h > 0)) throw std::invalid_argument("transversal_integrate: step must be positive");
    const double vn0 = V(x0)[transversal_index];
    Stepper st(V, transversal_index, opt.glancing_floor, vn0 > 0 ? 1.0 : -1.0);
    const double a = x0[transversal_index];
    const auto s = nodes(a, a + span, h, opt.refine_levels);

    std::vector<CurveSample> out;
    Vec w = st.reduced(x0);
    out.push_back({0.0, x0});
    for (std::size_t i = 1; i < s.size(); ++i) {
        Vec next;
        if (!st.step(s[i - 1], w, s[i] - s[i - 1], next)) {
            // partial samples stay in integration order: last() is where it stopped
            throw GlancingHalt("transversal component of V degenerates near x_n = " + std::to_string(s[i - 1]),
                               std::move(out));
        }
        w = std::move(next);
        out.push_back({w.back(), st.full(s[i], w)});
    }
    if (out.size() > 1 && out.front().t > out.back().t) std::reverse(out.begin(), out.end());
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i].t > out[i - 1].t)) throw std::logic_error("transversal_integrate: parameter not monotone");
    return out;
}

Vec sample_at(const std::vector<CurveSample>& curve, double t)
{
    if (curve.empty()) throw std::invalid_argument("sample_at: empty curve");
    if (t <= curve.front().t) return curve.front().q;
    if (t >= curve.back().t) return curve.back().q;
    const auto it = std::lower_bound(curve.begin(), curve.end(), t,
                                     [](const CurveSample& c, double v) { return c.t < v; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double u = (t - a.t) / (b.t - a.t);
    Vec q(a.q.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = a.q[i] + u * (b.q[i] - a.q[i]);
    return q;
}

std::string to_string(EventType e)
{
    switch (e) {
    case EventType::Reflection: return "reflection";
    case EventType::Transmission: return "transmission";
    case EventType::GlancingHalt: return "glancing-halt";
    }
    return "?";
}

std::vector<GBBPath> gbb_trace(const ham::ConormalMetric& metric, const ham::PhasePoint& q0, double t_span,
                               BranchPolicy policy, const TraceOptions& opt)
{
    if (metric.k() != 1) throw std::invalid_argument("gbb_trace: only k = 1 is supported");
    if (q0.x.size() != static_cast<std::size_t>(metric.n()) || q0.xi.size() != q0.x.size())
        throw std::invalid_argument("gbb_trace: phase point dimension does not match the metric");
    if (!(t_span > 0)) throw std::invalid_argument("gbb_trace: t_span must be positive");

    Tracer tr{metric, opt, policy, t_span, {}, {}};
    tr.field = [&metric](const Vec& w) { return pack(ham::hamilton_vector(metric, unpack(w))); };
    const Vec v = tr.field(pack(q0));
    if (!(std::abs(v[1]) >= opt.transversal.glancing_floor * norm(v)) || v[1] == 0)
        throw GlancingHalt("gbb_trace: initial point is glancing", {CurveSample{0.0, pack(q0)}});
    tr.branch(q0, 0.0, {}, 0);
    // depth-first: in tree mode the transmitted branch precedes the reflected one
    return tr.out;
}

Vec DyadicRun::at(double t) const
{
    if (points.empty()) throw std::logic_error("DyadicRun::at on an empty run");
    const double u = std::clamp(t / delta, 0.0, static_cast<double>(points.size() - 1));
    const auto j = std::min(static_cast<std::size_t>(u), points.size() - 2);
    const double f = u - static_cast<double>(j);
    Vec q(points[j].size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = points[j][i] + f * (points[j + 1][i] - points[j][i]);
    return q;
}

DyadicRun dyadic_construct(const Field& Hp, const FlowOracle& oracle, const Vec& q0, double eps_span, int N,
                           double C0, double alpha, double C_prime, Direction dir)
{
    if (N < 0 || N > 30) throw std::invalid_argument("dyadic_construct: N out of range");
    DyadicRun run;
    run.N = N;
    run.eps_span = eps_span;
    run.C0 = C0;
    run.alpha = alpha;
    run.direction = dir;
    run.delta = std::ldexp(eps_span, -N);
    run.lipschitz_bound = C_prime + C0 * std::pow(eps_span, alpha);
    const double sign = dir == Direction::Forward ? 1.0 : -1.0;
    const double radius = C0 * std::pow(run.delta, 1 + alpha);

    run.points.push_back(q0);
    const std::size_t steps = std::size_t{1} << N;
    for (std::size_t j = 0; j < steps; ++j) {
        const Vec& q = run.points.back();
        const Vec v = Hp(q);
        Vec next = oracle(q, run.delta);
        Vec off(q.size()), inc(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            off[i] = next[i] - (q[i] + sign * run.delta * v[i]);
            inc[i] = next[i] - q[i];
        }
        const double r = norm(off);
        if (r > radius * (1 + 1e-9))
            throw ContractViolation("dyadic_construct: oracle point at step " + std::to_string(j) + " is " +
                                    std::to_string(r / radius) + " radii from the ball center");
        run.max_ball_ratio = std::max(run.max_ball_ratio, r / radius);
        run.max_slope = std::max(run.max_slope, norm(inc) / run.delta);
        run.points.push_back(std::move(next));
    }
    run.lipschitz_ok = run.max_slope <= run.lipschitz_bound * (1 + 1e-12);
    return run;
}

Field hoelder_test_field(double alpha)
{
    return [alpha](const Vec& x) { return Vec{std::pow(std::abs(x[1]), alpha), 1.0}; };
}

Vec hoelder_test_flow(double alpha, const Vec& q, double t)
{
    auto G = [alpha](double u) { return sgn(u) * std::pow(std::abs(u), 1 + alpha) / (1 + alpha); };
    return {q[0] + G(q[1] + t) - G(q[1]), q[1] + t};
}

FlowOracle noisy_hoelder_oracle(double alpha, double noise, Direction dir, std::uint64_t seed)
{
    auto rng = std::make_shared<std::mt19937_64>(seed);
    const double sign = dir == Direction::Forward ? 1.0 : -1.0;
    return [=](const Vec& q, double delta) {
        std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
        const double th = angle(*rng);
        const double r = noise * std::pow(delta, 1 + alpha);
        Vec p = hoelder_test_flow(alpha, q, sign * delta);
        p[0] += r * std::cos(th);
        p[1] += r * std::sin(th);
        return p;
    };
}

}  // namespace cnl::trace
