#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cnl/bichar_tracer.hpp"

#include <cmath>

using namespace cnl;
using namespace cnl::trace;

namespace {

double closed_form_x1(double alpha, double t)
{
    return (t > 0 ? 1.0 : -1.0) * std::pow(std::abs(t), 1 + alpha) / (1 + alpha);
}

ham::ConormalMetric conormal(double s0, int n = 2, double amplitude = 0.5)
{
    ham::ConormalMetric::Params p;
    p.k = 1;
    p.n = n;
    p.s0 = s0;
    p.amplitude = amplitude;
    p.radius = 2.0;
    return ham::ConormalMetric(p);
}

double xi_norm2(const ham::PhasePoint& q)
{
    double s = 0;
    for (double v : q.xi) s += v * v;
    return s;
}

}  // namespace

TEST_CASE("constant field gives a straight line")
{
    const auto curve = transversal_integrate([](const Vec&) { return Vec{0.0, 1.0}; }, {0.3, -1.0}, 2.0, 0.01, 1);
    for (const auto& s : curve) {
        CHECK(s.q[0] == doctest::Approx(0.3));
        CHECK(s.q[1] == doctest::Approx(-1.0 + s.t).epsilon(1e-13));
    }
    CHECK(curve.back().t == doctest::Approx(2.0));
}

TEST_CASE("Holder field closed form")
{
    for (double alpha : {0.3, 0.5, 0.8}) {
        const auto V = hoelder_test_field(alpha);
        double worst = 0;
        for (double span : {0.7, -0.7}) {
            const auto curve = transversal_integrate(V, {0.0, 0.0}, span, 1e-4, 1);
            for (const auto& s : curve) {
                const double t = s.q[1];  // x2(t) = t
                worst = std::max(worst, std::abs(s.q[0] - closed_form_x1(alpha, t)));
                REQUIRE(std::abs(s.t - t) < 1e-12);
            }
        }
        CHECK_MESSAGE(worst <= 1e-6, "alpha=" << alpha << " err=" << worst);
    }
}

TEST_CASE("uniqueness through the interface")
{
    const double alpha = 0.5;
    const auto V = hoelder_test_field(alpha);
    auto minusV = [&](const Vec& x) {
        auto v = V(x);
        for (double& c : v) c = -c;
        return v;
    };
    const Vec x0{0.1, -0.5};
    const auto fwd = transversal_integrate(V, x0, 1.0, 1e-4, 1);
    const auto bwd = transversal_integrate(minusV, fwd.back().q, -1.0, 1e-4, 1);
    CHECK(std::abs(bwd.back().q[0] - x0[0]) < 1e-8);
    CHECK(std::abs(bwd.back().q[1] - x0[1]) < 1e-12);
    // the whole curve agrees
    double worst = 0;
    for (const auto& s : bwd) {
        const auto f = sample_at(fwd, 1.0 - s.t);
        worst = std::max(worst, std::abs(f[0] - s.q[0]));
    }
    CHECK(worst < 1e-8);

    // restarting from an interior sample reproduces the tail
    const auto& mid = fwd[fwd.size() / 3];
    const auto tail = transversal_integrate(V, mid.q, 0.5 - mid.q[1], 1e-4, 1);
    CHECK(std::abs(tail.back().q[0] - fwd.back().q[0]) < 1e-8);
}

TEST_CASE("empirical order under step halving")
{
    const double alpha = 0.5;
    // state-dependent field so the reparametrized system is a genuine ODE
    auto V = [alpha](const Vec& x) { return Vec{std::pow(std::abs(x[1]), alpha) + 0.3 * std::sin(x[0]), 1.0}; };
    std::vector<double> diffs;
    std::vector<double> hs{0.02, 0.01, 0.005, 0.0025};
    TransversalOptions opt;
    opt.refine_levels = 0;
    std::vector<double> ends;
    for (double h : hs) ends.push_back(transversal_integrate(V, {0.0, -0.5}, 1.0, h, 1, opt).back().q[0]);
    for (std::size_t i = 1; i < ends.size(); ++i) diffs.push_back(std::abs(ends[i] - ends[i - 1]));
    const double order = std::log2(diffs[0] / diffs.back()) / static_cast<double>(diffs.size() - 1);
    MESSAGE("empirical order without refinement: " << order);
    CHECK(order >= std::min(1.0, alpha) + 1 - 0.2);
}

TEST_CASE("glancing halt")
{
    auto V = [](const Vec& x) { return Vec{1.0, x[1]}; };
    try {
        transversal_integrate(V, {0.0, 1.0}, -2.0, 1e-3, 1);
        FAIL("expected GlancingHalt");
    } catch (const GlancingHalt& g) {
        CHECK(g.partial().size() > 1);
        CHECK(std::abs(g.last().q[1]) < 1e-2);
    }
}

TEST_CASE("gbb_trace: flat metric")
{
    const auto flat = ham::ConormalMetric::minkowski(2);
    const ham::PhasePoint q0{{0.0, 2.0}, {1.0, 1.0}};
    const auto paths = gbb_trace(flat, q0, 0.5, BranchPolicy::Tree, {1e-3, 4, {}});
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].events.empty());
    REQUIRE(paths[0].legs.size() == 1);
    for (const auto& s : paths[0].legs[0]) {
        CHECK(s.q.x[0] == doctest::Approx(2 * s.t));
        CHECK(s.q.x[1] == doctest::Approx(2.0 - 2 * s.t));
    }
}

TEST_CASE("gbb_trace: normal incidence on the conormal interface")
{
    const auto m = conormal(2.5);
    const double x1 = 1.0;
    const double c = m.speed({x1});
    const ham::PhasePoint q0{{0.0, x1}, {1.0, 1.0 / c}};  // moving toward Y
    REQUIRE(std::abs(ham::dual_hamiltonian(m, q0)) < 1e-14);
    const auto paths = gbb_trace(m, q0, 1.0, BranchPolicy::Tree, {1e-3, 4, {}});
    REQUIRE(paths.size() == 2);
    std::vector<double> outgoing;
    for (const auto& p : paths) {
        REQUIRE(p.events.size() == 1);
        const auto& ev = p.events[0];
        CHECK(ev.point.x[1] == 0.0);
        CHECK(ev.incoming[0] == ev.outgoing[0]);  // tau
        // the incoming covector carries the integration drift, the outgoing one is projected onto Sigma
        CHECK(std::abs(std::abs(ev.outgoing[1]) - std::abs(ev.incoming[1])) <= 1e-6 * std::abs(ev.incoming[1]));
        CHECK(std::abs(ham::dual_hamiltonian(m, {ev.point.x, ev.outgoing})) <= 1e-12);
        outgoing.push_back(ev.outgoing[1]);
        REQUIRE(p.legs.size() == 2);
        CHECK(p.legs[1].front().q.x[0] == doctest::Approx(p.legs[0].back().q.x[0]).epsilon(1e-12));
        for (const auto& leg : p.legs)
            for (const auto& s : leg) {
                REQUIRE(std::abs(ham::dual_hamiltonian(m, s.q)) <= 1e-8 * xi_norm2(s.q));
                REQUIRE(std::abs(s.q.xi[0] - 1.0) <= 1e-10);
            }
        CHECK(p.legs.back().back().t == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(outgoing[0] == doctest::Approx(-outgoing[1]));

    const auto refl = gbb_trace(m, q0, 1.0, BranchPolicy::Reflect, {1e-3, 4, {}});
    REQUIRE(refl.size() == 1);
    CHECK(refl[0].events[0].type == EventType::Reflection);
    CHECK(refl[0].legs.back().back().q.x[1] > 0);
    const auto trans = gbb_trace(m, q0, 1.0, BranchPolicy::Transmit, {1e-3, 4, {}});
    CHECK(trans[0].events[0].type == EventType::Transmission);
    CHECK(trans[0].legs.back().back().q.x[1] < 0);
}

TEST_CASE("gbb_trace: oblique incidence keeps (y, eta) and reflects only xi_1")
{
    const auto m = conormal(2.5, 3, 0.3);
    const double x1 = 0.6;
    const double c = m.speed({x1, 0});
    const double xi2 = 0.4;
    const double xi1 = std::sqrt(1.0 / (c * c) - xi2 * xi2);
    const ham::PhasePoint q0{{0.0, x1, 0.0}, {1.0, xi1, xi2}};
    const auto paths = gbb_trace(m, q0, 0.8, BranchPolicy::Reflect, {1e-3, 4, {}});
    REQUIRE(paths.size() == 1);
    REQUIRE(paths[0].events.size() == 1);
    const auto& ev = paths[0].events[0];
    CHECK(ev.incoming[0] == ev.outgoing[0]);
    CHECK(ev.incoming[2] == ev.outgoing[2]);
    CHECK(ev.outgoing[1] * ev.incoming[1] < 0);
    const auto& after = paths[0].legs[1].front().q;
    CHECK(after.x[0] == ev.point.x[0]);
    CHECK(after.x[2] == ev.point.x[2]);
    for (const auto& leg : paths[0].legs)
        for (const auto& s : leg) REQUIRE(std::abs(ham::dual_hamiltonian(m, s.q)) <= 1e-8 * xi_norm2(s.q));
}

TEST_CASE("gbb_trace: glancing")
{
    const auto m = conormal(2.5, 3, 0.3);
    // on Y with zero normal momentum
    const ham::PhasePoint on_y{{0.0, 0.0, 0.0}, {1.0, 0.0, 1.0}};
    CHECK_THROWS_AS(gbb_trace(m, on_y, 1.0, BranchPolicy::Tree), GlancingHalt);

    // nearly tangential ray moving away from Y turns back where xi_1 vanishes
    const double x1 = 0.05;
    const double c = m.speed({x1, 0});
    const double xi1 = 0.02;
    const double xi2 = std::sqrt(1.0 / (c * c) - xi1 * xi1);
    const ham::PhasePoint q0{{0.0, x1, 0.0}, {1.0, -xi1, xi2}};
    const auto paths = gbb_trace(m, q0, 5.0, BranchPolicy::Reflect, {1e-4, 4, {}});
    REQUIRE(paths.size() == 1);
    REQUIRE_FALSE(paths[0].events.empty());
    CHECK(paths[0].events.back().type == EventType::GlancingHalt);
}

TEST_CASE("dyadic construction: zero noise on a constant field")
{
    const Field Hp = [](const Vec&) { return Vec{1.0, 2.0}; };
    const FlowOracle exact = [](const Vec& q, double d) { return Vec{q[0] + d, q[1] + 2 * d}; };
    const auto run = dyadic_construct(Hp, exact, {0, 0}, 1.0, 6, 0.1, 0.5, std::sqrt(5.0));
    CHECK(run.points.size() == 65);
    CHECK(run.lipschitz_ok);
    CHECK(run.max_ball_ratio < 1e-9);
    for (std::size_t j = 0; j < run.points.size(); ++j) {
        CHECK(run.points[j][0] == doctest::Approx(j * run.delta));
        CHECK(run.points[j][1] == doctest::Approx(2 * j * run.delta));
    }
    const auto mid = run.at(0.3);
    CHECK(mid[1] == doctest::Approx(0.6));

    const FlowOracle bad = [](const Vec& q, double d) { return Vec{q[0] + d + 0.5, q[1] + 2 * d}; };
    CHECK_THROWS_AS(dyadic_construct(Hp, bad, {0, 0}, 1.0, 4, 0.1, 0.5, 3.0), ContractViolation);
}

TEST_CASE("dyadic construction converges on the Holder field, both directions")
{
    const double alpha = 0.5, noise = 0.5;
    const double C0 = 1.0 / (1 + alpha) + noise;
    const auto V = hoelder_test_field(alpha);
    for (auto dir : {Direction::Backward, Direction::Forward}) {
        const Vec q0{0.0, dir == Direction::Backward ? 0.3 : -0.3};
        auto W = [&](const Vec& x) {
            auto v = V(x);
            if (dir == Direction::Backward)
                for (double& c : v) c = -c;
            return v;
        };
        const auto ref = transversal_integrate(W, q0, dir == Direction::Backward ? -1.0 : 1.0, std::ldexp(1.0, -14), 1);
        std::vector<double> lx, ly;
        for (int N = 4; N <= 10; ++N) {
            const auto run = dyadic_construct(V, noisy_hoelder_oracle(alpha, noise, dir, 42 + N), q0, 1.0, N, C0,
                                              alpha, 1.0, dir);
            REQUIRE(run.lipschitz_ok);
            double err = 0;
            for (const auto& s : ref) {
                const auto g = run.at(s.t);
                err = std::max(err, std::hypot(g[0] - s.q[0], g[1] - s.q[1]));
            }
            lx.push_back(std::log(run.delta));
            ly.push_back(std::log(err));
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i] / lx.size();
            my += ly[i] / ly.size();
        }
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        MESSAGE("rate " << sxy / sxx);
        CHECK(sxy / sxx >= alpha - 0.15);
    }
}
