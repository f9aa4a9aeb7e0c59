#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cnl/hamiltonian_field.hpp"

#include <cmath>

using namespace cnl::ham;

namespace {

ConormalMetric profile(double s0, int k = 1, int n = 2, double amplitude = 1.0)
{
    ConormalMetric::Params p;
    p.k = k;
    p.n = n;
    p.s0 = s0;
    p.amplitude = amplitude;
    p.radius = 4.0;
    return ConormalMetric(p);
}

}  // namespace

TEST_CASE("metric construction")
{
    CHECK_THROWS(profile(2.0));
    CHECK_THROWS(profile(2.9, 2, 3));
    CHECK_NOTHROW(profile(3.5, 2, 3));
    const auto m = profile(2.5);
    CHECK(m.alpha() == doctest::Approx(0.5));
    CHECK(m.lorentzian_at({0, 0}));
    CHECK(m.y_timelike_at({0, 0}));
    CHECK(m.y_timelike_at({3, 0.3}));
}

TEST_CASE("dual_hamiltonian")
{
    const auto flat = ConormalMetric::minkowski();
    CHECK(dual_hamiltonian(flat, {{0, 0.3}, {1, 1}}) == 0.0);
    CHECK(on_characteristic_set(flat, {{0, 0.3}, {1, -1}}));
    CHECK_FALSE(on_characteristic_set(flat, {{0, 0.3}, {1, 0.5}}));

    // c(x) = 1 + |x|^{3/2} near 0
    const auto m = profile(2.5);
    auto p = [&](double x) { return dual_hamiltonian(m, {{0, x}, {1, 1}}); };
    for (double x : {-0.3, -1e-3, 0.0, 1e-3, 0.3}) {
        const double c = 1 + std::pow(std::abs(x), 1.5);
        CHECK(p(x) == doctest::Approx(1 - c * c).epsilon(1e-14));
    }
    // differentiable at 0
    for (double h : {1e-2, 1e-4, 1e-6}) CHECK(std::abs((p(h) - p(-h)) / (2 * h)) < 10 * std::sqrt(h));
    // second derivative blows up like |x|^{-1/2}: p'' ~ -2 * (3/4) |x|^{-1/2} near 0
    for (double x : {1e-2, 1e-4, 1e-6}) {
        const double h = x / 100;
        const double second = (p(x + h) - 2 * p(x) + p(x - h)) / (h * h);
        CHECK(second * std::sqrt(x) == doctest::Approx(-1.5).epsilon(0.02));
    }
}

TEST_CASE("hamilton_vector matches finite differences of p")
{
    ConormalMetric::Params prm;
    prm.k = 1;
    prm.n = 3;
    prm.s0 = 2.5;
    prm.amplitude = 0.4;
    prm.c_gradient = {0.1, -0.05};
    prm.radius = 1.5;
    const ConormalMetric m(prm);
    const PhasePoint q{{0.2, 0.37, -0.4}, {1.1, 0.6, -0.3}};
    const auto v = hamilton_vector(m, q);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
        auto a = q, b = q;
        a.xi[i] += h;
        b.xi[i] -= h;
        CHECK(v.x[i] == doctest::Approx((dual_hamiltonian(m, a) - dual_hamiltonian(m, b)) / (2 * h)).epsilon(1e-7));
        a = q;
        b = q;
        a.x[i] += h;
        b.x[i] -= h;
        CHECK(v.xi[i] == doctest::Approx(-(dual_hamiltonian(m, a) - dual_hamiltonian(m, b)) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("normal form, classification, related rays")
{
    ConormalMetric::Params prm;
    prm.k = 1;
    prm.n = 3;
    prm.s0 = 2.5;
    prm.amplitude = 0.3;
    prm.c_smooth = 2.0;
    const ConormalMetric m(prm);
    const auto nf = normal_form(m);
    validate_normal_form(nf, {{0, 0}, {1, 0.5}, {-2, 3}});

    const Vec y0{0, 0.1};
    const double c = 2.0;
    CHECK(classify_boundary_point(nf, y0, {1, 0}) == BoundaryClass::Hyperbolic);
    CHECK(classify_boundary_point(nf, y0, {c, 1}) == BoundaryClass::Glancing);
    CHECK_THROWS_AS(classify_boundary_point(nf, y0, {1, 1}), std::domain_error);
    for (double lambda : {1e-3, 0.5, 7.0, 1e4}) {
        CHECK(classify_boundary_point(nf, y0, {lambda, 0.2 * lambda}) == BoundaryClass::Hyperbolic);
        CHECK(classify_boundary_point(nf, y0, {c * lambda, lambda}) == BoundaryClass::Glancing);
    }

    const auto rays = related_rays(nf, y0, {1.0, 0.2});
    REQUIRE(rays.points.size() == 2);
    CHECK(rays.points[0].xi == -rays.points[1].xi);
    for (const auto& s : rays.points) {
        const auto q = from_split(s);
        CHECK(std::abs(dual_hamiltonian(m, q)) <= 1e-12);
        CHECK(compress(s).sigma == 0.0);
    }
    CHECK_THROWS_AS(related_rays(nf, y0, {c, 1}), std::domain_error);

    NormalFormCoeffs toy;
    toy.A = [](double, const Vec&) { return -1.0; };
    toy.B = [](double, const Vec&) { return Mat{{1.0}}; };
    toy.C = [](double, const Vec&) { return Vec{0.0}; };
    CHECK(related_rays(toy, {0}, {1}).normal_momentum == doctest::Approx(1.0));
    toy.A = [](double, const Vec&) { return -4.0; };
    CHECK(related_rays(toy, {0}, {1}).normal_momentum == doctest::Approx(0.5));
    toy.B = [](double, const Vec&) { return Mat{{0.0}}; };
    CHECK_THROWS(related_rays(toy, {0}, {1}));
}

TEST_CASE("compress")
{
    const SplitPoint at_y{0.0, {0.3, 1.0}, 2.5, {1.0, -0.5}};
    const auto b0 = compress(at_y);
    CHECK(b0.sigma == 0.0);
    CHECK(b0.y == at_y.y);
    CHECK(b0.eta == at_y.eta);
    const SplitPoint off{1.0, {0.3}, 2.5, {1.0}};
    CHECK(compress(off).sigma == 2.5);
    const SplitPoint q{0.7, {0.3}, 2.0, {1.0}};
    auto q2 = q;
    q2.xi *= 3;
    CHECK(compress(q2).sigma == doctest::Approx(3 * compress(q).sigma));
    auto r = at_y;
    r.xi = -r.xi;
    CHECK(compress(r).sigma == compress(at_y).sigma);
    // split round trip
    const PhasePoint p{{1, 2, 3}, {4, 5, 6}};
    const auto back = from_split(to_split(p));
    CHECK(back.x == p.x);
    CHECK(back.xi == p.xi);
}

TEST_CASE("holder_estimate")
{
    const auto scales = dyadic_scales(4, 14);
    const auto sq = holder_estimate([](double x) { return std::sqrt(std::abs(x)); }, -1, 1, scales);
    CHECK(sq.alpha_hat == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(sq.alpha_hat - 0.5) <= 0.05);
    CHECK_FALSE(sq.lipschitz_or_better);

    const auto smooth = holder_estimate([](double x) { return std::sin(3 * x); }, -1, 1, scales);
    CHECK(smooth.lipschitz_or_better);
    CHECK(smooth.alpha_hat >= 1.0);

    CHECK_THROWS(holder_estimate([](double x) { return x; }, -1, 1, dyadic_scales(3, 4)));

    // H_p of the s0 = 5/2, k = 1 profile: the xi-component carries c'(x) ~ |x|^{1/2}
    const auto m = profile(2.5);
    const auto hp = holder_estimate(
        [&](double x) { return hamilton_vector(m, {{0, x}, {1, 1}}).xi[1]; }, -0.5, 0.5, scales);
    CHECK(std::abs(hp.alpha_hat - 0.5) <= 0.1);
}

TEST_CASE("first derivatives of the coefficients are C^{0, s0-k-1}")
{
    struct Case {
        double s0;
        int k, n;
    };
    for (const auto& cs : {Case{2.3, 1, 2}, Case{2.5, 1, 2}, Case{2.8, 1, 3}, Case{3.4, 2, 3}, Case{3.7, 2, 4}}) {
        const auto m = profile(cs.s0, cs.k, cs.n);
        const auto scales = dyadic_scales(4, 11);
        for (int j = 0; j < cs.n - 1; ++j) {
            // d/dx_j of G^{jj} = -c^2
            auto f = [&](const Vec& xs) {
                const double c = m.speed(xs);
                return -2 * c * m.speed_gradient(xs)[j];
            };
            const auto h = holder_estimate(f, Vec(cs.n - 1, 0.0), 0.5, scales);
            CHECK_MESSAGE(h.alpha_hat >= m.alpha() - 0.1, "s0=" << cs.s0 << " k=" << cs.k << " j=" << j
                                                                << " alpha_hat=" << h.alpha_hat);
        }
    }
}
