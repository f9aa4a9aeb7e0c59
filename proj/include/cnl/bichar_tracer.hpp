#ifndef CNL_BICHAR_TRACER_HPP
#define CNL_BICHAR_TRACER_HPP

#include "cnl/hamiltonian_field.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnl::trace {

using ham::Vec;
using Field = std::function<Vec(const Vec&)>;

struct CurveSample {
    double t = 0;
    Vec q;
};

/// Raised when the transversal component of V degenerates. Carries the
/// samples computed so far, in integration order.
class GlancingHalt : public std::runtime_error {
public:
    GlancingHalt(const std::string& what, std::vector<CurveSample> partial)
        : std::runtime_error(what), partial_(std::move(partial))
    {
    }
    const std::vector<CurveSample>& partial() const { return partial_; }
    const CurveSample& last() const { return partial_.back(); }

private:
    std::vector<CurveSample> partial_;
};

struct TransversalOptions {
    double glancing_floor = 1e-6;  // halt when |V_n| < floor * |V|
    int refine_levels = 12;        // geometric halving of the steps next to z_n = 0
};

/// Integral curve of dx/dt = V(x) through x0, parametrized by s = x_n
/// (n = transversal_index): dz'/ds = V'/V_n, dT/ds = 1/V_n, classical RK4 on
/// s in [x0_n, x0_n + span]. Steps are laid on the lattice x0_n + j h; when the
/// range crosses z_n = 0 a node is placed there and the adjacent steps are
/// halved geometrically, since V is only Holder in x_n at that hypersurface.
/// Samples are returned with t strictly increasing.
std::vector<CurveSample> transversal_integrate(const Field& V, const Vec& x0, double span, double h,
                                               std::size_t transversal_index,
                                               const TransversalOptions& opt = {});

/// Linear interpolation of a sampled curve at parameter t (clamped to the ends).
Vec sample_at(const std::vector<CurveSample>& curve, double t);

enum class EventType { Reflection, Transmission, GlancingHalt };
std::string to_string(EventType e);

struct GBBEvent {
    double time = 0;
    ham::PhasePoint point;  // incoming point on Y
    EventType type = EventType::Reflection;
    Vec incoming;  // covector before
    Vec outgoing;  // covector after
};

struct PhaseSample {
    double t = 0;
    ham::PhasePoint q;
};

struct GBBPath {
    std::vector<std::vector<PhaseSample>> legs;
    std::vector<GBBEvent> events;
};

enum class BranchPolicy { Reflect, Transmit, Tree };

struct TraceOptions {
    double h = 1e-3;  // step in the normal coordinate x_1
    int max_events = 4;
    TransversalOptions transversal;
};

/// Generalized broken bicharacteristics of a k = 1 product metric from q0 over
/// Hamilton time [0, t_span]. Legs are integrated with x_1 as parameter; at
/// Y = {x_1 = 0} the normal covector is reflected (xi_1 -> -xi_1) or kept, and
/// projected back to the characteristic set. Tree returns one path per branch.
/// Throws GlancingHalt if q0 itself is glancing.
std::vector<GBBPath> gbb_trace(const ham::ConormalMetric& metric, const ham::PhasePoint& q0, double t_span,
                               BranchPolicy policy, const TraceOptions& opt = {});

/// Oracle for the dyadic construction: returns a point near q + direction*delta*H_p(q).
using FlowOracle = std::function<Vec(const Vec& q, double delta)>;

class ContractViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Direction { Forward, Backward };

struct DyadicRun {
    int N = 0;
    double eps_span = 0;
    double C0 = 0;
    double alpha = 0;
    double delta = 0;
    Direction direction = Direction::Forward;
    std::vector<Vec> points;  // 2^N + 1 points
    double max_ball_ratio = 0;      // max |q_{j+1} - center| / (C0 delta^{1+alpha})
    double max_slope = 0;           // max |q_{j+1} - q_j| / delta
    double lipschitz_bound = 0;     // C' + C0 eps^alpha
    bool lipschitz_ok = false;

    /// Piecewise-linear gamma_N(t), t in [0, eps_span].
    Vec at(double t) const;
};

/// C_prime bounds |H_p| along the run. Throws ContractViolation when the oracle
/// leaves the ball B(q_j +- delta H_p(q_j), C0 delta^{1+alpha}).
DyadicRun dyadic_construct(const Field& Hp, const FlowOracle& oracle, const Vec& q0, double eps_span, int N,
                           double C0, double alpha, double C_prime, Direction dir = Direction::Forward);

/// The planar test field V(x1, x2) = (|x2|^alpha, 1) and its exact flow
/// x1(t) = x1 + G(x2 + t) - G(x2), G(u) = sgn(u)|u|^{1+alpha}/(1+alpha).
Field hoelder_test_field(double alpha);
Vec hoelder_test_flow(double alpha, const Vec& q, double t);

/// Exact flow over +-delta plus a deterministic perturbation of norm
/// noise * delta^{1+alpha} (direction drawn from a seeded generator).
FlowOracle noisy_hoelder_oracle(double alpha, double noise, Direction dir, std::uint64_t seed);

}  // namespace cnl::trace

#endif
