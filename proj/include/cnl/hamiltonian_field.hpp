#ifndef CNL_HAMILTONIAN_FIELD_HPP
#define CNL_HAMILTONIAN_FIELD_HPP

#include <functional>
#include <string>
#include <vector>

namespace cnl::ham {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

/// Coordinates (t, x_1, ..., x_{n-1}) and dual (tau, xi_1, ..., xi_{n-1}).
struct PhasePoint {
    Vec x;
    Vec xi;
};

/// Product metric g = dt^2 - c(x)^{-2} |dx|^2 with sound speed
///
///   c(x) = c_smooth + grad . x + amplitude * |x'|^{s0-k} * psi(|x'| / radius),
///
/// x' = (x_1, ..., x_k), Y = {x' = 0}, psi a smooth cutoff equal to 1 on [0, 1/2]
/// and 0 on [1, inf). The dual metric is p = tau^2 - c^2 |xi|^2.
class ConormalMetric {
public:
    struct Params {
        int k = 1;
        int n = 2;  // ambient dimension including t
        double s0 = 2.5;
        double c_smooth = 1.0;
        Vec c_gradient;  // spatial gradient of the smooth part; empty = 0
        double amplitude = 0.5;
        double radius = 1.0;
    };

    explicit ConormalMetric(Params p);

    /// Flat metric (no singular part); s0 is unused.
    static ConormalMetric minkowski(int n = 2);

    const Params& params() const { return p_; }
    int k() const { return p_.k; }
    int n() const { return p_.n; }
    double s0() const { return p_.s0; }
    /// s0 - k - 1: first derivatives of the coefficients are C^{0,alpha}.
    double alpha() const { return alpha_; }
    bool flat() const { return flat_; }

    /// Sound speed at spatial point xs (size n-1).
    double speed(const Vec& xs) const;
    /// Spatial gradient of the sound speed.
    Vec speed_gradient(const Vec& xs) const;
    /// Singular part alone (amplitude * profile * cutoff), for diagnostics.
    double singular_part(const Vec& xs) const;

    /// G^{ij}: diag(1, -c^2, ..., -c^2) at space-time point x.
    Mat dual_metric(const Vec& x) const;

    /// Signature (1, n-1) and negative definiteness of G on N*Y at x.
    bool lorentzian_at(const Vec& x) const;
    bool y_timelike_at(const Vec& x) const;

private:
    Params p_;
    double alpha_ = 0;
    bool flat_ = false;
};

double dual_hamiltonian(const ConormalMetric& m, const PhasePoint& q);
bool on_characteristic_set(const ConormalMetric& m, const PhasePoint& q, double tol = 1e-9);

/// H_p = (dp/dxi, -dp/dx).
PhasePoint hamilton_vector(const ConormalMetric& m, const PhasePoint& q);

/// Dual metric in the split (x, y) coordinates near Y for k = 1:
/// G = A dx^2 + 2 C_j dx dy_j + B^{ij} dy_i dy_j.
struct NormalFormCoeffs {
    std::function<double(double, const Vec&)> A;
    std::function<Mat(double, const Vec&)> B;
    std::function<Vec(double, const Vec&)> C;
};

/// Product metric with k = 1: x = x_1, y = (t, x_2, ...), A = -c^2,
/// B = diag(1, -c^2, ...), C = 0.
NormalFormCoeffs normal_form(const ConormalMetric& m);

/// Checks C(0,y) = 0, A(0,y) < 0 and B(0,y) Lorentzian at each y; throws std::logic_error.
void validate_normal_form(const NormalFormCoeffs& nf, const std::vector<Vec>& ys, double tol = 1e-12);

/// Split coordinates (x, y; xi, eta) for k = 1.
struct SplitPoint {
    double x = 0;
    Vec y;
    double xi = 0;
    Vec eta;
};

SplitPoint to_split(const PhasePoint& q);
PhasePoint from_split(const SplitPoint& s);

/// b-covector (x, y, sigma, eta).
struct BCovector {
    double x = 0;
    Vec y;
    double sigma = 0;
    Vec eta;
};

/// (x, y, xi, eta) -> (x, y, x*xi, eta).
BCovector compress(const SplitPoint& s);

enum class BoundaryClass { Hyperbolic, Glancing };
std::string to_string(BoundaryClass c);

/// eta0 is normalized to unit length before comparing B eta.eta with tol.
/// Throws std::domain_error when B eta.eta < -tol.
BoundaryClass classify_boundary_point(const NormalFormCoeffs& nf, const Vec& y0, const Vec& eta0,
                                      double tol = 1e-9);

struct RelatedRays {
    int k = 1;
    /// Normal momentum magnitude sqrt(-B eta.eta / A).
    double normal_momentum = 0;
    /// k = 1: the two points (0, y0, +-xi, eta0).
    std::vector<SplitPoint> points;
};

/// Throws std::domain_error for glancing input.
RelatedRays related_rays(const NormalFormCoeffs& nf, const Vec& y0, const Vec& eta0, double tol = 1e-9);

struct HolderFit {
    double alpha_hat = 0;
    double C_hat = 0;
    double raw_slope = 0;
    bool lipschitz_or_better = false;
    std::vector<double> scales;
    std::vector<double> oscillation;
};

/// Oscillation sup |f(x+h) - f(x)| on [lo, hi] per scale h, probed on a lattice of
/// spacing h/4, then a log-log least-squares fit. A slope >= 0.98 is reported as
/// Lipschitz-or-better with alpha_hat = 1. Throws for fewer than 3 scales.
HolderFit holder_estimate(const std::function<double(double)>& f, double lo, double hi,
                          const std::vector<double>& probe_scales);

/// Ball version: probes along the coordinate axes and the main diagonals
/// through the center; the oscillation is the max over all probe lines.
HolderFit holder_estimate(const std::function<double(const Vec&)>& f, const Vec& center, double radius,
                          const std::vector<double>& probe_scales);

/// 2^{-lo}, ..., 2^{-hi}.
std::vector<double> dyadic_scales(int lo, int hi);

}  // namespace cnl::ham

#endif
