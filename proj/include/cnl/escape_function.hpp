#ifndef CNL_ESCAPE_FUNCTION_HPP
#define CNL_ESCAPE_FUNCTION_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cnl::escape {

using Point = std::vector<double>;
using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Point(const Point&)>;

struct EscapeParams {
    double delta = 0.1;
    double eps = 1.0;
    double beta = 0.5;
    double F = 1.0;
    double c0 = 1.0;
    double C_prime = 1.0;
    double alpha = 1.0;
    double delta0 = 1.0;
    // When set, eps >= C_prime * delta^alpha is enforced by validate().
    bool schedule_active = false;

    void validate() const;
};

/// chi0(t) = exp(-1/t) for t > 0, else 0; chi1 is the smooth step
/// chi0(t) / (chi0(t) + chi0(1-t)).
struct CutoffPair {
    static double chi0(double t);
    static double chi0_prime(double t);
    static double chi1(double t);
    static double chi1_prime(double t);
    static double sqrt_chi1(double t);
};

/// Localizing functions on a chart around the base point: eta (flow
/// coordinate), sigma_j (transversal localizers), and the Hamilton vector
/// field. H_p f = df(V). Analytic H_p eta / H_p sigma_j may be registered;
/// otherwise derivatives fall back to Richardson-extrapolated central
/// differences along V.
class EscapeFrame {
public:
    EscapeFrame(std::string name, Point base, ScalarField eta, std::vector<ScalarField> sigma,
                VectorField hamilton);

    void set_analytic(ScalarField hp_eta, std::vector<ScalarField> hp_sigma);
    bool analytic() const { return static_cast<bool>(hp_eta_); }

    const std::string& name() const { return name_; }
    const Point& base_point() const { return base_; }
    std::size_t dim() const { return base_.size(); }
    std::size_t sigma_count() const { return sigma_.size(); }

    double eta(const Point& q) const { return eta_(q); }
    double sigma(std::size_t j, const Point& q) const { return sigma_[j](q); }
    double omega(const Point& q) const;
    Point hamilton(const Point& q) const { return hamilton_(q); }

    double hp_eta(const Point& q) const;
    double hp_sigma(std::size_t j, const Point& q) const;
    /// H_p omega = 2 sum sigma_j H_p sigma_j
    double hp_omega(const Point& q) const;

    /// Central difference of f along V with one Richardson step.
    double directional_fd(const ScalarField& f, const Point& q) const;

    /// Throws std::logic_error if the base-point normalization fails.
    void check_base(double tol = 1e-12) const;

private:
    std::string name_;
    Point base_;
    ScalarField eta_;
    std::vector<ScalarField> sigma_;
    VectorField hamilton_;
    ScalarField hp_eta_;
    std::vector<ScalarField> hp_sigma_;
};

// Coordinate frames on R^{2n-1} with base point 0, eta = q_0, sigma_j = q_{j+1}.
// All have H_p eta = c0.
EscapeFrame precise_localizer_frame(double c0, int n = 2);
/// H_p sigma_j = C0 * eta.
EscapeFrame smooth_frame(double c0, double C0, int n = 2);
/// Worst case of the Holder bound: H_p sigma_j = -sgn(sigma_j) C0 (omega^{1/2} + |eta|)^alpha,
/// which drives H_p omega as negative as the bound allows.
EscapeFrame hoelder_frame(double c0, double C0, double alpha, int n = 2);

double eval_phi(const Point& q, const EscapeFrame& frame, const EscapeParams& params);
double eval_a(const Point& q, const EscapeFrame& frame, const EscapeParams& params,
              const CutoffPair& cutoffs = {});

struct SupportViolation {
    std::size_t index;
    Point point;
    std::string reason;
};

struct SupportReport {
    std::size_t checked = 0;
    std::size_t in_support = 0;
    std::size_t on_step = 0;  // points where chi1' is active
    double max_radius = 0;    // max of omega^{1/2} + |eta| over supp a
    std::vector<SupportViolation> violations;

    bool ok() const { return violations.empty(); }
};

SupportReport check_support_estimates(const std::vector<Point>& samples, const EscapeFrame& frame,
                                      const EscapeParams& params, const CutoffPair& cutoffs = {});

struct Decomposition {
    double a = 0;
    double hp_a = 0;   // by forward-mode differentiation of a along V
    double hp_phi = 0;
    double b = 0;      // 0 when H_p phi < 0
    double b_squared = 0;  // signed: F^{-1} delta^{-1} H_p phi chi0'(.) chi1(.)
    double e = 0;
    double residual = 0;   // hp_a + b_squared - e
    bool positive = true;  // H_p phi >= 0 or a outside the support
};

Decomposition decompose_commutator(const Point& q, const EscapeFrame& frame,
                                   const EscapeParams& params, const CutoffPair& cutoffs = {});

double epsilon_schedule(double delta, double alpha, double C_prime);

/// C' making |H_p omega| / (eps^2 delta) <= c0/2 on supp a when
/// |H_p sigma_j| <= C0 (omega^{1/2} + |eta|)^alpha; m is the number of sigmas.
double hoelder_C_prime(double C0, double c0, double alpha, std::size_t m);

struct PositivityReport {
    double min_hp_phi = 0;
    double margin = 0;  // min_hp_phi - c0/2
    std::size_t in_support = 0;
    double C_prime_required = 0;
    bool schedule_satisfied = false;
    bool ok = false;    // margin >= 0
};

PositivityReport check_positivity(const EscapeFrame& frame, const EscapeParams& params, double C0,
                                  double alpha, const std::vector<Point>& samples,
                                  const CutoffPair& cutoffs = {});

/// psi2 - (((2s-1) - r_weight) rho_bound + M^2) F^{-1} delta (2 beta - phi/delta)^2,
/// psi2 = hp_phi - c0/4. Throws if |2 beta - phi/delta| > 4.
double absorption_factor(double s, double r_weight, double M, double F, double beta, double delta,
                         double phi_over_delta, double hp_phi, double rho_bound, double c0);

struct AbsorptionSample {
    double phi_over_delta;
    double hp_phi;
};

/// Least F on the grid for which the factor is >= c0/8 at every sample.
std::optional<double> find_F_threshold(double s, double r_weight, double M, double beta,
                                       double delta, double rho_bound, double c0,
                                       const std::vector<AbsorptionSample>& samples,
                                       const std::vector<double>& F_grid);

/// Geometric grid lo, lo*ratio, ... <= hi.
std::vector<double> geometric_grid(double lo, double hi, double ratio);

/// Tensor grid with per_axis points per coordinate on the box
/// |eta| <= 3 delta, |sigma_j| <= 3 eps delta, plus `halton` low-discrepancy points.
std::vector<Point> box_samples(const EscapeFrame& frame, const EscapeParams& params, int per_axis,
                               std::size_t halton = 0);

}  // namespace cnl::escape

#endif
