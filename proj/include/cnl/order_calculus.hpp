#ifndef CNL_ORDER_CALCULUS_HPP
#define CNL_ORDER_CALCULUS_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

namespace cnl::order {

// Every quantity in this module is an exact rational. All predicates are
// affine in their inputs, so they are decided with zero tolerance.
using Rational = boost::rational<std::int64_t>;

Rational parse_rational(std::string_view text);
std::string to_string(const Rational& r);
Rational half(std::int64_t k);
std::int64_t ceil(const Rational& r);

/// Orders (p, l) of a paired Lagrangian space I^{p,l}(Λ0, Λ1): p is the order on
/// the main Lagrangian Λ1, l the relative order at Λ0. k is the codimension
/// parameter that enters the Sobolev predicates (the intersection codimension
/// for pairs near the diagonal, codim Y for the one-sided conormal pairs).
struct PairOrder {
    Rational p;
    Rational l;
    int k = 1;

    PairOrder() = default;
    PairOrder(Rational p_, Rational l_, int k_);

    friend bool operator==(const PairOrder&, const PairOrder&) = default;
};

std::string to_string(const PairOrder& o);

enum class LagrangianTag { Diag, FlowOut, LeftConormal, RightConormal, ConormalY };
enum class LagrangianRole { Main, Relative };

struct LagrangianId {
    LagrangianTag tag;
    LagrangianRole role;
    friend bool operator==(const LagrangianId&, const LagrangianId&) = default;
};

std::string to_string(LagrangianTag tag);

/// I^{p,l}(relative, main).
struct PairedTerm {
    LagrangianId relative;
    LagrangianId main;
    PairOrder order;
};

/// I^m(lagrangian).
struct PureTerm {
    LagrangianId lagrangian;
    Rational order;
};

/// Only the Lagrangian pairs of the near-diagonal and one-sided models are allowed.
bool well_formed(const PairedTerm& term);

struct SpaceDecomposition {
    std::vector<PairedTerm> paired;
    std::vector<PureTerm> pure;

    bool empty() const { return paired.empty() && pure.empty(); }
};

std::string to_string(const SpaceDecomposition& d);

enum class Relation { Less, LessEq };

/// One evaluated affine inequality `lhs rel rhs`.
struct Inequality {
    std::string label;
    Rational lhs;
    Relation rel;
    Rational rhs;
    bool holds = false;
};

Inequality make_inequality(std::string label, Rational lhs, Relation rel, Rational rhs);
std::string to_string(const Inequality& ineq);

/// Conjunction of inequalities, kept for reporting.
struct Verdict {
    bool holds = true;
    std::vector<Inequality> witnesses;

    void add(Inequality ineq);
    std::string describe() const;
    /// Labels of the failing inequalities, "; "-separated.
    std::string violated() const;
};

class IncomparableOrders : public std::invalid_argument {
public:
    explicit IncomparableOrders(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised by compose_flowout when l + l' >= 0. The caller can opt into the
/// weaker composition that trades Λ0-order for Λ1-order.
class CompositionConstraintError : public std::domain_error {
public:
    CompositionConstraintError(PairOrder a, PairOrder b);

    const PairOrder& left() const { return a_; }
    const PairOrder& right() const { return b_; }

    /// Result for any ell > l + l'.
    PairOrder fallback(const Rational& ell) const;

private:
    PairOrder a_;
    PairOrder b_;
};

// -- inclusions and embeddings -------------------------------------------

/// I^{a.p,a.l} ⊂ I^{b.p,b.l}.
bool include_filter(const PairOrder& a, const PairOrder& b);
Verdict include_filter_verdict(const PairOrder& a, const PairOrder& b);

/// I^p(Λ0) ⊂ I^{p-k/2,k/2}(Λ0,Λ1). The Λ1-order p - k/2 cannot be lowered further.
PairOrder embed_lambda0(const Rational& p, int k);

/// Reverse the order of the pair. At l == -k/2 exactly the order is perturbed to
/// l + eps first, which avoids the logarithmic loss at the boundary.
SpaceDecomposition reverse_pair(const PairOrder& o, const Rational& eps);

// -- compositions --------------------------------------------------------

/// Flow-out composition with N*diag as Λ0: (p+p'+k/2, l+l'-k/2).
PairOrder compose_au(const PairOrder& a, const PairOrder& b);

/// Composition with Λ1 = N*diag main; requires l + l' < 0.
PairOrder compose_flowout(const PairOrder& a, const PairOrder& b);

enum class Side { Left, Right };

/// Pseudodifferential operator of order s applied from the left (raises p) or
/// the right (raises l) of a one-sided pair.
PairOrder psdo_shift(const PairOrder& o, const Rational& s, Side side);

/// Principal symbol cancellation on N*diag when a coefficient is commuted
/// through: one order less on Λ1, the Λ0-order p+l unchanged.
PairOrder drop_main_order(const PairOrder& o);

// -- boundedness predicates ---------------------------------------------
// m_src is the source Sobolev order and m_dst the target: H^{m_src} -> H^{m_dst}.

/// Pair (Λ1, Λ0) with Λ0 the flow-out; both inequalities non-strict.
bool bounded_gu(const PairOrder& o, const Rational& m_src, const Rational& m_dst);
Verdict bounded_gu_verdict(const PairOrder& o, const Rational& m_src, const Rational& m_dst);

/// Pair (Λ0, Λ1) with Λ1 = N*diag main; second inequality strict.
bool bounded_diag_flowout(const PairOrder& o, const Rational& m_src, const Rational& m_dst);
Verdict bounded_diag_flowout_verdict(const PairOrder& o, const Rational& m_src,
                                     const Rational& m_dst);

/// One-sided pair, mapping H^{m_src} -> H^{-m}. Left: Λ1 = N*{x'=0}; Right: Λ1 = N*{y'=0}.
bool bounded_one_sided(const PairOrder& o, int n, const Rational& m, const Rational& m_src,
                       Side side);
Verdict bounded_one_sided_verdict(const PairOrder& o, int n, const Rational& m,
                                  const Rational& m_src, Side side);

/// A pure I^p(Λ0) kernel on the one-sided flow-out, H^{m_src} -> H^{-m}. Embeds
/// into the one-sided pair (intersection codimension n) and applies
/// bounded_one_sided with the codim-Y parameter k.
Verdict bounded_one_sided_lagrangian(const Rational& p, int k, int n, const Rational& m,
                                     const Rational& m_src, Side side);

// -- multiplication by conormal coefficients ----------------------------

/// Kernel of f·A, f ∈ I^{[-s0]}(Y), A ∈ Ψ^{op_order}: a diagonal pair and a
/// one-sided conormal pair.
SpaceDecomposition mult_decompose(const Rational& s0, const Rational& op_order, int k, int n);

/// A window (lo, hi) of Sobolev orders; nullopt endpoints are infinite.
struct RegularityWindow {
    std::optional<Rational> lo;
    std::optional<Rational> hi;
    bool admissible = false;
    Rational s0{0};
    Rational eps0{0};
    int k = 1;
    int n = 0;
    Verdict gate;

    bool empty() const;
    bool contains(const Rational& s) const;
    /// Set inclusion of open intervals; empty windows are contained in everything.
    bool subset_of(const RegularityWindow& other) const;
};

std::string to_string(const RegularityWindow& w);

RegularityWindow mult_bounded_range(const Rational& s0, int k);
RegularityWindow elliptic_window(const Rational& s0, const Rational& eps0, int k);

struct HyperbolicWindow {
    RegularityWindow theorem;       // (-k/2, s0 - eps0 - 1 - k/2)
    RegularityWindow derived;       // (-s0 + eps0 + 1 + k/2, s0 - eps0 - 1 - k/2)
    RegularityWindow intersected;   // theorem ∩ derived
};

HyperbolicWindow hyperbolic_window(const Rational& s0, const Rational& eps0, int k);

struct ConstraintChainReport {
    Verdict raw;        // the three pre-reduction inequalities
    Verdict reduced;    // k+1+2eps0 < s0, s > -s0+eps0+1+k/2, s < s0-eps0-1-k/2
    Verdict reduction;  // s0 > k, -s0+k/2 < s-1 < s0-k/2
    bool raw_matches_reduced = false;
    /// reduced => reduction
    bool reduction_implied = false;
    /// s > -k/2 and first reduced inequality => second reduced inequality
    bool second_automatic = false;

    bool consistent() const { return raw_matches_reduced && reduction_implied && second_automatic; }
};

ConstraintChainReport verify_constraint_chain(const Rational& s0, const Rational& eps0,
                                              const Rational& s, int k, int n);

/// Boundedness H^{s-eps0} -> H^{-s+eps0} of every term of the commutator of the
/// conormal-coefficient operator with A ∈ Ψ^{2s-1}, away from N*diag.
struct CommutatorCheck {
    std::string term;
    PairOrder order;
    Verdict verdict;
};

struct CommutatorChainReport {
    std::vector<CommutatorCheck> checks;
    bool all_bounded() const;
};

CommutatorChainReport hyperbolic_commutator_chain(const Rational& s0, const Rational& eps0,
                                                  const Rational& s, int k, int n);

/// Orders s^(1) < s^(2) < ... = s_target raised by 1/2 per step, starting from
/// the a-priori order s_target - eps0.
std::vector<Rational> bootstrap_schedule(const Rational& s_target, const Rational& eps0);
/// Same, with the a-priori order given explicitly; it must equal s_target - eps0.
std::vector<Rational> bootstrap_schedule(const Rational& s_prior, const Rational& s_target,
                                         const Rational& eps0);

}  // namespace cnl::order

#endif
