#include "cnl/order_calculus.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace cnl::order {

namespace {

std::int64_t parse_int(std::string_view text)
{
    std::int64_t value = 0;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || text.empty())
        throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
    return value;
}

void require_same_k(const PairOrder& a, const PairOrder& b, const char* op)
{
    if (a.k != b.k)
        throw IncomparableOrders(std::string(op) + ": codimension mismatch (" + std::to_string(a.k) +
                                 " vs " + std::to_string(b.k) + ")");
}

const char* relation_symbol(Relation rel) { return rel == Relation::Less ? "<" : "<="; }

}  // namespace

Rational parse_rational(std::string_view text)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return Rational(parse_int(text));
    const auto den = parse_int(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    return Rational(parse_int(text.substr(0, slash)), den);
}

std::string to_string(const Rational& r)
{
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Rational half(std::int64_t k) { return Rational(k, 2); }

std::int64_t ceil(const Rational& r)
{
    const auto num = r.numerator();
    const auto den = r.denominator();  // always positive after normalization
    auto q = num / den;
    if (num % den != 0 && num > 0) ++q;
    return q;
}

PairOrder::PairOrder(Rational p_, Rational l_, int k_) : p(p_), l(l_), k(k_)
{
    if (k < 1) throw std::invalid_argument("PairOrder: codimension k must be >= 1");
}

std::string to_string(const PairOrder& o)
{
    return "(" + to_string(o.p) + ", " + to_string(o.l) + "; k=" + std::to_string(o.k) + ")";
}

std::string to_string(LagrangianTag tag)
{
    switch (tag) {
    case LagrangianTag::Diag: return "N*diag";
    case LagrangianTag::FlowOut: return "flow-out";
    case LagrangianTag::LeftConormal: return "N*(Y x X)";
    case LagrangianTag::RightConormal: return "N*(X x Y)";
    case LagrangianTag::ConormalY: return "N*Y";
    }
    return "?";
}

bool well_formed(const PairedTerm& term)
{
    if (term.relative.role != LagrangianRole::Relative || term.main.role != LagrangianRole::Main)
        return false;
    const auto r = term.relative.tag;
    const auto m = term.main.tag;
    if (r == LagrangianTag::FlowOut)
        return m == LagrangianTag::Diag || m == LagrangianTag::LeftConormal ||
               m == LagrangianTag::RightConormal;
    // reversed near-diagonal pair
    return r == LagrangianTag::Diag && m == LagrangianTag::FlowOut;
}

std::string to_string(const SpaceDecomposition& d)
{
    std::ostringstream out;
    bool first = true;
    for (const auto& t : d.pure) {
        out << (first ? "" : " + ") << "I^" << to_string(t.order) << "(" << to_string(t.lagrangian.tag)
            << ")";
        first = false;
    }
    for (const auto& t : d.paired) {
        out << (first ? "" : " + ") << "I^{" << to_string(t.order.p) << "," << to_string(t.order.l)
            << "}(" << to_string(t.relative.tag) << "," << to_string(t.main.tag) << ")";
        first = false;
    }
    return out.str();
}

Inequality make_inequality(std::string label, Rational lhs, Relation rel, Rational rhs)
{
    Inequality ineq{std::move(label), lhs, rel, rhs, false};
    ineq.holds = rel == Relation::Less ? lhs < rhs : lhs <= rhs;
    return ineq;
}

std::string to_string(const Inequality& ineq)
{
    return ineq.label + ": " + to_string(ineq.lhs) + " " + relation_symbol(ineq.rel) + " " +
           to_string(ineq.rhs) + (ineq.holds ? " [ok]" : " [FAILS]");
}

void Verdict::add(Inequality ineq)
{
    holds = holds && ineq.holds;
    witnesses.push_back(std::move(ineq));
}

std::string Verdict::describe() const
{
    std::string out;
    for (const auto& w : witnesses) {
        if (!out.empty()) out += "; ";
        out += to_string(w);
    }
    return out;
}

std::string Verdict::violated() const
{
    std::string out;
    for (const auto& w : witnesses) {
        if (w.holds) continue;
        if (!out.empty()) out += "; ";
        out += w.label;
    }
    return out;
}

CompositionConstraintError::CompositionConstraintError(PairOrder a, PairOrder b)
    : std::domain_error("compose_flowout requires l + l' < 0, got " + to_string(a.l + b.l)),
      a_(a), b_(b)
{
}

PairOrder CompositionConstraintError::fallback(const Rational& ell) const
{
    if (!(ell > a_.l + b_.l))
        throw std::invalid_argument("fallback composition requires ell > l + l'");
    const Rational k2 = half(a_.k);
    const Rational L = std::max({a_.l - ell, b_.l, a_.l - ell + b_.l + k2});
    return {a_.p + b_.p + ell, L, a_.k};
}

Verdict include_filter_verdict(const PairOrder& a, const PairOrder& b)
{
    require_same_k(a, b, "include_filter");
    Verdict v;
    v.add(make_inequality("p1 <= p2", a.p, Relation::LessEq, b.p));
    v.add(make_inequality("p1+l1 <= p2+l2", a.p + a.l, Relation::LessEq, b.p + b.l));
    return v;
}

bool include_filter(const PairOrder& a, const PairOrder& b) { return include_filter_verdict(a, b).holds; }

PairOrder embed_lambda0(const Rational& p, int k)
{
    return {p - half(k), half(k), k};
}

SpaceDecomposition reverse_pair(const PairOrder& o, const Rational& eps)
{
    if (eps <= 0) throw std::invalid_argument("reverse_pair: eps must be positive");
    const LagrangianId lambda1_rel{LagrangianTag::Diag, LagrangianRole::Relative};
    const LagrangianId lambda0_main{LagrangianTag::FlowOut, LagrangianRole::Main};
    const Rational k2 = half(o.k);

    SpaceDecomposition out;
    if (o.l < -k2) {
        out.pure.push_back({{LagrangianTag::Diag, LagrangianRole::Main}, o.p});
        out.paired.push_back({lambda1_rel, lambda0_main, {o.p + o.l + eps, -o.l - eps, o.k}});
        return out;
    }
    const Rational l = o.l == -k2 ? o.l + eps : o.l;
    out.paired.push_back({lambda1_rel, lambda0_main, {o.p + l, k2, o.k}});
    return out;
}

PairOrder compose_au(const PairOrder& a, const PairOrder& b)
{
    require_same_k(a, b, "compose_au");
    const Rational k2 = half(a.k);
    return {a.p + b.p + k2, a.l + b.l - k2, a.k};
}

PairOrder compose_flowout(const PairOrder& a, const PairOrder& b)
{
    require_same_k(a, b, "compose_flowout");
    if (a.l + b.l >= 0) throw CompositionConstraintError(a, b);
    const Rational L = std::max({a.l, b.l, a.l + b.l + half(a.k)});
    return {a.p + b.p, L, a.k};
}

PairOrder psdo_shift(const PairOrder& o, const Rational& s, Side side)
{
    if (side == Side::Left) return {o.p + s, o.l, o.k};
    return {o.p, o.l + s, o.k};
}

PairOrder drop_main_order(const PairOrder& o) { return {o.p - 1, o.l + 1, o.k}; }

Verdict bounded_gu_verdict(const PairOrder& o, const Rational& m_src, const Rational& m_dst)
{
    const Rational gap = m_src - m_dst;
    Verdict v;
    v.add(make_inequality("p+k/2 <= m'-m", o.p + half(o.k), Relation::LessEq, gap));
    v.add(make_inequality("p+l <= m'-m", o.p + o.l, Relation::LessEq, gap));
    return v;
}

bool bounded_gu(const PairOrder& o, const Rational& m_src, const Rational& m_dst)
{
    return bounded_gu_verdict(o, m_src, m_dst).holds;
}

Verdict bounded_diag_flowout_verdict(const PairOrder& o, const Rational& m_src, const Rational& m_dst)
{
    const Rational gap = m_src - m_dst;
    Verdict v;
    v.add(make_inequality("p <= m'-m", o.p, Relation::LessEq, gap));
    v.add(make_inequality("p+l < m'-m-k/2", o.p + o.l, Relation::Less, gap - half(o.k)));
    return v;
}

bool bounded_diag_flowout(const PairOrder& o, const Rational& m_src, const Rational& m_dst)
{
    return bounded_diag_flowout_verdict(o, m_src, m_dst).holds;
}

Verdict bounded_one_sided_verdict(const PairOrder& o, int n, const Rational& m, const Rational& m_src,
                                  Side side)
{
    Verdict v;
    v.add(make_inequality("p+l < m+m'-k/2", o.p + o.l, Relation::Less, m + m_src - half(o.k)));
    if (side == Side::Left)
        v.add(make_inequality("p < m-n/2", o.p, Relation::Less, m - half(n)));
    else
        v.add(make_inequality("p < m'-n/2", o.p, Relation::Less, m_src - half(n)));
    return v;
}

bool bounded_one_sided(const PairOrder& o, int n, const Rational& m, const Rational& m_src, Side side)
{
    return bounded_one_sided_verdict(o, n, m, m_src, side).holds;
}

Verdict bounded_one_sided_lagrangian(const Rational& p, int k, int n, const Rational& m,
                                     const Rational& m_src, Side side)
{
    // The flow-out meets the one-sided Λ1 in codimension n, so the embedding uses
    // n; the Sobolev predicate keeps codim Y.
    const PairOrder embedded = embed_lambda0(p, n);
    return bounded_one_sided_verdict({embedded.p, embedded.l, k}, n, m, m_src, side);
}

SpaceDecomposition mult_decompose(const Rational& s0, const Rational& op_order, int k, int n)
{
    if (!(n > k && k >= 1)) throw std::invalid_argument("mult_decompose requires n > k >= 1");
    const LagrangianId flow{LagrangianTag::FlowOut, LagrangianRole::Relative};
    SpaceDecomposition out;
    out.paired.push_back({flow, {LagrangianTag::Diag, LagrangianRole::Main},
                          {op_order, -s0 + half(k), k}});
    out.paired.push_back({flow, {LagrangianTag::LeftConormal, LagrangianRole::Main},
                          {-s0 - half(n - k), op_order + half(n), k}});
    return out;
}

bool RegularityWindow::empty() const
{
    return lo && hi && !(*lo < *hi);
}

bool RegularityWindow::contains(const Rational& s) const
{
    if (lo && !(*lo < s)) return false;
    if (hi && !(s < *hi)) return false;
    return true;
}

bool RegularityWindow::subset_of(const RegularityWindow& other) const
{
    if (empty()) return true;
    if (other.empty()) return false;
    const bool lo_ok = !other.lo || (lo && *other.lo <= *lo);
    const bool hi_ok = !other.hi || (hi && *hi <= *other.hi);
    return lo_ok && hi_ok;
}

std::string to_string(const RegularityWindow& w)
{
    std::string out = "(" + (w.lo ? to_string(*w.lo) : std::string("-inf")) + ", " +
                      (w.hi ? to_string(*w.hi) : std::string("+inf")) + ")";
    if (!w.admissible) out += " inadmissible";
    else if (w.empty()) out += " empty";
    return out;
}

RegularityWindow mult_bounded_range(const Rational& s0, int k)
{
    RegularityWindow w;
    w.s0 = s0;
    w.k = k;
    w.gate.add(make_inequality("codim Y < s0", Rational(k), Relation::Less, s0));
    w.admissible = w.gate.holds;
    w.lo = -s0 + half(k);
    w.hi = s0 - half(k);
    return w;
}

RegularityWindow elliptic_window(const Rational& s0, const Rational& eps0, int k)
{
    if (eps0 <= 0) throw std::invalid_argument("elliptic_window: eps0 must be positive");
    RegularityWindow w;
    w.s0 = s0;
    w.eps0 = eps0;
    w.k = k;
    w.gate.add(make_inequality("k+2eps0 < s0", Rational(k) + 2 * eps0, Relation::Less, s0));
    w.admissible = w.gate.holds;
    w.lo = -s0 + eps0 + 1 + half(k);
    w.hi = s0 - eps0 - half(k);
    return w;
}

HyperbolicWindow hyperbolic_window(const Rational& s0, const Rational& eps0, int k)
{
    if (eps0 <= 0) throw std::invalid_argument("hyperbolic_window: eps0 must be positive");
    RegularityWindow base;
    base.s0 = s0;
    base.eps0 = eps0;
    base.k = k;
    base.gate.add(make_inequality("k+1+2eps0 < s0", Rational(k + 1) + 2 * eps0, Relation::Less, s0));
    base.admissible = base.gate.holds;
    base.hi = s0 - eps0 - 1 - half(k);

    HyperbolicWindow out{base, base, base};
    out.theorem.lo = -half(k);
    out.derived.lo = -s0 + eps0 + 1 + half(k);
    out.intersected.lo = std::max(*out.theorem.lo, *out.derived.lo);
    return out;
}

ConstraintChainReport verify_constraint_chain(const Rational& s0, const Rational& eps0,
                                              const Rational& s, int k, int n)
{
    const Rational k2 = half(k);
    const Rational dimY = Rational(n - k);
    ConstraintChainReport r;

    r.raw.add(make_inequality("-s0+2s+1+k/2 < 2s-2eps0-k/2", -s0 + 2 * s + 1 + k2, Relation::Less,
                              2 * s - 2 * eps0 - k2));
    r.raw.add(make_inequality("-s0+1-dimY/2 < s-eps0-n/2", -s0 + 1 - dimY / 2, Relation::Less,
                              s - eps0 - half(n)));
    r.raw.add(make_inequality("-s0+2s+1+k/2 < s-eps0", -s0 + 2 * s + 1 + k2, Relation::Less, s - eps0));

    r.reduced.add(make_inequality("k+1+2eps0 < s0", Rational(k + 1) + 2 * eps0, Relation::Less, s0));
    r.reduced.add(make_inequality("-s0+eps0+1+k/2 < s", -s0 + eps0 + 1 + k2, Relation::Less, s));
    r.reduced.add(make_inequality("s < s0-eps0-1-k/2", s, Relation::Less, s0 - eps0 - 1 - k2));

    r.reduction.add(make_inequality("k < s0", Rational(k), Relation::Less, s0));
    r.reduction.add(make_inequality("-s0+k/2 < s-1", -s0 + k2, Relation::Less, s - 1));
    r.reduction.add(make_inequality("s-1 < s0-k/2", s - 1, Relation::Less, s0 - k2));

    bool same = true;
    for (std::size_t i = 0; i < 3; ++i)
        same = same && r.raw.witnesses[i].holds == r.reduced.witnesses[i].holds;
    r.raw_matches_reduced = same;
    r.reduction_implied = !r.reduced.holds || r.reduction.holds;
    const bool premise = -k2 < s && r.reduced.witnesses[0].holds;
    r.second_automatic = !premise || r.reduced.witnesses[1].holds;
    return r;
}

bool CommutatorChainReport::all_bounded() const
{
    return std::all_of(checks.begin(), checks.end(),
                       [](const CommutatorCheck& c) { return c.verdict.holds; });
}

CommutatorChainReport hyperbolic_commutator_chain(const Rational& s0, const Rational& eps0,
                                                  const Rational& s, int k, int n)
{
    const Rational m_src = s - eps0;
    const Rational m_dst = -s + eps0;
    const Rational m = -m_dst;  // one-sided convention: target H^{-m}

    // g_R (D_L + D_R) K_A with A ∈ Ψ^{2s-1}; D_L + D_R is tangent to the diagonal.
    const auto base = mult_decompose(s0, 2 * s - 1, k, n);
    const PairOrder diag = base.paired[0].order;
    const PairOrder conormal = base.paired[1].order;

    const PairOrder good_diag = psdo_shift(diag, 1, Side::Left);
    const PairOrder good_conormal = psdo_shift(conormal, 1, Side::Left);
    // D_{i,L} D_{j,R} (g_L - g_R) K_A: both derivatives raise the diagonal order,
    // the principal symbols on N*diag cancel.
    const PairOrder bad_diag = drop_main_order(psdo_shift(psdo_shift(diag, 1, Side::Left), 1, Side::Left));
    const PairOrder bad_conormal = psdo_shift(psdo_shift(conormal, 1, Side::Left), 1, Side::Right);

    CommutatorChainReport report;
    auto off_diagonal = [&](const std::string& name, const PairOrder& o) {
        // Away from N*diag the pair is a pure Lagrangian distribution on the flow-out.
        const Rational lambda0 = o.p + o.l;
        report.checks.push_back({name + " via N*diag pair", o,
                                 bounded_diag_flowout_verdict(embed_lambda0(lambda0, k), m_src, m_dst)});
        report.checks.push_back(
            {name + " one-sided left", o, bounded_one_sided_lagrangian(lambda0, k, n, m, m_src, Side::Left)});
        report.checks.push_back(
            {name + " one-sided right", o, bounded_one_sided_lagrangian(lambda0, k, n, m, m_src, Side::Right)});
    };
    auto conormal_pair = [&](const std::string& name, const PairOrder& o) {
        report.checks.push_back({name + " (X x Y)", o, bounded_one_sided_verdict(o, n, m, m_src, Side::Right)});
        report.checks.push_back({name + " (Y x X)", o, bounded_one_sided_verdict(o, n, m, m_src, Side::Left)});
    };

    off_diagonal("commutator diagonal term", good_diag);
    conormal_pair("commutator conormal term", good_conormal);
    off_diagonal("coefficient-commutator diagonal term", bad_diag);
    conormal_pair("coefficient-commutator conormal term", bad_conormal);

    const auto reduction = mult_bounded_range(s0, k);
    CommutatorCheck reduce{"reduced operator coefficient", {Rational(0), -s0 + half(k), k}, reduction.gate};
    reduce.verdict.add(make_inequality("-s0+k/2 < s-1", *reduction.lo, Relation::Less, s - 1));
    reduce.verdict.add(make_inequality("s-1 < s0-k/2", s - 1, Relation::Less, *reduction.hi));
    report.checks.push_back(reduce);
    return report;
}

std::vector<Rational> bootstrap_schedule(const Rational& s_target, const Rational& eps0)
{
    if (eps0 <= 0) throw std::invalid_argument("bootstrap_schedule: eps0 must be positive");
    const Rational step(1, 2);
    std::vector<Rational> out;
    Rational s = std::min(s_target - eps0 + step, s_target);
    out.push_back(s);
    while (s < s_target) {
        s = std::min(s + step, s_target);
        out.push_back(s);
    }
    return out;
}

std::vector<Rational> bootstrap_schedule(const Rational& s_prior, const Rational& s_target,
                                         const Rational& eps0)
{
    if (s_prior > s_target) throw std::invalid_argument("bootstrap_schedule: s_prior > s_target");
    if (s_prior != s_target - eps0)
        throw std::invalid_argument("bootstrap_schedule: s_prior must equal s_target - eps0");
    return bootstrap_schedule(s_target, eps0);
}

}  // namespace cnl::order
