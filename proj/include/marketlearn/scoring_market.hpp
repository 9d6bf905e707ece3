#pragma once

// Proper scoring rules, sequential market scoring rules, and the conversion
// between a scoring rule and the penalty of an equivalent cost function:
//
//   alpha(p) = sum_i p_i s_i(p)
//   s_i(p)   = alpha(p) - sum_j p_j dalpha/dp_j + dalpha/dp_i

#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "marketlearn/core.hpp"
#include "marketlearn/cost_market.hpp"
#include "marketlearn/penalty.hpp"
#include "marketlearn/random.hpp"

namespace marketlearn {

enum class RuleKind { logarithmic, quadratic, from_penalty };

/// A scoring rule with a_i = 0. Scores are extended reals: the logarithmic
/// rule returns -inf on a zero-probability outcome.
class ScoringRule {
 public:
  static ScoringRule logarithmic(double b) {
    check_scale(b);
    return ScoringRule(RuleKind::logarithmic, b, nullptr);
  }

  static ScoringRule quadratic(double b) {
    check_scale(b);
    return ScoringRule(RuleKind::quadratic, b, nullptr);
  }

  static ScoringRule from_penalty(PenaltyFunction alpha) {
    return ScoringRule(RuleKind::from_penalty, alpha.scale(),
                       std::make_shared<const PenaltyFunction>(std::move(alpha)));
  }

  RuleKind kind() const noexcept { return kind_; }
  double scale() const noexcept { return b_; }
  const PenaltyFunction* penalty() const noexcept { return alpha_.get(); }

  std::vector<double> scores(std::span<const double> p) const {
    const std::size_t n = p.size();
    std::vector<double> s(n);
    switch (kind_) {
      case RuleKind::logarithmic:
        for (std::size_t i = 0; i < n; ++i)
          s[i] = p[i] > 0.0 ? b_ * std::log(p[i]) : -std::numeric_limits<double>::infinity();
        return s;
      case RuleKind::quadratic: {
        double sq = 0.0;
        for (double x : p) sq += x * x;
        for (std::size_t i = 0; i < n; ++i) s[i] = b_ * (2.0 * p[i] - sq);
        return s;
      }
      case RuleKind::from_penalty:
        break;
    }
    const auto g = alpha_->gradient(p);
    const double base = alpha_->value(p) - dot(g, p);
    for (std::size_t i = 0; i < n; ++i) s[i] = base + g[i];
    return s;
  }

  std::vector<double> scores(const ProbVector& p) const { return scores(p.span()); }

  double score(const ProbVector& p, std::size_t i) const {
    if (i >= p.size()) throw InvalidOutcome("score: outcome index out of range");
    if (kind_ == RuleKind::logarithmic)
      return p[i] > 0.0 ? b_ * std::log(p[i]) : -std::numeric_limits<double>::infinity();
    return scores(p)[i];
  }

  /// Expected score under belief r of reporting p.
  double expected(const ProbVector& r, std::span<const double> p) const {
    const auto s = scores(p);
    double e = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (r[i] > 0.0) e += r[i] * s[i];
    return e;
  }

 private:
  ScoringRule(RuleKind kind, double b, std::shared_ptr<const PenaltyFunction> alpha)
      : kind_(kind), b_(b), alpha_(std::move(alpha)) {}

  static void check_scale(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidParameter("scoring rule requires b > 0");
  }

  RuleKind kind_;
  double b_;
  std::shared_ptr<const PenaltyFunction> alpha_;
};

/// s_i(p) = b log p_i
inline ScoringRule make_log_rule(double b) { return ScoringRule::logarithmic(b); }

/// s_i(p) = b (2 p_i - sum_j p_j^2)
inline ScoringRule make_quadratic_rule(double b) { return ScoringRule::quadratic(b); }

struct RuleCheck {
  bool regular = true;
  bool proper = true;
  double worst_gain = 0.0;  // largest expected-score gain from misreporting
};

/// Regularity and properness spot-check: for 100 random interior beliefs p,
/// reporting any of 100 random p' never beats reporting p by more than 1e-9.
inline RuleCheck spot_check_rule(const ScoringRule& rule, std::size_t n, std::uint64_t seed = 7) {
  RuleCheck check;
  SplitMix64 rng(seed);
  for (int a = 0; a < 100; ++a) {
    const ProbVector belief(rng.simplex_point(n));
    const double truthful = rule.expected(belief, belief.span());
    if (!std::isfinite(truthful)) check.regular = false;
    for (int b = 0; b < 100; ++b) {
      const auto other = rng.simplex_point(n);
      const double e = rule.expected(belief, other);
      if (std::isnan(e) || e == std::numeric_limits<double>::infinity()) check.regular = false;
      const double gain = e - truthful;
      check.worst_gain = std::max(check.worst_gain, gain);
      if (gain > 1e-9) check.proper = false;
    }
  }
  return check;
}

// ---------------------------------------------------------------------------
// Conversion
// ---------------------------------------------------------------------------

/// alpha(p) = sum_i p_i s_i(p). The built-in rules map to their tagged
/// penalties; any other rule yields a custom penalty evaluated through it.
inline PenaltyFunction penalty_from_rule(const ScoringRule& rule) {
  switch (rule.kind()) {
    case RuleKind::logarithmic: return PenaltyFunction::entropic(rule.scale());
    case RuleKind::quadratic: return PenaltyFunction::quadratic(rule.scale());
    case RuleKind::from_penalty: break;
  }
  return PenaltyFunction::custom([rule](std::span<const double> p) {
    const auto s = rule.scores(p);
    double v = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0.0) v += p[i] * s[i];
    return v;
  });
}

/// s_i(p) = alpha(p) - sum_j p_j dalpha/dp_j + dalpha/dp_i, with the
/// penalty's analytic gradient when it has one. A penalty without one must be
/// differentiable by central differences at the uniform point of the
/// n-simplex.
inline ScoringRule rule_from_penalty(const PenaltyFunction& alpha, std::size_t n = 2) {
  if (!alpha.has_gradient()) {
    const auto g = alpha.gradient(ProbVector::uniform(n).span());
    const bool differentiable =
        std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); });
    if (!differentiable) throw InvalidPenalty("penalty gradient unavailable");
  }
  return ScoringRule::from_penalty(alpha);
}

// ---------------------------------------------------------------------------
// Market scoring rule sessions
// ---------------------------------------------------------------------------

struct MsrState {
  ScoringRule rule;
  ProbVector current;
  ProbVector initial;
};

namespace detail {

inline std::vector<double> admissible_scores(const ScoringRule& rule, const ProbVector& p) {
  auto s = rule.scores(p);
  for (double x : s)
    if (!std::isfinite(x)) throw InadmissibleReport("report has an infinite score");
  return s;
}

}  // namespace detail

inline MsrState open_msr(ScoringRule rule, const ProbVector& initial) {
  detail::admissible_scores(rule, initial);
  return {std::move(rule), initial, initial};
}

/// Moves the standing report to `report`. The returned vector holds the
/// trader's payoff s_i(report) - s_i(current) for each outcome i.
inline std::pair<MsrState, std::vector<double>> msr_trade(const MsrState& state,
                                                          const ProbVector& report) {
  if (report.size() != state.current.size())
    throw InvalidInput("msr_trade: report dimension mismatch");
  const auto next = detail::admissible_scores(state.rule, report);
  const auto prev = state.rule.scores(state.current);
  std::vector<double> payoff(next.size());
  for (std::size_t i = 0; i < next.size(); ++i) payoff[i] = next[i] - prev[i];
  return {MsrState{state.rule, report, state.initial}, std::move(payoff)};
}

struct WorstCaseLoss {
  double value;
  std::size_t outcome;
  ProbVector report;  // a maximizing final report
  bool exact;         // closed form rather than grid search
};

namespace detail {

// Visits every point of the simplex grid with spacing 1/k.
template <class Visit>
void for_each_grid_point(std::size_t n, std::size_t k, Visit&& visit) {
  std::vector<std::size_t> counts(n, 0);
  std::vector<double> p(n);
  const auto rec = [&](auto&& self, std::size_t dim, std::size_t left) -> void {
    if (dim + 1 == n) {
      counts[dim] = left;
      for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<double>(counts[i]) / static_cast<double>(k);
      visit(std::span<const double>(p));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[dim] = c;
      self(self, dim + 1, left - c);
    }
  };
  rec(rec, 0, k);
}

inline double grid_size(std::size_t n, std::size_t k) {
  // C(k + n - 1, n - 1)
  double c = 1.0;
  for (std::size_t i = 1; i < n; ++i) c = c * static_cast<double>(k + i) / static_cast<double>(i);
  return c;
}

}  // namespace detail

/// max_i max_p s_i(p) - s_i(initial). Closed form for the logarithmic rule;
/// otherwise a simplex grid (spacing 1e-3, coarsened for large N so the grid
/// stays under ~2·10^6 points) that always contains the vertices.
inline WorstCaseLoss msr_worst_case_loss(const ScoringRule& rule, const ProbVector& initial) {
  const std::size_t n = initial.size();
  const auto base = detail::admissible_scores(rule, initial);

  if (rule.kind() == RuleKind::logarithmic) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (initial[i] < initial[arg]) arg = i;
    const double value =
        n == 1 ? 0.0
               : (std::all_of(initial.begin(), initial.end(),
                              [&](double x) { return x == initial[0]; })
                      ? rule.scale() * std::log(static_cast<double>(n))
                      : -rule.scale() * std::log(initial[arg]));
    return {value, arg, ProbVector::vertex(n, arg), true};
  }

  std::size_t k = 1000;
  for (std::size_t candidate : {1000u, 500u, 200u, 100u, 50u, 20u, 10u, 5u, 2u, 1u}) {
    k = candidate;
    if (detail::grid_size(n, k) <= 2e6) break;
  }

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_outcome = 0;
  std::vector<double> best_point(n, 1.0 / static_cast<double>(n));
  detail::for_each_grid_point(n, k, [&](std::span<const double> p) {
    const auto s = rule.scores(p);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s[i])) continue;
      const double gain = s[i] - base[i];
      if (gain > best) {
        best = gain;
        best_outcome = i;
        best_point.assign(p.begin(), p.end());
      }
    }
  });
  return {best, best_outcome, ProbVector(best_point), false};
}

// ---------------------------------------------------------------------------
// Equivalence with the cost-function market
// ---------------------------------------------------------------------------

struct EquivalenceReport {
  double max_profit_gap = 0.0;         // over trades and outcomes
  double max_reachability_error = 0.0;  // max |p(s(r)) - r|
  std::size_t trades = 0;
  std::size_t reach_points = 0;

  bool passed(double profit_tol = 1e-8, double reach_tol = 1e-6) const {
    return max_profit_gap <= profit_tol && max_reachability_error <= reach_tol;
  }
};

/// Compares trader profit in the cost market, (q'_i - q_i) - (C(q') - C(q)),
/// with the scoring-rule payoff s_i(p(q')) - s_i(p(q)) on random trades whose
/// prices stay above 0.01, then checks that setting q_i = s_i(r) reaches
/// prices r for random interior r (one such point per five trades).
inline EquivalenceReport verify_equivalence(const ScoringRule& rule, const CostFunction& cf,
                                            std::size_t trials, std::uint64_t seed) {
  constexpr double kFloor = 0.01;
  const std::size_t n = cf.outcomes;
  SplitMix64 rng(seed);

  if (cf.penalty) {
    const auto induced = penalty_from_rule(rule);
    for (int k = 0; k < 10; ++k) {
      const auto p = rng.simplex_point(n);
      const double a = induced.value(p);
      const double b = cf.penalty->value(p);
      if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(b)))
        throw InvalidParameter("scoring rule and cost function are not linked");
    }
  }

  EquivalenceReport report;
  double spread = cf.liquidity;
  std::size_t rejections = 0;
  const auto draw_interior = [&](QuantityVector& q, ProbVector& p) {
    for (;;) {
      q = QuantityVector(rng.box(n, spread));
      p = cf.prices(q);
      if (p.interior(kFloor)) return;
      if (++rejections % 100 == 0) spread *= 0.7;
    }
  };

  QuantityVector q, q2;
  ProbVector p = ProbVector::uniform(n), p2 = ProbVector::uniform(n);
  for (std::size_t t = 0; t < trials; ++t) {
    draw_interior(q, p);
    draw_interior(q2, p2);
    const double paid = cf.cost(q2) - cf.cost(q);
    const auto s_before = rule.scores(p);
    const auto s_after = rule.scores(p2);
    for (std::size_t i = 0; i < n; ++i) {
      const double market_profit = (q2[i] - q[i]) - paid;
      const double msr_profit = s_after[i] - s_before[i];
      report.max_profit_gap = std::max(report.max_profit_gap, std::abs(market_profit - msr_profit));
    }
    ++report.trades;
  }

  const std::size_t reach = std::max<std::size_t>(trials / 5, 1);
  for (std::size_t t = 0; t < reach; ++t) {
    std::vector<double> r;
    do {
      r = rng.simplex_point(n);
    } while (*std::min_element(r.begin(), r.end()) <= kFloor);
    const ProbVector target(r);
    const ProbVector reached = cf.prices(QuantityVector(rule.scores(target)));
    report.max_reachability_error =
        std::max(report.max_reachability_error, max_abs_diff(reached.span(), target.span()));
    ++report.reach_points;
  }
  return report;
}

/// MSR session log: step,report_1..report_N,payoff_if_1..payoff_if_N
inline void write_msr_header(std::ostream& out, std::size_t n) {
  out << "step";
  for (std::size_t i = 1; i <= n; ++i) out << ",report_" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",payoff_if_" << i;
  out << '\n';
}

inline void write_msr_row(std::ostream& out, std::size_t step, const ProbVector& report,
                          std::span<const double> payoff) {
  out << step;
  for (double x : report) out << ',' << format_number(x);
  for (double x : payoff) out << ',' << format_number(x);
  out << '\n';
}

}  // namespace marketlearn
