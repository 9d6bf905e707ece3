#pragma once

// Cost-function market makers. A trader buying bundle r at quantity state q
// pays C(q + r) - C(q); instantaneous prices are the gradient of C.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "marketlearn/core.hpp"
#include "marketlearn/penalty.hpp"
#include "marketlearn/random.hpp"

namespace marketlearn {

struct CostFunction {
  std::string name;
  std::size_t outcomes = 0;
  std::function<double(const QuantityVector&)> cost;
  std::function<ProbVector(const QuantityVector&)> prices;
  std::optional<PenaltyFunction> penalty;  // present for convex cost functions
  std::optional<double> phi_bound;         // analytic stability constant
  std::optional<double> loss_bound;        // analytic worst-case maker loss
  double liquidity = 1.0;                  // the b parameter; scales sampling and brackets
};

using CostFunctionPtr = std::shared_ptr<const CostFunction>;

namespace detail {

inline void require_market_shape(double b, std::size_t n) {
  if (!(b > 0.0) || !std::isfinite(b)) throw InvalidParameter("market requires b > 0");
  if (n < 2) throw InvalidParameter("market requires at least two outcomes");
}

}  // namespace detail

/// Logarithmic market: C(q) = b log sum exp(q_i / b).
inline CostFunctionPtr make_lmsr(double b, std::size_t n) {
  detail::require_market_shape(b, n);
  const auto alpha = PenaltyFunction::entropic(b);
  auto cf = std::make_shared<CostFunction>();
  cf->name = "lmsr";
  cf->outcomes = n;
  cf->cost = [alpha](const QuantityVector& q) { return maximize(alpha, q).cost; };
  cf->prices = [alpha](const QuantityVector& q) { return maximize(alpha, q).prices; };
  cf->penalty = alpha;
  cf->phi_bound = 2.0 / b;
  cf->loss_bound = b * std::log(static_cast<double>(n));
  cf->liquidity = b;
  return cf;
}

/// Quadratic market: C(q) = sup_p p·q - b sum p_i^2, with prices from the
/// active-set solution of its KKT system.
inline CostFunctionPtr make_quad(double b, std::size_t n) {
  detail::require_market_shape(b, n);
  const double nd = static_cast<double>(n);
  auto cf = std::make_shared<CostFunction>();
  cf->name = "quad";
  cf->outcomes = n;
  cf->cost = [b](const QuantityVector& q) {
    const auto sol = quad_price_closed_form(b, q);
    double sq = 0.0;
    for (double x : sol.prices) sq += x * x;
    return dot(sol.prices.span(), q.span()) - b * sq;
  };
  cf->prices = [b](const QuantityVector& q) { return quad_price_closed_form(b, q).prices; };
  cf->penalty = PenaltyFunction::quadratic(b);
  cf->phi_bound = (nd * nd - 1.0) / (2.0 * b);
  cf->loss_bound = b * (nd - 1.0) / nd;
  cf->liquidity = b;
  return cf;
}

/// Convex cost function generated by an arbitrary penalty through the
/// generic solver. Stability and loss bounds are left for estimation.
inline CostFunctionPtr make_custom(const PenaltyFunction& penalty, std::size_t n) {
  if (n < 2) throw InvalidParameter("market requires at least two outcomes");
  const auto convexity = spot_check_convexity(penalty, n);
  if (!convexity.passed)
    throw InvalidPenalty("penalty failed the convexity spot-check (worst gap " +
                         std::to_string(convexity.worst_violation) + ")");
  auto cf = std::make_shared<CostFunction>();
  cf->name = "custom";
  cf->outcomes = n;
  cf->cost = [penalty](const QuantityVector& q) { return maximize(penalty, q).cost; };
  cf->prices = [penalty](const QuantityVector& q) { return maximize(penalty, q).prices; };
  cf->penalty = penalty;
  return cf;
}

// ---------------------------------------------------------------------------
// Validity
// ---------------------------------------------------------------------------

struct PropertyCheck {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
  std::size_t failures = 0;
  std::size_t boundary_points = 0;  // kinks excused from the differentiability check
};

struct ValidityReport {
  PropertyCheck differentiability{"differentiability"};
  PropertyCheck monotonicity{"increasing_monotonicity"};
  PropertyCheck translation{"translation_invariance"};

  bool all_passed() const {
    return differentiability.passed && monotonicity.passed && translation.passed;
  }
};

/// Samples q uniformly in [-10, 10]^N and tests differentiability, increasing
/// monotonicity and positive translation invariance of the cost function.
inline ValidityReport check_validity(const CostFunction& cf, std::size_t samples,
                                     std::uint64_t seed) {
  if (samples == 0) throw InvalidParameter("check_validity requires samples >= 1");
  constexpr double kGradTol = 1e-4;
  constexpr double kMonoTol = 1e-9;
  constexpr double kShiftTol = 1e-7;
  const double h = kTol.finitediff_h;
  const std::size_t n = cf.outcomes;

  ValidityReport report;
  SplitMix64 rng(seed);
  const auto note = [](PropertyCheck& c, double violation, bool ok) {
    c.worst_violation = std::max(c.worst_violation, violation);
    if (!ok) {
      c.passed = false;
      ++c.failures;
    }
  };

  for (std::size_t s = 0; s < samples; ++s) {
    const QuantityVector q(rng.box(n, 10.0));
    const double c0 = cf.cost(q);
    const ProbVector p = cf.prices(q);

    for (std::size_t j = 0; j < n; ++j) {
      const double up = cf.cost(q.bumped(j, h));
      const double down = cf.cost(q.bumped(j, -h));
      const double err = std::abs((up - down) / (2.0 * h) - p[j]);
      if (err <= kGradTol) {
        note(report.differentiability, err, true);
        continue;
      }
      const double forward = (up - c0) / h;
      const double backward = (c0 - down) / h;
      if (std::abs(forward - backward) > kGradTol) {
        ++report.differentiability.boundary_points;
      } else {
        note(report.differentiability, err, false);
      }
    }

    QuantityVector bump(rng.box(n, 0.5));
    bump = bump.shifted(0.5);  // entries in [0, 1)
    const double drop = c0 - cf.cost(q + bump);
    note(report.monotonicity, std::max(drop, 0.0), drop <= kMonoTol);

    for (double k : {-3.0, 0.5, 7.0}) {
      const double err = std::abs(cf.cost(q.shifted(k)) - c0 - k);
      note(report.translation, err, err <= kShiftTol);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Trading
// ---------------------------------------------------------------------------

struct MarketState {
  CostFunctionPtr market;
  QuantityVector q;
  double collected = 0.0;     // sum of all payments received
  double initial_cost = 0.0;  // C(0)
};

struct TradeReceipt {
  QuantityVector shares;
  double payment;
  ProbVector prices_before;
  ProbVector prices_after;
};

inline MarketState open_market(CostFunctionPtr cf) {
  if (!cf) throw InvalidInput("open_market: null cost function");
  auto zero = QuantityVector::zeros(cf->outcomes);
  const double c0 = cf->cost(zero);
  return {std::move(cf), std::move(zero), 0.0, c0};
}

inline std::pair<MarketState, TradeReceipt> trade(const MarketState& state,
                                                  const QuantityVector& r) {
  if (r.size() != state.q.size()) throw InvalidInput("trade: bundle dimension mismatch");
  const auto& cf = *state.market;
  QuantityVector next = state.q + r;
  const double payment = cf.cost(next) - cf.cost(state.q);
  TradeReceipt receipt{r, payment, cf.prices(state.q), cf.prices(next)};
  MarketState after{state.market, std::move(next), state.collected + payment, state.initial_cost};
  return {std::move(after), std::move(receipt)};
}

/// Payout owed on `outcome` minus the money taken in. Outcomes are 0-based.
inline double realized_maker_loss(const MarketState& state, std::size_t outcome) {
  if (outcome >= state.q.size()) throw InvalidOutcome("outcome index out of range");
  return state.q[outcome] - state.collected;
}

/// Limit order: buy up to `max_shares` of `outcome`, stopping once its price
/// reaches `limit_price`.
inline std::pair<MarketState, TradeReceipt> accept_limit_order(const MarketState& state,
                                                               std::size_t outcome,
                                                               double max_shares,
                                                               double limit_price) {
  const auto& cf = *state.market;
  const std::size_t n = state.q.size();
  if (outcome >= n) throw InvalidOutcome("outcome index out of range");
  if (!(max_shares > 0.0)) throw InvalidParameter("limit order needs max_shares > 0");
  if (!(limit_price > 0.0 && limit_price < 1.0))
    throw InvalidParameter("limit price must lie in (0, 1)");

  const auto price_after = [&](double s) { return cf.prices(state.q.bumped(outcome, s))[outcome]; };

  double shares = 0.0;
  if (price_after(0.0) < limit_price) {
    const double odds = limit_price / (1.0 - limit_price) * static_cast<double>(n - 1);
    double hi = cf.liquidity * std::log(odds) + state.q.max_abs() + 1.0;
    if (!(hi > 0.0)) hi = 1.0;
    int expansions = 0;
    while (price_after(hi) < limit_price && expansions < 200) {
      hi *= 2.0;
      ++expansions;
    }
    if (price_after(hi) < limit_price) {
      shares = max_shares;  // the limit is never reached
    } else {
      double lo = 0.0;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (price_after(mid) < limit_price ? lo : hi) = mid;
      }
      shares = std::min(max_shares, 0.5 * (lo + hi));
    }
  }

  std::vector<double> r(n, 0.0);
  r[outcome] = shares;
  return trade(state, QuantityVector(std::move(r)));
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

/// Sum of |dp_i/dq_j| at q by central differences. Where forward and backward
/// differences disagree by more than 1e-3 the point sits on a kink; the
/// larger one-sided magnitude is used there.
inline double phi_at(const CostFunction& cf, const QuantityVector& q) {
  const double h = kTol.finitediff_h;
  const std::size_t n = q.size();
  const ProbVector p0 = cf.prices(q);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const ProbVector up = cf.prices(q.bumped(j, h));
    const ProbVector down = cf.prices(q.bumped(j, -h));
    for (std::size_t i = 0; i < n; ++i) {
      const double fwd = (up[i] - p0[i]) / h;
      const double bwd = (p0[i] - down[i]) / h;
      if (std::abs(fwd - bwd) > 1e-3)
        total += std::max(std::abs(fwd), std::abs(bwd));
      else
        total += std::abs((up[i] - down[i]) / (2.0 * h));
    }
  }
  return total;
}

/// Draws a quantity vector whose spread, relative to the liquidity b, ranges
/// over roughly [0.1, 20]. This visits both the interior and the boundary
/// regimes of every built-in market.
inline QuantityVector sample_quantities(SplitMix64& rng, std::size_t n, double liquidity) {
  const double spread = liquidity * std::exp(rng.uniform(std::log(0.1), std::log(20.0)));
  return QuantityVector(rng.box(n, spread));
}

/// Sampled estimate of the stability constant: max over q of sum |dp_i/dq_j|.
/// The first sample is q = 0.
inline double estimate_phi(const CostFunction& cf, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidParameter("estimate_phi requires samples >= 1");
  SplitMix64 rng(seed);
  double phi = phi_at(cf, QuantityVector::zeros(cf.outcomes));
  for (std::size_t s = 1; s < samples; ++s)
    phi = std::max(phi, phi_at(cf, sample_quantities(rng, cf.outcomes, cf.liquidity)));
  return phi;
}

struct BoundReport {
  double max_gap = 0.0;       // max |gap|
  double signed_worst = 0.0;  // the gap attaining max_gap, with its sign
  double bound = 0.0;
  std::size_t trials = 0;
  std::size_t violations = 0;

  bool passed() const { return violations == 0; }
};

/// Checks |C(q+r) - C(q) - p(q)·r| <= eps^2·phi/2 over random (q, r) with
/// |r_i| <= eps. Uses the analytic phi when the market has one.
inline BoundReport verify_pricing_diff_bound(const CostFunction& cf, double eps, std::size_t trials,
                                             std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidParameter("verify_pricing_diff_bound requires eps > 0");
  const double phi = cf.phi_bound ? *cf.phi_bound : estimate_phi(cf, 1000, seed);
  BoundReport report;
  report.bound = eps * eps * phi / 2.0;
  report.trials = trials;
  SplitMix64 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const QuantityVector q = sample_quantities(rng, cf.outcomes, cf.liquidity);
    const QuantityVector r(rng.box(cf.outcomes, eps));
    const double gap = cf.cost(q + r) - cf.cost(q) - dot(cf.prices(q).span(), r.span());
    if (std::abs(gap) > report.max_gap) {
      report.max_gap = std::abs(gap);
      report.signed_worst = gap;
    }
    if (std::abs(gap) > report.bound) ++report.violations;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Session log
// ---------------------------------------------------------------------------

/// One executed single-outcome trade. `outcome` is 0-based here and written
/// 1-based in the CSV, matching the price column names.
struct SessionRow {
  std::size_t step;
  std::size_t outcome;
  double shares;
  double payment;
  ProbVector prices;  // after the trade
};

inline void write_session_header(std::ostream& out, std::size_t n) {
  out << "step,outcome_dim,shares,payment";
  for (std::size_t i = 1; i <= n; ++i) out << ",price_" << i;
  out << '\n';
}

inline void write_session_row(std::ostream& out, const SessionRow& row) {
  out << row.step << ',' << row.outcome + 1 << ',' << format_number(row.shares) << ','
      << format_number(row.payment);
  for (double p : row.prices) out << ',' << format_number(p);
  out << '\n';
}

}  // namespace marketlearn
