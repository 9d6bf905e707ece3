#pragma once

// Convex penalty functions on the simplex and the solver for
//
//     C(q) = sup_{p in simplex}  p·q - alpha(p)
//
// whose maximizer is the market's price vector. The same object serves as the
// regularizer of a follow-the-regularized-leader learner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "marketlearn/core.hpp"
#include "marketlearn/random.hpp"

namespace marketlearn {

enum class PenaltyKind { entropic, quadratic, custom };

class PenaltyFunction {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

  /// alpha(p) = b·sum p_i log p_i
  static PenaltyFunction entropic(double b) {
    check_scale(b);
    return PenaltyFunction(PenaltyKind::entropic, b, {}, {});
  }

  /// alpha(p) = b·sum p_i^2
  static PenaltyFunction quadratic(double b) {
    check_scale(b);
    return PenaltyFunction(PenaltyKind::quadratic, b, {}, {});
  }

  /// An arbitrary convex penalty. Without a gradient, derivatives are taken by
  /// central differences along the simplex's tangent directions, which
  /// recovers the gradient up to an additive multiple of the all-ones vector.
  static PenaltyFunction custom(ValueFn value, GradientFn gradient = {}) {
    if (!value) throw InvalidPenalty("custom penalty needs a value function");
    return PenaltyFunction(PenaltyKind::custom, 1.0, std::move(value), std::move(gradient));
  }

  PenaltyKind kind() const noexcept { return kind_; }

  /// The liquidity parameter b of a tagged penalty; 1 for custom ones.
  double scale() const noexcept { return b_; }

  bool has_gradient() const noexcept { return kind_ != PenaltyKind::custom || bool(gradient_); }

  double value(std::span<const double> p) const {
    switch (kind_) {
      case PenaltyKind::entropic: {
        double s = 0.0;
        for (double x : p) {
          if (x < 0.0) return std::numeric_limits<double>::infinity();
          if (x > 0.0) s += x * std::log(x);
        }
        return b_ * s;
      }
      case PenaltyKind::quadratic: {
        double s = 0.0;
        for (double x : p) s += x * x;
        return b_ * s;
      }
      case PenaltyKind::custom:
        break;
    }
    return value_(p);
  }

  double value(const ProbVector& p) const { return value(p.span()); }

  std::vector<double> gradient(std::span<const double> p) const {
    std::vector<double> g(p.size());
    switch (kind_) {
      case PenaltyKind::entropic:
        for (std::size_t i = 0; i < p.size(); ++i)
          g[i] = p[i] > 0.0 ? b_ * (std::log(p[i]) + 1.0) : -std::numeric_limits<double>::infinity();
        return g;
      case PenaltyKind::quadratic:
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0 * b_ * p[i];
        return g;
      case PenaltyKind::custom:
        break;
    }
    if (gradient_) return gradient_(p);
    return tangent_gradient(p);
  }

  std::vector<double> gradient(const ProbVector& p) const { return gradient(p.span()); }

  /// factor·alpha
  PenaltyFunction scaled(double factor) const {
    if (!(factor > 0.0) || !std::isfinite(factor))
      throw InvalidParameter("penalty scale factor must be positive");
    if (kind_ != PenaltyKind::custom) return PenaltyFunction(kind_, b_ * factor, {}, {});
    auto self = std::make_shared<PenaltyFunction>(*this);
    GradientFn grad;
    if (gradient_)
      grad = [self, factor](std::span<const double> p) {
        auto g = self->gradient(p);
        for (double& x : g) x *= factor;
        return g;
      };
    return custom([self, factor](std::span<const double> p) { return factor * self->value(p); },
                  std::move(grad));
  }

  /// The same function with its tag dropped, so solvers take the generic
  /// path. The analytic gradient is kept when `keep_gradient` is set.
  PenaltyFunction as_custom(bool keep_gradient = true) const {
    auto self = std::make_shared<PenaltyFunction>(*this);
    GradientFn grad;
    if (keep_gradient && has_gradient())
      grad = [self](std::span<const double> p) { return self->gradient(p); };
    return custom([self](std::span<const double> p) { return self->value(p); }, std::move(grad));
  }

  std::string describe() const {
    switch (kind_) {
      case PenaltyKind::entropic: return "entropic(b=" + std::to_string(b_) + ")";
      case PenaltyKind::quadratic: return "quadratic(b=" + std::to_string(b_) + ")";
      case PenaltyKind::custom: break;
    }
    return "custom";
  }

 private:
  PenaltyFunction(PenaltyKind kind, double b, ValueFn value, GradientFn gradient)
      : kind_(kind), b_(b), value_(std::move(value)), gradient_(std::move(gradient)) {}

  static void check_scale(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidParameter("penalty requires b > 0");
  }

  std::vector<double> tangent_gradient(std::span<const double> p) const {
    const std::size_t n = p.size();
    const double h = kTol.finitediff_h;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> g(n), plus(p.begin(), p.end()), minus(p.begin(), p.end());
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (i == j ? 1.0 : 0.0) - inv_n;
        plus[i] = p[i] + h * d;
        minus[i] = p[i] - h * d;
      }
      g[j] = (value_(plus) - value_(minus)) / (2.0 * h);
    }
    return g;
  }

  PenaltyKind kind_;
  double b_;
  ValueFn value_;
  GradientFn gradient_;
};

// ---------------------------------------------------------------------------
// Convexity spot-check
// ---------------------------------------------------------------------------

struct ConvexityReport {
  bool passed = true;
  double worst_violation = 0.0;  // max of f(mix) - mix of f, clipped at 0
};

inline ConvexityReport spot_check_convexity(const PenaltyFunction& alpha, std::size_t n,
                                            std::uint64_t seed = 0xc0ffee,
                                            std::size_t pairs = 200) {
  ConvexityReport report;
  if (n < 2) return report;
  SplitMix64 rng(seed);
  std::vector<double> mix(n);
  for (std::size_t k = 0; k < pairs; ++k) {
    const auto a = rng.simplex_point(n);
    const auto b = rng.simplex_point(n);
    const double fa = alpha.value(a);
    const double fb = alpha.value(b);
    if (!std::isfinite(fa) || !std::isfinite(fb)) {
      report.passed = false;
      report.worst_violation = std::numeric_limits<double>::infinity();
      return report;
    }
    for (double lam : {0.25, 0.5, 0.75}) {
      for (std::size_t i = 0; i < n; ++i) mix[i] = lam * a[i] + (1.0 - lam) * b[i];
      const double gap = alpha.value(mix) - (lam * fa + (1.0 - lam) * fb);
      if (!(gap <= 1e-9)) report.passed = false;
      if (!std::isfinite(gap)) {
        report.worst_violation = std::numeric_limits<double>::infinity();
        return report;
      }
      report.worst_violation = std::max(report.worst_violation, gap);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct SolveResult {
  ProbVector prices;
  double cost;
  std::size_t iterations;
  double lambda;           // multiplier of sum p = 1
  std::vector<double> mu;  // multipliers of p_i >= 0
};

inline constexpr std::size_t kMaxSolverIterations = 100000;

namespace detail {

struct AscentResult {
  std::vector<double> point;
  double value;
  std::size_t iterations;
  bool converged;
};

// Projected gradient ascent over the simplex with backtracking. Trial points
// where the objective or its gradient is not finite are treated as outside
// the domain and the step is shortened.
template <class Objective, class Gradient>
AscentResult projected_ascent(Objective&& f, Gradient&& grad, std::vector<double> p,
                              std::size_t max_iter, double tol) {
  const auto all_finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };

  double fp = f(p);
  std::vector<double> g = grad(p);
  double step = 1.0;
  std::vector<double> trial(p.size());

  for (std::size_t k = 1; k <= max_iter; ++k) {
    if (!std::isfinite(fp) || !all_finite(g)) return {std::move(p), fp, k, false};

    for (std::size_t i = 0; i < p.size(); ++i) trial[i] = p[i] + g[i];
    const auto unit = project_to_simplex(trial);
    double stationarity = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) stationarity += (unit[i] - p[i]) * (unit[i] - p[i]);
    if (std::sqrt(stationarity) < tol) return {std::move(p), fp, k, true};

    step = std::min(step * 2.0, 1e6);
    bool accepted = false;
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fp));
    for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
      for (std::size_t i = 0; i < p.size(); ++i) trial[i] = p[i] + step * g[i];
      auto cand = project_to_simplex(trial).values();
      const double fc = f(cand);
      if (!std::isfinite(fc)) continue;
      double ascent = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) ascent += g[i] * (cand[i] - p[i]);
      const bool sufficient = fc >= fp + 1e-4 * ascent;
      if (!sufficient && fc < fp - slack) continue;
      auto gc = grad(cand);
      if (!all_finite(gc)) continue;
      if (!sufficient) {
        // Within rounding of fp: values cannot rank the points, so accept only
        // if the slope at the candidate still points forward. The move sums to
        // zero, so the gradient's mean is dropped to keep it out of the sum.
        const double mean = std::accumulate(gc.begin(), gc.end(), 0.0) / static_cast<double>(gc.size());
        double slope = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) slope += (gc[i] - mean) * (cand[i] - p[i]);
        if (!(slope > 0.0)) continue;
      }
      p = std::move(cand);
      fp = fc;
      g = std::move(gc);
      accepted = true;
      break;
    }
    // No representable ascent step left: the iterate is stationary to
    // working precision.
    if (!accepted) return {std::move(p), fp, k, std::sqrt(stationarity) < 1e-6};
  }
  return {std::move(p), fp, max_iter, false};
}

inline void kkt_from_gradient(std::span<const double> q, std::span<const double> p,
                              std::span<const double> grad_alpha, double& lambda,
                              std::vector<double>& mu) {
  const std::size_t n = q.size();
  mu.assign(n, 0.0);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] > 1e-12) {
      sum += q[i] - grad_alpha[i];
      ++count;
    }
  }
  lambda = count ? sum / static_cast<double>(count) : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (p[i] <= 1e-12) mu[i] = lambda - (q[i] - grad_alpha[i]);
}

}  // namespace detail

/// Unique (p, mu) of the quadratic market's KKT system,
///   p_i = 1/N + (q_i + mu_i)/(2b) - sum_j (q_j + mu_j)/(2bN),
///   p_i mu_i = 0,  p >= 0,  mu >= 0,
/// by active-set elimination: solve on the current support, drop the most
/// negative price, repeat. At most N-1 drops.
struct QuadPrices {
  ProbVector prices;
  std::vector<double> mu;
  double lambda;
};

inline QuadPrices quad_price_closed_form(double b, const QuantityVector& q) {
  if (!(b > 0.0)) throw InvalidParameter("quad_price_closed_form requires b > 0");
  const std::size_t n = q.size();
  if (n == 0) throw InvalidInput("quad_price_closed_form: empty quantity vector");

  std::vector<bool> in_support(n, true);
  std::size_t support = n;
  std::vector<double> p(n, 0.0);
  for (;;) {
    double sum_q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (in_support[i]) sum_q += q[i];
    const double m = static_cast<double>(support);
    std::size_t worst = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_support[i]) {
        p[i] = 0.0;
        continue;
      }
      p[i] = 1.0 / m + q[i] / (2.0 * b) - sum_q / (2.0 * b * m);
      if (p[i] < 0.0 && (worst == n || p[i] < p[worst])) worst = i;
    }
    if (worst == n) break;
    in_support[worst] = false;
    --support;
  }

  double lambda = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (in_support[i]) lambda += q[i] - 2.0 * b * p[i];
  lambda /= static_cast<double>(support);

  std::vector<double> mu(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (!in_support[i]) mu[i] = lambda - q[i];
  return {ProbVector(std::move(p)), std::move(mu), lambda};
}

/// Maximizes p·q - alpha(p) over the simplex. Returns the maximizer (the
/// price vector), the optimum (the cost) and KKT multipliers.
inline SolveResult maximize(const PenaltyFunction& alpha, const QuantityVector& q) {
  const std::size_t n = q.size();
  if (n == 0) throw InvalidInput("maximize: empty quantity vector");

  if (n == 1) {
    const ProbVector point = ProbVector::uniform(1);
    const double a = alpha.value(point);
    const auto g = alpha.gradient(point);
    const double lambda = std::isfinite(g[0]) ? q[0] - g[0] : 0.0;
    return {point, q[0] - a, 0, lambda, {0.0}};
  }

  switch (alpha.kind()) {
    case PenaltyKind::entropic: {
      const double b = alpha.scale();
      const double top = *std::max_element(q.values().begin(), q.values().end());
      std::vector<double> e(n);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        e[i] = std::exp((q[i] - top) / b);
        sum += e[i];
      }
      for (double& x : e) x /= sum;
      const double cost = top + b * std::log(sum);
      return {ProbVector(std::move(e)), cost, 0, cost - b, std::vector<double>(n, 0.0)};
    }
    case PenaltyKind::quadratic: {
      const double b = alpha.scale();
      std::vector<double> target(n);
      for (std::size_t i = 0; i < n; ++i) target[i] = q[i] / (2.0 * b);
      ProbVector p = project_to_simplex(target);
      const double cost = dot(p.span(), q.span()) - alpha.value(p);
      double lambda = 0.0;
      std::vector<double> mu;
      detail::kkt_from_gradient(q.span(), p.span(), alpha.gradient(p), lambda, mu);
      return {std::move(p), cost, 0, lambda, std::move(mu)};
    }
    case PenaltyKind::custom:
      break;
  }

  // Generic path. Start from the uniform point, or the first finite interior
  // point if alpha is infinite there.
  std::vector<double> start(n, 1.0 / static_cast<double>(n));
  if (!std::isfinite(alpha.value(start))) {
    SplitMix64 rng(n);
    bool found = false;
    for (int attempt = 0; attempt < 64 && !found; ++attempt) {
      start = rng.simplex_point(n);
      found = std::isfinite(alpha.value(start));
    }
    if (!found) throw InvalidPenalty("penalty is not finite anywhere in the simplex interior");
  }

  const auto objective = [&](const std::vector<double>& p) {
    return dot(p, q.span()) - alpha.value(p);
  };
  const auto gradient = [&](const std::vector<double>& p) {
    auto g = alpha.gradient(p);
    for (std::size_t i = 0; i < n; ++i) g[i] = q[i] - g[i];
    return g;
  };
  auto run = detail::projected_ascent(objective, gradient, std::move(start), kMaxSolverIterations,
                                      kTol.solver_eps);
  if (!run.converged)
    throw SolverDiverged("penalty solver did not converge after " + std::to_string(run.iterations) +
                             " iterations",
                         run.point);

  ProbVector p(run.point);
  double lambda = 0.0;
  std::vector<double> mu;
  detail::kkt_from_gradient(q.span(), p.span(), alpha.gradient(p), lambda, mu);
  return {std::move(p), run.value, run.iterations, lambda, std::move(mu)};
}

// ---------------------------------------------------------------------------
// Penalty range
// ---------------------------------------------------------------------------

struct PenaltyRange {
  double value;
  bool estimate;  // true: numeric lower bound on the true range
};

/// sup alpha - inf alpha over the n-simplex.
inline PenaltyRange penalty_range(const PenaltyFunction& alpha, std::size_t n) {
  if (n == 0) throw InvalidInput("penalty_range: empty simplex");
  if (n == 1) return {0.0, false};
  const double nd = static_cast<double>(n);
  switch (alpha.kind()) {
    case PenaltyKind::entropic: return {alpha.scale() * std::log(nd), false};
    case PenaltyKind::quadratic: return {alpha.scale() * (nd - 1.0) / nd, false};
    case PenaltyKind::custom: break;
  }

  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  const auto consider = [&](double v) {
    if (std::isnan(v)) return;
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  };
  for (std::size_t i = 0; i < n; ++i) consider(alpha.value(ProbVector::vertex(n, i)));
  consider(alpha.value(ProbVector::uniform(n)));

  const auto up = [&](const std::vector<double>& p) { return alpha.value(p); };
  const auto up_grad = [&](const std::vector<double>& p) { return alpha.gradient(p); };
  const auto down = [&](const std::vector<double>& p) { return -alpha.value(p); };
  const auto down_grad = [&](const std::vector<double>& p) {
    auto g = alpha.gradient(p);
    for (double& x : g) x = -x;
    return g;
  };

  SplitMix64 rng(0x7a11 + n);
  for (int start = 0; start < 50; ++start) {
    const auto p0 = rng.simplex_point(n);
    if (!std::isfinite(alpha.value(p0))) continue;
    consider(detail::projected_ascent(up, up_grad, p0, 2000, kTol.solver_eps).value);
    consider(-detail::projected_ascent(down, down_grad, p0, 2000, kTol.solver_eps).value);
  }
  return {hi - lo, true};
}

}  // namespace marketlearn
