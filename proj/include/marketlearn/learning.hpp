#pragma once

// Learning from expert advice. Every learner here picks weights w_t from the
// cumulative losses L_{t-1} only:
//
//   FTRL:       w_t = argmin_w  w·L_{t-1} + R(w)/eta
//   reduction:  w_t = p(-eps·L_{t-1})  for a cost-function market's prices p
//   FTL:        uniform over the experts with least cumulative loss

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "marketlearn/core.hpp"
#include "marketlearn/cost_market.hpp"
#include "marketlearn/penalty.hpp"

namespace marketlearn {

struct FtrlConfig {
  PenaltyFunction regularizer;
  double eta;
};

struct ReductionConfig {
  CostFunctionPtr market;
  double epsilon;
};

struct FtlConfig {};

using LearnerConfig = std::variant<FtrlConfig, ReductionConfig, FtlConfig>;

inline ProbVector ftrl_weights(const PenaltyFunction& regularizer, double eta,
                               std::span<const double> cumulative_losses) {
  if (!(eta > 0.0)) throw InvalidParameter("ftrl_weights requires eta > 0");
  std::vector<double> q(cumulative_losses.begin(), cumulative_losses.end());
  for (double& x : q) x = -x;
  return maximize(regularizer.scaled(1.0 / eta), QuantityVector(std::move(q))).prices;
}

inline ProbVector market_reduction_weights(const CostFunction& cf, double epsilon,
                                           std::span<const double> cumulative_losses) {
  if (!(epsilon > 0.0)) throw InvalidParameter("market_reduction_weights requires epsilon > 0");
  std::vector<double> q(cumulative_losses.begin(), cumulative_losses.end());
  for (double& x : q) x *= -epsilon;
  return cf.prices(QuantityVector(std::move(q)));
}

inline ProbVector ftl_weights(std::span<const double> cumulative_losses) {
  constexpr double kTie = 1e-12;
  const double best = *std::min_element(cumulative_losses.begin(), cumulative_losses.end());
  std::vector<double> w(cumulative_losses.size(), 0.0);
  double leaders = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (cumulative_losses[i] <= best + kTie) {
      w[i] = 1.0;
      leaders += 1.0;
    }
  for (double& x : w) x /= leaders;
  return ProbVector(std::move(w));
}

inline ProbVector learner_weights(const LearnerConfig& config,
                                  std::span<const double> cumulative_losses) {
  return std::visit(
      [&](const auto& c) -> ProbVector {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FtrlConfig>)
          return ftrl_weights(c.regularizer, c.eta, cumulative_losses);
        else if constexpr (std::is_same_v<C, ReductionConfig>)
          return market_reduction_weights(*c.market, c.epsilon, cumulative_losses);
        else
          return ftl_weights(cumulative_losses);
      },
      config);
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

struct LearnerState {
  LearnerConfig algo;
  std::vector<double> cumulative_losses;
  std::size_t round = 0;  // rounds observed so far
  ProbVector weights;     // weights for the next round
};

inline LearnerState start_learner(LearnerConfig algo, std::size_t experts) {
  if (experts == 0) throw InvalidParameter("learner needs at least one expert");
  std::vector<double> zero(experts, 0.0);
  ProbVector w = learner_weights(algo, zero);
  return {std::move(algo), std::move(zero), 0, std::move(w)};
}

inline LearnerState step_learner(const LearnerState& state, std::span<const double> losses) {
  if (losses.size() != state.cumulative_losses.size())
    throw InvalidInput("step_learner: loss row dimension mismatch");
  LearnerState next{state.algo, state.cumulative_losses, state.round + 1, state.weights};
  for (std::size_t i = 0; i < losses.size(); ++i) next.cumulative_losses[i] += losses[i];
  next.weights = learner_weights(next.algo, next.cumulative_losses);
  return next;
}

// ---------------------------------------------------------------------------
// Regret traces
// ---------------------------------------------------------------------------

struct RegretTrace {
  LossMatrix losses;
  std::vector<ProbVector> weights;          // w_1 .. w_{T+1}
  std::vector<double> alg_loss;             // instantaneous w_t·l_t
  std::vector<double> cumulative_alg_loss;  // L_{A,t}
  std::vector<double> best_expert_loss;     // min_i L_{i,t}
  std::vector<double> regret;               // L_{A,t} - min_i L_{i,t}
  std::vector<std::size_t> period_starts;   // rounds where the learner restarted

  std::size_t rounds() const noexcept { return alg_loss.size(); }
  double final_regret() const { return regret.empty() ? 0.0 : regret.back(); }
};

namespace detail {

inline void fill_accounting(RegretTrace& trace) {
  const std::size_t n = trace.losses.experts();
  std::vector<double> cumulative(n, 0.0);
  double alg = 0.0;
  for (std::size_t t = 0; t < trace.losses.rounds(); ++t) {
    const auto row = trace.losses.row(t);
    const double loss = dot(trace.weights[t].span(), row);
    alg += loss;
    for (std::size_t i = 0; i < n; ++i) cumulative[i] += row[i];
    const double best = *std::min_element(cumulative.begin(), cumulative.end());
    trace.alg_loss.push_back(loss);
    trace.cumulative_alg_loss.push_back(alg);
    trace.best_expert_loss.push_back(best);
    trace.regret.push_back(alg - best);
  }
}

}  // namespace detail

inline RegretTrace run_learner(const LearnerConfig& config, const LossMatrix& losses) {
  RegretTrace trace;
  trace.losses = losses;
  trace.period_starts.push_back(0);
  trace.weights.reserve(losses.rounds() + 1);
  LearnerState state = start_learner(config, losses.experts());
  trace.weights.push_back(state.weights);
  for (std::size_t t = 0; t < losses.rounds(); ++t) {
    state = step_learner(state, losses.row(t));
    trace.weights.push_back(state.weights);
  }
  detail::fill_accounting(trace);
  return trace;
}

/// Runs with unknown horizon: periods of length 1, 2, 4, ..., each with a
/// fresh learner tuned for its own length by `family`. The final period is
/// truncated to the rounds that remain.
inline RegretTrace run_with_doubling(const std::function<LearnerConfig(std::size_t)>& family,
                                     const LossMatrix& losses) {
  RegretTrace trace;
  trace.losses = losses;
  const std::size_t n = losses.experts();
  std::size_t start = 0;
  std::size_t length = 1;
  std::optional<LearnerState> state;
  while (start < losses.rounds()) {
    trace.period_starts.push_back(start);
    state = start_learner(family(length), n);
    const std::size_t end = std::min(losses.rounds(), start + length);
    for (std::size_t t = start; t < end; ++t) {
      trace.weights.push_back(state->weights);
      state = step_learner(*state, losses.row(t));
    }
    start = end;
    length *= 2;
  }
  trace.weights.push_back(state ? state->weights : ProbVector::uniform(n));
  detail::fill_accounting(trace);
  return trace;
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// Share-scale eps = sqrt(2B / (phi T)) that balances maker loss B against
/// price drift phi over T rounds.
inline double tune_epsilon(double loss_bound, double phi, std::size_t rounds) {
  if (!(loss_bound > 0.0) || !(phi > 0.0) || rounds == 0)
    throw InvalidParameter("tune_epsilon requires B > 0, phi > 0, T >= 1");
  return std::sqrt(2.0 * loss_bound / (phi * static_cast<double>(rounds)));
}

/// Regret bound sqrt(2 B phi T) of the market-derived learner with tuned eps.
inline double reduction_regret_bound(double loss_bound, double phi, std::size_t rounds) {
  if (!(loss_bound >= 0.0) || !(phi >= 0.0))
    throw InvalidParameter("reduction_regret_bound requires nonnegative B and phi");
  return std::sqrt(2.0 * loss_bound * phi * static_cast<double>(rounds));
}

/// 2 sqrt(2 lambda range T), the FTRL bound with eta optimized. lambda is the
/// caller's curvature constant for the regularizer.
inline double ftrl_bound(double lambda, double regularizer_range, std::size_t rounds) {
  if (!(lambda > 0.0) || !(regularizer_range > 0.0) || rounds == 0)
    throw InvalidParameter("ftrl_bound requires positive lambda, range and T");
  return 2.0 * std::sqrt(2.0 * lambda * regularizer_range * static_cast<double>(rounds));
}

struct RegretDecomposition {
  double drift_term;  // sum_t sum_i l_{i,t} (w_{i,t} - w_{i,t+1})
  double range_term;  // (R(u) - R(w_1)) / eta, u the best expert's point mass
  double realized_regret;
};

/// Splits an FTRL run's regret bound into its stability and regularizer
/// terms. The comparator u in the range term is the vertex of the best expert
/// in hindsight, which makes drift + range an upper bound on the realized
/// regret. Throws InvalidTrace if the trace was not produced by FTRL with
/// this regularizer and eta.
inline RegretDecomposition ftrl_regret_decomposition(const RegretTrace& trace,
                                                     const PenaltyFunction& regularizer,
                                                     double eta) {
  const std::size_t rounds = trace.rounds();
  const std::size_t n = trace.losses.experts();
  if (trace.weights.size() != rounds + 1 || trace.period_starts.size() > 1)
    throw InvalidTrace("trace is not a single uninterrupted run");

  std::vector<double> cumulative(n, 0.0);
  for (std::size_t t = 0; t <= rounds; ++t) {
    const ProbVector expected = ftrl_weights(regularizer, eta, cumulative);
    if (max_abs_diff(expected.span(), trace.weights[t].span()) > 1e-7)
      throw InvalidTrace("trace weights do not match FTRL with this regularizer and eta");
    if (t < rounds)
      for (std::size_t i = 0; i < n; ++i) cumulative[i] += trace.losses(t, i);
  }

  double drift = 0.0;
  for (std::size_t t = 0; t < rounds; ++t)
    for (std::size_t i = 0; i < n; ++i)
      drift += trace.losses(t, i) * (trace.weights[t][i] - trace.weights[t + 1][i]);

  const std::size_t best = static_cast<std::size_t>(
      std::min_element(cumulative.begin(), cumulative.end()) - cumulative.begin());
  const double range =
      (regularizer.value(ProbVector::vertex(n, best)) - regularizer.value(trace.weights.front())) /
      eta;
  return {drift, range, trace.final_regret()};
}

/// RegretTrace CSV: t,alg_loss,best_expert_loss,regret,bound. alg_loss is the
/// learner's cumulative loss; bound is left empty without a bound.
inline void write_trace_csv(std::ostream& out, const RegretTrace& trace,
                            std::optional<double> bound = std::nullopt) {
  out << "t,alg_loss,best_expert_loss,regret,bound\n";
  const std::string b = bound ? format_number(*bound) : std::string();
  for (std::size_t t = 0; t < trace.rounds(); ++t)
    out << t + 1 << ',' << format_number(trace.cumulative_alg_loss[t]) << ','
        << format_number(trace.best_expert_loss[t]) << ',' << format_number(trace.regret[t])
        << ',' << b << '\n';
}

}  // namespace marketlearn
