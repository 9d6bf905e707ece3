#pragma once

// Loss-sequence generators, experiment orchestration and the full
// bound-verification sweep behind the command-line tool.

#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "marketlearn/core.hpp"
#include "marketlearn/cost_market.hpp"
#include "marketlearn/learning.hpp"
#include "marketlearn/penalty.hpp"
#include "marketlearn/random.hpp"
#include "marketlearn/scoring_market.hpp"

namespace marketlearn {

// ---------------------------------------------------------------------------
// Loss generators
// ---------------------------------------------------------------------------

enum class GeneratorKind { alternating, bernoulli, uniform, adaptive };

inline GeneratorKind parse_generator(const std::string& s) {
  if (s == "alt") return GeneratorKind::alternating;
  if (s == "bernoulli") return GeneratorKind::bernoulli;
  if (s == "uniform") return GeneratorKind::uniform;
  if (s == "adaptive") return GeneratorKind::adaptive;
  throw InvalidParameter("unknown generator '" + s + "'");
}

struct LossGenerator {
  GeneratorKind kind = GeneratorKind::uniform;
  std::uint64_t seed = 1;
  std::size_t experts = 2;
  std::size_t rounds = 1;
  std::vector<double> bernoulli_p;  // per expert; drawn from the seed when empty
};

/// Materializes a loss stream. The adaptive adversary gives loss 1 to the
/// expert `shadow` currently weights most (lowest index on ties) and 0 to the
/// rest, so it needs a learner to shadow.
inline LossMatrix generate(const LossGenerator& gen, const LearnerConfig* shadow = nullptr) {
  const std::size_t n = gen.experts;
  const std::size_t t_max = gen.rounds;
  if (n < 2 || t_max < 1) throw InvalidParameter("generator needs N >= 2 and T >= 1");
  std::vector<double> data(n * t_max, 0.0);
  SplitMix64 rng(gen.seed);

  switch (gen.kind) {
    case GeneratorKind::alternating:
      if (n != 2) throw InvalidParameter("alternating adversary is defined for N = 2 only");
      data[0] = 0.5;
      for (std::size_t t = 1; t < t_max; ++t) data[t * 2 + (t % 2 == 1 ? 1 : 0)] = 1.0;
      break;
    case GeneratorKind::bernoulli: {
      std::vector<double> p = gen.bernoulli_p;
      if (p.empty())
        for (std::size_t i = 0; i < n; ++i) p.push_back(rng.uniform(0.1, 0.9));
      if (p.size() != n) throw InvalidParameter("bernoulli_p must have one entry per expert");
      for (std::size_t t = 0; t < t_max; ++t)
        for (std::size_t i = 0; i < n; ++i) data[t * n + i] = rng.uniform() < p[i] ? 1.0 : 0.0;
      break;
    }
    case GeneratorKind::uniform:
      for (double& x : data) x = rng.uniform();
      break;
    case GeneratorKind::adaptive: {
      if (!shadow) throw InvalidParameter("adaptive adversary needs a learner to shadow");
      LearnerState state = start_learner(*shadow, n);
      std::vector<double> row(n);
      for (std::size_t t = 0; t < t_max; ++t) {
        const auto& w = state.weights;
        std::size_t top = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (w[i] > w[top]) top = i;
        std::fill(row.begin(), row.end(), 0.0);
        row[top] = 1.0;
        std::copy(row.begin(), row.end(), data.begin() + static_cast<std::ptrdiff_t>(t * n));
        state = step_learner(state, row);
      }
      break;
    }
  }
  return LossMatrix(t_max, n, std::move(data));
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

enum class Algo { wm, ogd, ftl, reduction };
enum class MarketKind { lmsr, quad };

inline Algo parse_algo(const std::string& s) {
  if (s == "wm") return Algo::wm;
  if (s == "ogd") return Algo::ogd;
  if (s == "ftl") return Algo::ftl;
  if (s == "reduction") return Algo::reduction;
  throw InvalidParameter("unknown algorithm '" + s + "'");
}

inline MarketKind parse_market(const std::string& s) {
  if (s == "lmsr") return MarketKind::lmsr;
  if (s == "quad") return MarketKind::quad;
  throw InvalidParameter("unknown market '" + s + "'");
}

inline CostFunctionPtr make_market(MarketKind kind, double b, std::size_t n) {
  return kind == MarketKind::lmsr ? make_lmsr(b, n) : make_quad(b, n);
}

/// B/eps + eps·phi·T/2: the regret bound of the market-derived learner at an
/// arbitrary share scale eps. Minimized at eps = tune_epsilon(B, phi, T).
inline double regret_bound_at(double loss_bound, double phi, std::size_t rounds, double eps) {
  return loss_bound / eps + eps * phi * static_cast<double>(rounds) / 2.0;
}

struct ExperimentConfig {
  Algo algo = Algo::reduction;
  MarketKind market = MarketKind::lmsr;
  double b = 1.0;
  std::size_t n = 2;
  std::size_t t = 1000;
  std::optional<double> rate;  // eps or eta override
  GeneratorKind generator = GeneratorKind::uniform;
  std::uint64_t seed = 1;
  std::string out;  // RegretTrace CSV path; empty writes nothing
};

struct LearnerSetup {
  LearnerConfig config;
  std::optional<double> bound;
};

/// Learner and regret bound for one experiment. WM is FTRL with negative
/// entropy and eta = sqrt(log N / T); OGD is FTRL with b·sum w^2, tuned like
/// the quadratic market.
inline LearnerSetup setup_learner(const ExperimentConfig& cfg) {
  const double nd = static_cast<double>(cfg.n);
  switch (cfg.algo) {
    case Algo::ftl:
      return {FtlConfig{}, std::nullopt};
    case Algo::wm: {
      const double loss = std::log(nd);
      const double eta = cfg.rate.value_or(std::sqrt(std::log(nd) / static_cast<double>(cfg.t)));
      return {FtrlConfig{PenaltyFunction::entropic(1.0), eta}, regret_bound_at(loss, 2.0, cfg.t, eta)};
    }
    case Algo::ogd: {
      const double loss = cfg.b * (nd - 1.0) / nd;
      const double phi = (nd * nd - 1.0) / (2.0 * cfg.b);
      const double eta = cfg.rate.value_or(tune_epsilon(loss, phi, cfg.t));
      return {FtrlConfig{PenaltyFunction::quadratic(cfg.b), eta}, regret_bound_at(loss, phi, cfg.t, eta)};
    }
    case Algo::reduction: {
      auto market = make_market(cfg.market, cfg.b, cfg.n);
      const double loss = *market->loss_bound;
      const double phi = *market->phi_bound;
      const double eps = cfg.rate.value_or(tune_epsilon(loss, phi, cfg.t));
      return {ReductionConfig{std::move(market), eps}, regret_bound_at(loss, phi, cfg.t, eps)};
    }
  }
  throw InvalidParameter("unknown algorithm");
}

struct ExperimentSummary {
  RegretTrace trace;
  std::optional<double> bound;
  bool passed = true;
  std::string status;  // pass | fail | expected-linear

  double final_regret() const { return trace.final_regret(); }

  std::string summary_line() const {
    return format_number(final_regret()) + ',' + (bound ? format_number(*bound) : std::string()) +
           ',' + status;
  }
};

inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  const LearnerSetup setup = setup_learner(cfg);
  const LossGenerator gen{cfg.generator, cfg.seed, cfg.n, cfg.t, {}};
  const LossMatrix losses = generate(gen, &setup.config);

  ExperimentSummary summary{run_learner(setup.config, losses), setup.bound, true, "pass"};
  if (cfg.algo == Algo::ftl) {
    summary.status = "expected-linear";
  } else if (setup.bound && summary.final_regret() > *setup.bound + 1e-6) {
    summary.passed = false;
    summary.status = "fail";
  }

  if (!cfg.out.empty()) {
    std::ofstream file(cfg.out, std::ios::binary);
    if (!file) throw Error("cannot open '" + cfg.out + "' for writing");
    write_trace_csv(file, summary.trace, setup.bound);
    if (!file) throw Error("failed writing '" + cfg.out + "'");
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Market sessions
// ---------------------------------------------------------------------------

struct SessionResult {
  std::vector<SessionRow> rows;
  double max_maker_loss = 0.0;  // over every step and outcome
  double loss_bound = 0.0;
};

/// Random single-outcome trades (shares uniform in [-2b, 2b]) against a fresh
/// market. Tracks the worst realized maker loss along the way.
inline SessionResult simulate_session(const CostFunctionPtr& cf, std::size_t trades,
                                      std::uint64_t seed) {
  SplitMix64 rng(seed);
  SessionResult result;
  result.loss_bound = cf->loss_bound.value_or(std::numeric_limits<double>::infinity());
  MarketState state = open_market(cf);
  for (std::size_t step = 1; step <= trades; ++step) {
    const std::size_t outcome = rng.index(cf->outcomes);
    const double shares = rng.uniform(-2.0, 2.0) * cf->liquidity;
    auto [next, receipt] = trade(state, QuantityVector::zeros(cf->outcomes).bumped(outcome, shares));
    state = std::move(next);
    for (std::size_t i = 0; i < cf->outcomes; ++i)
      result.max_maker_loss = std::max(result.max_maker_loss, realized_maker_loss(state, i));
    result.rows.push_back({step, outcome, shares, receipt.payment, receipt.prices_after});
  }
  return result;
}

/// The scoring rule whose market is `kind`: log rule for the LMSR, quadratic
/// rule for the quadratic market.
inline ScoringRule matching_rule(MarketKind kind, double b) {
  return kind == MarketKind::lmsr ? make_log_rule(b) : make_quadratic_rule(b);
}

/// Replays a cost-function session as report changes in the matching scoring
/// rule market and writes the MSR log. While every price stays positive, each
/// row's payoff vector equals that trade's shares minus its payment.
inline void write_msr_mirror(std::ostream& out, const ScoringRule& rule, std::size_t n,
                             const SessionResult& session) {
  write_msr_header(out, n);
  MsrState state = open_msr(rule, ProbVector::uniform(n));
  for (const auto& row : session.rows) {
    auto [next, payoff] = msr_trade(state, row.prices);
    state = std::move(next);
    write_msr_row(out, row.step, row.prices, payoff);
  }
}

// ---------------------------------------------------------------------------
// Verification sweep
// ---------------------------------------------------------------------------

struct CheckLine {
  std::string name;
  double observed;
  std::string relation;  // "<=" or ">="
  double bound;

  bool passed() const { return relation == "<=" ? observed <= bound : observed >= bound; }
};

inline void write_check_lines(std::ostream& out, const std::vector<CheckLine>& lines) {
  out << "check,observed,relation,bound,status\n";
  for (const auto& l : lines)
    out << l.name << ',' << format_number(l.observed) << ',' << l.relation << ','
        << format_number(l.bound) << ',' << (l.passed() ? "pass" : "fail") << '\n';
}

inline bool all_passed(const std::vector<CheckLine>& lines) {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.passed(); });
}

namespace detail {

inline std::string tag(double b, std::size_t n) {
  return ":b=" + format_number(b) + ":n=" + std::to_string(n);
}

// Two experts follow the alternating pattern; every other expert always loses.
inline LossMatrix alternating_padded(std::size_t n, std::size_t rounds) {
  const LossMatrix two = generate({GeneratorKind::alternating, 0, 2, rounds, {}});
  std::vector<double> data(n * rounds, 1.0);
  for (std::size_t t = 0; t < rounds; ++t) {
    data[t * n] = two(t, 0);
    data[t * n + 1] = two(t, 1);
  }
  return LossMatrix(rounds, n, std::move(data));
}

inline double worst_regret(const LearnerConfig& config, GeneratorKind kind, std::size_t n,
                           std::size_t rounds, std::uint64_t seed) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const LossMatrix losses = kind == GeneratorKind::alternating
                                  ? alternating_padded(n, rounds)
                                  : generate({kind, seed * 1000 + s, n, rounds, {}}, &config);
    worst = std::max(worst, run_learner(config, losses).final_regret());
  }
  return worst;
}

}  // namespace detail

/// Runs every bound and equivalence check in the library with fixed sizes
/// and the given seed. One line per check, with both sides of its inequality.
inline std::vector<CheckLine> verify_all(std::uint64_t seed) {
  std::vector<CheckLine> lines;
  const auto add = [&](std::string name, double observed, const char* rel, double bound) {
    lines.push_back({std::move(name), observed, rel, bound});
  };
  const GeneratorKind kinds[] = {GeneratorKind::alternating, GeneratorKind::bernoulli,
                                 GeneratorKind::uniform, GeneratorKind::adaptive};
  const char* kind_names[] = {"alt", "bernoulli", "uniform", "adaptive"};

  // Regret of market-derived learners.
  {
    const std::size_t n = 10, rounds = 10000;
    const auto lmsr = make_lmsr(1.0, n);
    const double eps = std::sqrt(std::log(double(n)) / double(rounds));
    const LearnerConfig wm = ReductionConfig{lmsr, eps};
    const double bound = 2.0 * std::sqrt(double(rounds) * std::log(double(n)));
    for (int k = 0; k < 4; ++k)
      add(std::string("wm_regret:") + kind_names[k],
          detail::worst_regret(wm, kinds[k], n, rounds, seed), "<=", bound + 1e-6);
  }
  {
    const std::size_t n = 5, rounds = 10000;
    const auto quad = make_quad(1.0, n);
    const LearnerConfig ogd =
        ReductionConfig{quad, tune_epsilon(*quad->loss_bound, *quad->phi_bound, rounds)};
    for (int k = 0; k < 4; ++k)
      add(std::string("quad_reduction_regret:") + kind_names[k],
          detail::worst_regret(ogd, kinds[k], n, rounds, seed), "<=",
          double(n) * std::sqrt(double(rounds)) + 1e-6);
  }
  {
    const std::size_t rounds = 1000;
    const LossMatrix alt = generate({GeneratorKind::alternating, seed, 2, rounds, {}});
    add("ftl_alternating_regret", run_learner(FtlConfig{}, alt).final_regret(), ">=", 450.0);
    const double eta = std::sqrt(std::log(2.0) / double(rounds));
    add("wm_alternating_regret",
        run_learner(FtrlConfig{PenaltyFunction::entropic(1.0), eta}, alt).final_regret(), "<=",
        2.0 * std::sqrt(double(rounds) * std::log(2.0)));
  }

  // Worst-case maker loss.
  for (const auto& cf : {make_lmsr(1.0, 4), make_quad(1.0, 4)}) {
    double worst = 0.0;
    SplitMix64 rng(seed);
    for (int session = 0; session < 100; ++session) {
      MarketState state = open_market(cf);
      for (int step = 0; step < 200; ++step) {
        state = trade(state, QuantityVector(rng.box(4, 5.0))).first;
        for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, realized_maker_loss(state, i));
      }
    }
    add(cf->name + "_max_maker_loss", worst, "<=", *cf->loss_bound + 1e-6);
  }

  // Price stability.
  for (double b : {0.5, 1.0, 5.0})
    for (std::size_t n : {2u, 3u, 10u}) {
      const auto lmsr = make_lmsr(b, n);
      const auto quad = make_quad(b, n);
      add("lmsr_phi_estimate" + detail::tag(b, n), estimate_phi(*lmsr, 10000, seed), "<=",
          *lmsr->phi_bound + 1e-3);
      add("quad_phi_estimate" + detail::tag(b, n), estimate_phi(*quad, 10000, seed), "<=",
          *quad->phi_bound + 1e-3);
    }

  // Linearization gap.
  for (const auto& cf : {make_lmsr(1.0, 3), make_quad(1.0, 3)})
    for (double eps : {0.01, 0.1, 1.0}) {
      const auto rep = verify_pricing_diff_bound(*cf, eps, 10000, seed);
      add(cf->name + "_pricing_gap:eps=" + format_number(eps), rep.max_gap, "<=", rep.bound);
    }

  // Scoring rule <-> cost function.
  {
    const auto log_rep = verify_equivalence(make_log_rule(1.0), *make_lmsr(1.0, 3), 500, seed);
    const auto quad_rep = verify_equivalence(make_quadratic_rule(1.0), *make_quad(1.0, 3), 500, seed);
    add("msr_cost_equivalence_max_gap", std::max(log_rep.max_profit_gap, quad_rep.max_profit_gap),
        "<=", 1e-8);
    add("msr_price_reachability_max_error",
        std::max(log_rep.max_reachability_error, quad_rep.max_reachability_error), "<=", 1e-6);
  }
  {
    double worst = 0.0;
    SplitMix64 rng(seed);
    for (const auto& rule : {make_log_rule(1.0), make_quadratic_rule(1.0)}) {
      const PenaltyFunction alpha = penalty_from_rule(rule);
      const ScoringRule back = rule_from_penalty(alpha);
      const PenaltyFunction again = penalty_from_rule(back);
      for (int k = 0; k < 100; ++k) {
        const auto p = rng.simplex_point(3);
        worst = std::max(worst, max_abs_diff(rule.scores(p), back.scores(p)));
        worst = std::max(worst, std::abs(alpha.value(p) - again.value(p)));
      }
    }
    add("penalty_rule_roundtrip_max_error", worst, "<=", 1e-9);
  }

  // Market-derived learner == FTRL.
  {
    double worst = 0.0;
    SplitMix64 rng(seed);
    for (int k = 0; k < 1000; ++k) {
      const std::size_t n = 2 + rng.index(9);
      const double b = rng.uniform(0.5, 5.0);
      const double eps = rng.uniform(0.01, 1.0);
      std::vector<double> losses(n);
      for (double& x : losses) x = rng.uniform(0.0, 50.0);
      for (const auto& cf : {make_lmsr(b, n), make_quad(b, n)}) {
        const auto a = market_reduction_weights(*cf, eps, losses);
        const auto f = ftrl_weights(*cf->penalty, eps, losses);
        worst = std::max(worst, max_abs_diff(a.span(), f.span()));
      }
    }
    add("reduction_vs_ftrl_max_diff", worst, "<=", 1e-8);

    const std::size_t n = 10, rounds = 2000;
    const LossMatrix losses = generate({GeneratorKind::uniform, seed, n, rounds, {}});
    const double root = std::sqrt(std::log(double(n)) / double(rounds));
    const auto small = run_learner(ReductionConfig{make_lmsr(0.5, n), 0.5 * root}, losses);
    const auto large = run_learner(ReductionConfig{make_lmsr(5.0, n), 5.0 * root}, losses);
    double drift = 0.0;
    for (std::size_t t = 0; t < small.weights.size(); ++t)
      drift = std::max(drift, max_abs_diff(small.weights[t].span(), large.weights[t].span()));
    add("wm_weight_b_invariance", drift, "<=", 1e-10);
  }

  // Validity.
  for (const auto& cf : {make_lmsr(1.0, 3), make_quad(1.0, 3)}) {
    const auto rep = check_validity(*cf, 1000, seed);
    add(cf->name + "_validity_failures",
        double(rep.differentiability.failures + rep.monotonicity.failures +
               rep.translation.failures),
        "<=", 0.0);
  }
  {
    CostFunction broken;
    broken.name = "sum_of_squares";
    broken.outcomes = 3;
    broken.cost = [](const QuantityVector& q) { return dot(q.span(), q.span()); };
    broken.prices = [](const QuantityVector& q) { return ProbVector::uniform(q.size()); };
    const auto rep = check_validity(broken, 1000, seed);
    add("broken_cost_translation_failures", double(rep.translation.failures), ">=", 1.0);
  }

  // Solver oracles.
  {
    double worst = 0.0;
    for (std::size_t n : {2u, 3u, 4u}) {
      SplitMix64 rng(seed + n);
      for (int k = 0; k < 5; ++k) {
        const QuantityVector q(rng.box(n, 3.0));
        for (const auto& alpha : {PenaltyFunction::entropic(1.0), PenaltyFunction::quadratic(1.0)}) {
          const double best = maximize(alpha, q).cost;
          detail::for_each_grid_point(n, 100, [&](std::span<const double> p) {
            worst = std::max(worst, dot(p, q.span()) - alpha.value(p) - best);
          });
        }
      }
    }
    add("solver_grid_dominance_violation", worst, "<=", 1e-6);

    double diff = 0.0;
    SplitMix64 rng(seed);
    for (int k = 0; k < 1000; ++k) {
      const std::size_t n = 2 + rng.index(9);
      const double b = rng.uniform(0.2, 5.0);
      const QuantityVector q(rng.box(n, 10.0));
      const auto closed = quad_price_closed_form(b, q);
      const auto generic = maximize(PenaltyFunction::quadratic(b), q);
      diff = std::max(diff, max_abs_diff(closed.prices.span(), generic.prices.span()));
    }
    add("quad_closed_form_vs_solver_max_diff", diff, "<=", 1e-8);
  }
  return lines;
}

}  // namespace marketlearn
