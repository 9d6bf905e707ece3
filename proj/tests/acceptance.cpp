// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "marketlearn/marketlearn.hpp"

using namespace marketlearn;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

const GeneratorKind kGenerators[] = {GeneratorKind::alternating, GeneratorKind::bernoulli,
                                     GeneratorKind::uniform, GeneratorKind::adaptive};

// Alternating pattern on experts 0 and 1; the remaining experts always lose.
LossMatrix alternating_style(std::size_t n, std::size_t rounds) {
  const LossMatrix base = generate({GeneratorKind::alternating, 0, 2, rounds, {}});
  std::vector<double> data(n * rounds, 1.0);
  for (std::size_t t = 0; t < rounds; ++t) {
    data[t * n] = base(t, 0);
    data[t * n + 1] = base(t, 1);
  }
  return LossMatrix(rounds, n, std::move(data));
}

double worst_regret_over_generators(const LearnerConfig& learner, std::size_t n, std::size_t rounds) {
  double worst = -INFINITY;
  for (GeneratorKind kind : kGenerators)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const LossMatrix losses = kind == GeneratorKind::alternating
                                    ? alternating_style(n, rounds)
                                    : generate({kind, seed, n, rounds, {}}, &learner);
      worst = std::max(worst, run_learner(learner, losses).final_regret());
    }
  return worst;
}

Outcome wm_regret() {
  const std::size_t n = 10, rounds = 10000;
  const double b = 1.0;
  const double eps = b * std::sqrt(std::log(double(n)) / double(rounds));
  const double bound = 2.0 * std::sqrt(double(rounds) * std::log(double(n)));
  const double worst = worst_regret_over_generators(ReductionConfig{make_lmsr(b, n), eps}, n, rounds);
  return {worst <= bound + 1e-6, "max regret " + num(worst) + " <= " + num(bound)};
}

Outcome quad_regret() {
  const std::size_t n = 5, rounds = 10000;
  const auto cf = make_quad(1.0, n);
  const double eps = tune_epsilon(*cf->loss_bound, *cf->phi_bound, rounds);
  const double bound = double(n) * std::sqrt(double(rounds));
  const double worst = worst_regret_over_generators(ReductionConfig{cf, eps}, n, rounds);
  return {worst <= bound + 1e-6, "max regret " + num(worst) + " <= " + num(bound)};
}

Outcome ftl_linear() {
  const std::size_t rounds = 1000;
  const LossMatrix losses = generate({GeneratorKind::alternating, 0, 2, rounds, {}});
  const double ftl = run_learner(FtlConfig{}, losses).final_regret();
  const double eta = std::sqrt(std::log(2.0) / double(rounds));
  const double wm = run_learner(FtrlConfig{PenaltyFunction::entropic(1.0), eta}, losses).final_regret();
  const double wm_bound = 2.0 * std::sqrt(double(rounds) * std::log(2.0));
  return {ftl >= 450.0 && wm <= wm_bound,
          "FTL regret " + num(ftl) + " >= 450, WM regret " + num(wm) + " <= " + num(wm_bound)};
}

Outcome maker_loss() {
  std::string detail;
  bool ok = true;
  for (const auto& cf : {make_lmsr(1.0, 4), make_quad(1.0, 4)}) {
    SplitMix64 rng(2024);
    double worst = -INFINITY;
    for (int session = 0; session < 100; ++session) {
      MarketState state = open_market(cf);
      for (int step = 0; step < 200; ++step) {
        const std::size_t outcome = rng.index(4);
        std::vector<double> r = rng.box(4, 2.0);
        r[outcome] += rng.uniform(0.0, 20.0);  // drive prices toward a vertex now and then
        state = trade(state, QuantityVector(std::move(r))).first;
        for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, realized_maker_loss(state, i));
      }
    }
    ok = ok && worst <= *cf->loss_bound + 1e-6;
    detail += cf->name + " " + num(worst) + " <= " + num(*cf->loss_bound) + "; ";
  }
  return {ok, detail};
}

Outcome phi_stability() {
  bool ok = true;
  double worst_ratio = 0.0;
  for (double b : {0.5, 1.0, 5.0})
    for (std::size_t n : {2u, 3u, 10u})
      for (const auto& cf : {make_lmsr(b, n), make_quad(b, n)}) {
        const double phi = estimate_phi(*cf, 10000, 99);
        ok = ok && phi <= *cf->phi_bound + 1e-3;
        worst_ratio = std::max(worst_ratio, phi / *cf->phi_bound);
      }
  return {ok, "18 (market, b, N) cases, max estimate/bound " + num(worst_ratio)};
}

Outcome pricing_gap() {
  bool ok = true;
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (const auto& cf : {make_lmsr(1.0, 3), make_quad(1.0, 3)})
    for (double eps : {0.01, 0.1, 1.0}) {
      const auto rep = verify_pricing_diff_bound(*cf, eps, 10000, 7);
      violations += rep.violations;
      ok = ok && rep.passed();
      worst_ratio = std::max(worst_ratio, rep.max_gap / rep.bound);
    }
  return {ok, std::to_string(violations) + " violations, max gap/bound " + num(worst_ratio)};
}

Outcome equivalence() {
  const auto log_rep = verify_equivalence(make_log_rule(1.0), *make_lmsr(1.0, 3), 500, 3);
  const auto quad_rep = verify_equivalence(make_quadratic_rule(1.0), *make_quad(1.0, 3), 500, 3);
  const double gap = std::max(log_rep.max_profit_gap, quad_rep.max_profit_gap);
  const double reach = std::max(log_rep.max_reachability_error, quad_rep.max_reachability_error);
  const bool counts = log_rep.trades == 500 && quad_rep.trades == 500 &&
                      log_rep.reach_points == 100 && quad_rep.reach_points == 100;
  return {counts && gap <= 1e-8 && reach <= 1e-6,
          "profit gap " + num(gap) + " <= 1e-8, reachability " + num(reach) + " <= 1e-6"};
}

Outcome round_trips() {
  SplitMix64 rng(5);
  double worst = 0.0;
  for (const auto& rule : {make_log_rule(1.0), make_quadratic_rule(1.0)}) {
    const PenaltyFunction alpha = penalty_from_rule(rule);
    const ScoringRule back = rule_from_penalty(alpha, 3);
    const PenaltyFunction again = penalty_from_rule(back);
    for (int k = 0; k < 100; ++k) {
      const auto p = rng.simplex_point(3);
      worst = std::max(worst, max_abs_diff(rule.scores(p), back.scores(p)));
      worst = std::max(worst, std::abs(alpha.value(p) - again.value(p)));
    }
  }
  return {worst <= 1e-9, "max round-trip error " + num(worst) + " <= 1e-9"};
}

Outcome reduction_is_ftrl() {
  SplitMix64 rng(6);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.index(9);
    const double b = rng.uniform(0.5, 5.0);
    const double eps = rng.uniform(0.01, 1.0);
    std::vector<double> losses(n);
    for (double& x : losses) x = rng.uniform(0.0, 100.0);
    for (const auto& cf : {make_lmsr(b, n), make_quad(b, n)})
      worst = std::max(worst, max_abs_diff(market_reduction_weights(*cf, eps, losses).span(),
                                           ftrl_weights(*cf->penalty, eps, losses).span()));
  }
  const std::size_t n = 10, rounds = 10000;
  const LossMatrix losses = generate({GeneratorKind::uniform, 6, n, rounds, {}});
  const double root = std::sqrt(std::log(double(n)) / double(rounds));
  const auto a = run_learner(ReductionConfig{make_lmsr(0.5, n), 0.5 * root}, losses);
  const auto b = run_learner(ReductionConfig{make_lmsr(5.0, n), 5.0 * root}, losses);
  double drift = 0.0;
  for (std::size_t t = 0; t <= rounds; ++t)
    drift = std::max(drift, max_abs_diff(a.weights[t].span(), b.weights[t].span()));
  return {worst <= 1e-8 && drift <= 1e-10,
          "weight diff " + num(worst) + " <= 1e-8, b-invariance " + num(drift) + " <= 1e-10"};
}

Outcome validity() {
  bool ok = true;
  for (const auto& cf : {make_lmsr(1.0, 3), make_quad(1.0, 3)})
    ok = ok && check_validity(*cf, 1000, 10).all_passed();

  CostFunction broken;
  broken.name = "sum_of_squares";
  broken.outcomes = 3;
  broken.cost = [](const QuantityVector& q) { return dot(q.span(), q.span()); };
  broken.prices = [](const QuantityVector& q) { return ProbVector::uniform(q.size()); };
  const auto rep = check_validity(broken, 1000, 10);
  return {ok && !rep.translation.passed,
          std::string("built-in markets ") + (ok ? "valid" : "INVALID") +
              ", sum of squares translation failures " + std::to_string(rep.translation.failures)};
}

Outcome solver_oracles() {
  double grid_violation = 0.0;
  for (std::size_t n : {2u, 3u, 4u}) {
    SplitMix64 rng(11 + n);
    for (int k = 0; k < 5; ++k) {
      const QuantityVector q(rng.box(n, 3.0));
      for (const auto& alpha : {PenaltyFunction::entropic(1.0), PenaltyFunction::quadratic(1.0),
                                PenaltyFunction::quadratic(0.5).as_custom()}) {
        const double best = maximize(alpha, q).cost;
        detail::for_each_grid_point(n, 100, [&](std::span<const double> p) {
          grid_violation = std::max(grid_violation, dot(p, q.span()) - alpha.value(p) - best);
        });
      }
    }
  }
  SplitMix64 rng(12);
  double diff = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.index(9);
    const double b = rng.uniform(0.2, 5.0);
    const QuantityVector q(rng.box(n, 10.0));
    diff = std::max(diff, max_abs_diff(quad_price_closed_form(b, q).prices.span(),
                                       maximize(PenaltyFunction::quadratic(b), q).prices.span()));
  }
  return {grid_violation <= 1e-6 && diff <= 1e-8,
          "grid excess " + num(grid_violation) + " <= 1e-6, closed form diff " + num(diff) + " <= 1e-8"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit;  // seconds; 0 for none
  };
  const std::vector<Criterion> criteria{
      {"weighted-majority regret bound", wm_regret, 10.0},
      {"gradient-descent regret bound", quad_regret, 10.0},
      {"follow-the-leader linear regret", ftl_linear, 0.0},
      {"worst-case maker loss", maker_loss, 0.0},
      {"price stability", phi_stability, 0.0},
      {"linearization gap bound", pricing_gap, 0.0},
      {"scoring-rule/cost-function equivalence", equivalence, 0.0},
      {"penalty/scoring-rule round trips", round_trips, 0.0},
      {"market reduction equals FTRL", reduction_is_ftrl, 0.0},
      {"cost function validity checker", validity, 0.0},
      {"solver oracles", solver_oracles, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0 && secs >= c.time_limit) {
      out.passed = false;
      out.detail += " (too slow)";
    }
    if (!out.passed) ++failures;
    std::cout << (out.passed ? "PASS" : "FAIL") << "  " << i + 1 << ". " << c.name << ": "
              << out.detail << " [" << num(secs) << " s]\n";
  }
  std::cout << criteria.size() - failures << "/" << criteria.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
