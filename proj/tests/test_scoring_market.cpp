#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "marketlearn/cost_market.hpp"
#include "marketlearn/scoring_market.hpp"

using namespace marketlearn;

TEST(LogRule, KnownScores) {
  const auto rule = make_log_rule(1.0);
  EXPECT_NEAR(rule.score(ProbVector{0.5, 0.5}, 0), -0.6931471805599453, 1e-15);
  EXPECT_EQ(rule.score(ProbVector{1.0, 0.0}, 0), 0.0);
  EXPECT_EQ(rule.score(ProbVector{1.0, 0.0}, 1), -INFINITY);
  EXPECT_NEAR(make_log_rule(2.0).score(ProbVector{0.25, 0.75}, 1), -0.5753641449035618, 1e-15);
  EXPECT_THROW(make_log_rule(0.0), InvalidParameter);
  EXPECT_THROW(rule.score(ProbVector{0.5, 0.5}, 2), InvalidOutcome);
}

TEST(QuadraticRule, KnownScores) {
  const auto rule = make_quadratic_rule(1.0);
  EXPECT_NEAR(rule.score(ProbVector::uniform(2), 0), 0.5, 1e-15);
  EXPECT_NEAR(rule.score(ProbVector{1.0, 0.0}, 0), 1.0, 1e-15);
  EXPECT_NEAR(rule.score(ProbVector{0.6, 0.4}, 1), 0.28, 1e-15);
  EXPECT_THROW(make_quadratic_rule(-1.0), InvalidParameter);
}

TEST(Rules, SpotCheckAcceptsBuiltIns) {
  for (const auto& rule : {make_log_rule(1.0), make_quadratic_rule(2.0)}) {
    const auto check = spot_check_rule(rule, 4);
    EXPECT_TRUE(check.regular);
    EXPECT_TRUE(check.proper);
  }
}

TEST(Rules, SpotCheckRejectsImproperRule) {
  // A concave penalty induces a rule that rewards misreporting.
  const auto improper = ScoringRule::from_penalty(PenaltyFunction::custom(
      [](std::span<const double> p) { return -dot(p, p); },
      [](std::span<const double> p) {
        std::vector<double> g(p.begin(), p.end());
        for (double& x : g) x *= -2.0;
        return g;
      }));
  EXPECT_FALSE(spot_check_rule(improper, 3).proper);
}

TEST(Rules, LogRuleStrictlyProperOnGrid) {
  const auto rule = make_log_rule(1.0);
  detail::for_each_grid_point(3, 20, [&](std::span<const double> belief_span) {
    const std::vector<double> belief(belief_span.begin(), belief_span.end());
    const ProbVector r(belief);
    const double truthful = rule.expected(r, belief);
    detail::for_each_grid_point(3, 20, [&](std::span<const double> report) {
      if (max_abs_diff(report, belief) < 1e-12) return;
      EXPECT_LT(rule.expected(r, report), truthful);
    });
  });
}

TEST(Rules, QuadraticRuleStrictlyProperOnGrid) {
  const auto rule = make_quadratic_rule(1.0);
  SplitMix64 rng(8);
  for (int k = 0; k < 100; ++k) {
    const ProbVector belief(rng.simplex_point(3));
    std::vector<double> nearest;
    double nearest_dist = INFINITY;
    detail::for_each_grid_point(3, 20, [&](std::span<const double> p) {
      double d = 0.0;
      for (std::size_t i = 0; i < 3; ++i) d += (p[i] - belief[i]) * (p[i] - belief[i]);
      if (d < nearest_dist) {
        nearest_dist = d;
        nearest.assign(p.begin(), p.end());
      }
    });
    const double best = rule.expected(belief, nearest);
    detail::for_each_grid_point(3, 20, [&](std::span<const double> p) {
      EXPECT_LE(rule.expected(belief, p), best + 1e-12);
    });
  }
}

TEST(Conversion, BuiltInRulesMapToTaggedPenalties) {
  EXPECT_EQ(penalty_from_rule(make_log_rule(2.0)).kind(), PenaltyKind::entropic);
  EXPECT_EQ(penalty_from_rule(make_log_rule(2.0)).scale(), 2.0);
  EXPECT_EQ(penalty_from_rule(make_quadratic_rule(1.0)).kind(), PenaltyKind::quadratic);
}

TEST(Conversion, PenaltyIsExpectedTruthfulScore) {
  SplitMix64 rng(2);
  for (const auto& rule : {make_log_rule(1.5), make_quadratic_rule(0.5)}) {
    const auto alpha = penalty_from_rule(rule);
    for (int k = 0; k < 100; ++k) {
      const ProbVector p(rng.simplex_point(4));
      EXPECT_NEAR(alpha.value(p), rule.expected(p, p.span()), 1e-12);
    }
  }
}

TEST(Conversion, RoundTripsAreInverse) {
  SplitMix64 rng(3);
  for (const auto& rule : {make_log_rule(1.0), make_quadratic_rule(1.0)}) {
    const auto alpha = penalty_from_rule(rule);
    const auto back = rule_from_penalty(alpha);
    const auto again = penalty_from_rule(back);
    for (int k = 0; k < 100; ++k) {
      const auto p = rng.simplex_point(3);
      EXPECT_LE(max_abs_diff(rule.scores(p), back.scores(p)), 1e-9);
      EXPECT_NEAR(alpha.value(p), again.value(p), 1e-9);
    }
  }
}

TEST(Conversion, FiniteDifferenceGradientForCustomPenalty) {
  const auto rule = rule_from_penalty(PenaltyFunction::quadratic(1.0).as_custom(false), 3);
  const auto exact = make_quadratic_rule(1.0);
  SplitMix64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const auto p = rng.simplex_point(3);
    EXPECT_LE(max_abs_diff(rule.scores(p), exact.scores(p)), 1e-8);
  }
}

TEST(Conversion, NonDifferentiablePenaltyRejected) {
  const auto bad = PenaltyFunction::custom([](std::span<const double>) { return NAN; });
  EXPECT_THROW(rule_from_penalty(bad, 3), InvalidPenalty);
}

TEST(MsrTrade, PayoffsMatchExamples) {
  auto state = open_msr(make_log_rule(1.0), ProbVector::uniform(2));
  const auto [same, zero] = msr_trade(state, ProbVector::uniform(2));
  EXPECT_EQ(zero, (std::vector<double>{0.0, 0.0}));

  const auto [next, payoff] = msr_trade(state, ProbVector{0.7310585786300049, 0.2689414213699951});
  EXPECT_NEAR(payoff[0], 0.3798854930417225, 1e-12);

  auto quad = open_msr(make_quadratic_rule(1.0), ProbVector::uniform(2));
  EXPECT_NEAR(msr_trade(quad, ProbVector{0.75, 0.25}).second[0], 0.375, 1e-15);
}

TEST(MsrTrade, ZeroProbabilityLogReportIsInadmissible) {
  const auto state = open_msr(make_log_rule(1.0), ProbVector::uniform(2));
  EXPECT_THROW(msr_trade(state, ProbVector{1.0, 0.0}), InadmissibleReport);
  EXPECT_THROW(open_msr(make_log_rule(1.0), ProbVector{1.0, 0.0}), InadmissibleReport);
  const auto quad = open_msr(make_quadratic_rule(1.0), ProbVector::uniform(2));
  EXPECT_NO_THROW(msr_trade(quad, ProbVector{1.0, 0.0}));
}

TEST(MsrTrade, SequentialPayoffsTelescope) {
  SplitMix64 rng(6);
  for (const auto& rule : {make_log_rule(1.0), make_quadratic_rule(1.0)}) {
    auto state = open_msr(rule, ProbVector::uniform(3));
    std::vector<double> total(3, 0.0);
    for (int k = 0; k < 50; ++k) {
      auto [next, payoff] = msr_trade(state, ProbVector(rng.simplex_point(3)));
      for (std::size_t i = 0; i < 3; ++i) total[i] += payoff[i];
      state = std::move(next);
    }
    const auto end = rule.scores(state.current);
    const auto start = rule.scores(state.initial);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(total[i], end[i] - start[i], 1e-10);
  }
}

TEST(WorstCase, KnownValues) {
  const auto log2 = msr_worst_case_loss(make_log_rule(1.0), ProbVector::uniform(2));
  EXPECT_NEAR(log2.value, std::log(2.0), 1e-15);
  EXPECT_TRUE(log2.exact);

  const auto quad = msr_worst_case_loss(make_quadratic_rule(1.0), ProbVector::uniform(2));
  EXPECT_NEAR(quad.value, 0.5, 1e-12);
  EXPECT_FALSE(quad.exact);

  const auto from_vertex = msr_worst_case_loss(make_quadratic_rule(1.0), ProbVector::vertex(2, 0));
  EXPECT_NEAR(from_vertex.value, 2.0, 1e-12);
  EXPECT_EQ(from_vertex.outcome, 1u);
  EXPECT_EQ(from_vertex.report[1], 1.0);
}

TEST(WorstCase, QuadraticMatchesMarketLossBound) {
  for (std::size_t n : {2u, 3u, 5u}) {
    const auto w = msr_worst_case_loss(make_quadratic_rule(1.5), ProbVector::uniform(n));
    EXPECT_NEAR(w.value, *make_quad(1.5, n)->loss_bound, 1e-9);
  }
}

TEST(Equivalence, LinkedPairsAgree) {
  const auto log_rep = verify_equivalence(make_log_rule(1.0), *make_lmsr(1.0, 3), 500, 1);
  EXPECT_TRUE(log_rep.passed()) << log_rep.max_profit_gap << ' ' << log_rep.max_reachability_error;
  EXPECT_EQ(log_rep.reach_points, 100u);
  const auto quad_rep = verify_equivalence(make_quadratic_rule(2.0), *make_quad(2.0, 4), 500, 1);
  EXPECT_TRUE(quad_rep.passed()) << quad_rep.max_profit_gap << ' ' << quad_rep.max_reachability_error;
}

TEST(Equivalence, MismatchedPairRejected) {
  EXPECT_THROW(verify_equivalence(make_log_rule(1.0), *make_quad(1.0, 3), 10, 1), InvalidParameter);
  EXPECT_THROW(verify_equivalence(make_log_rule(1.0), *make_lmsr(2.0, 3), 10, 1), InvalidParameter);
}

TEST(MsrCsv, HeaderAndRow) {
  std::ostringstream out;
  write_msr_header(out, 2);
  write_msr_row(out, 1, ProbVector{0.75, 0.25}, std::vector<double>{0.375, -0.125});
  EXPECT_EQ(out.str(), "step,report_1,report_2,payoff_if_1,payoff_if_2\n1,0.75,0.25,0.375,-0.125\n");
}
