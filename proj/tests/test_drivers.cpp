#include <cmath>

#include <gtest/gtest.h>

#include "toda/drivers.hpp"

using namespace toda;
using cd = std::complex<double>;

namespace {
ExhaustionOptions coarse(int last = 6) {
  ExhaustionOptions o;
  o.last_stage = last;
  o.rings_per_unit = 60;
  o.n_theta = 32;
  return o;
}

double max_density_error(const std::vector<ScalarField>& u, const TodaState& ex) {
  double e = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j)
    for (std::size_t n = 0; n < u[j].size(); ++n) e = std::max(e, std::abs(std::expm1(u[j][n] - ex.u[j][n])));
  return e;
}
}  // namespace

TEST(Exhaustion, StageGridsAreNestedLatticeDiscs) {
  const ExhaustionOptions o = coarse();
  for (int i = 2; i <= 6; ++i) {
    const PolarGrid g = o.stage_grid(i);
    EXPECT_NEAR(g.outer_radius, 1.0 - 1.0 / i, 1e-14);
    EXPECT_NEAR(g.dr(), 1.0 / 60.0, 1e-15);
    EXPECT_TRUE(g.same_lattice(o.stage_grid(2)));
  }
  EXPECT_EQ(o.inner_rings(), 30u);
}

TEST(Exhaustion, StageOffLatticeRejected) {
  ExhaustionOptions o = coarse(7);  // 60 * 6 / 7 is not an integer
  EXPECT_THROW(o.validate(), GridError);
  o.last_stage = 1;
  EXPECT_THROW(o.validate(), std::invalid_argument);
}

TEST(Exhaustion, SingleStageIsTriviallyMonotone) {
  const ExhaustionRun run = run_exhaustion(differential_weight(2, {cd(0, 0), cd(1, 0)}), coarse(2));
  ASSERT_EQ(run.states.size(), 1u);
  EXPECT_TRUE(run.monotonicity.passed);
  EXPECT_TRUE(run.discrepancy.empty());
  EXPECT_TRUE(run.discrepancy_decreasing);
}

TEST(Exhaustion, ZeroWeightRankTwoStagesMatchClosedForm) {
  // LM data coincides with the Liouville solution for r = 2
  const ExhaustionRun run = run_exhaustion(zero_weight(2), coarse());
  ASSERT_EQ(run.states.size(), 5u);
  const PolarGrid inner = make_grid_with_step(30, 32, 1.0 / 60.0);
  const TodaState ex = exact_hyperbolic(2, inner, background(inner));
  for (const auto& s : run.states) {
    std::vector<ScalarField> u{restrict_to(s.u[0], inner)};
    EXPECT_LE(max_density_error(u, ex), 5e-3);
  }
  EXPECT_TRUE(run.monotonicity.passed) << run.monotonicity.max_violation;
}

TEST(Exhaustion, MonotoneForDifferentialWeight) {
  const ExhaustionRun run = run_exhaustion(differential_weight(3, {cd(0, 0), cd(1, 0)}), coarse());
  EXPECT_FALSE(run.truncated);
  EXPECT_TRUE(run.monotonicity.passed) << run.monotonicity.max_violation;
  EXPECT_GT(run.monotonicity.max_opposite, 1e-3);  // genuinely moving
  EXPECT_TRUE(run.discrepancy_decreasing);
}

TEST(Exhaustion, NevilleLimitIsExactForPolynomialStages) {
  // synthetic run: u = a + b eps + c eps^2 + d eps^3 on every node
  ExhaustionRun run;
  run.r = 2;
  run.options = coarse();
  for (int i = 2; i <= 6; ++i) {
    const PolarGrid g = run.options.stage_grid(i);
    TodaState s = make_state(2, g, ScalarField(g));
    const double e = 1.0 / i;
    for (std::size_t n = 0; n < g.size(); ++n) s.u[0][n] = 0.3 + 1.7 * e - 2.0 * e * e + 0.5 * e * e * e;
    run.stages.push_back(i);
    run.states.push_back(std::move(s));
  }
  const StageLimit lim = richardson_limit(run, 4);
  EXPECT_EQ(lim.points, 4u);
  for (double v : lim.u[0].values) EXPECT_NEAR(v, 0.3, 1e-12);
  EXPECT_EQ(richardson_limit(run, 1).u[0].values, restrict_to(run.states.back().u[0], lim.u[0].grid).values);
}

TEST(Exhaustion, ExtrapolatedLimitImprovesOnLastStage) {
  const ExhaustionRun run = run_exhaustion(zero_weight(3), coarse());
  const StageLimit lim = richardson_limit(run);
  const TodaState ex = exact_hyperbolic(3, lim.u[0].grid, background(lim.u[0].grid));
  const double last = max_density_error(richardson_limit(run, 1).u, ex);
  const double extrap = max_density_error(lim.u, ex);
  EXPECT_GT(last, 0.1);
  EXPECT_LT(extrap, 0.1 * last);
}

TEST(Uniqueness, IdenticalSeedsAgree) {
  const UniquenessProbe p = run_uniqueness_probe(zero_weight(2), coarse(4), 1.0, 1.0);
  for (double d : p.difference) EXPECT_LE(d, 1e-12);
  EXPECT_FALSE(p.passed);  // nothing to decay
}

TEST(Uniqueness, SeedDifferencesDecreaseStrictly) {
  const UniquenessProbe p = run_uniqueness_probe(zero_weight(2), coarse(), 1.0, 1.5);
  ASSERT_EQ(p.difference.size(), 5u);
  EXPECT_TRUE(p.strictly_decreasing);
  EXPECT_GT(p.difference.front(), 0.1);
  EXPECT_LT(p.decay, 1.0);
}

TEST(Uniqueness, RejectsBadFactor) {
  EXPECT_THROW(run_uniqueness_probe(zero_weight(2), coarse(3), 0.0, 1.0), std::invalid_argument);
}

TEST(Mollification, StagesMonotoneAndConvergeToDirectSolve) {
  const PolarGrid g = make_grid(48, 32, 0.8);
  const MollificationRun run =
      run_mollification(differential_weight(2, {cd(0, 0), cd(1, 0)}), MollifierSchedule({0.16, 0.08, 0.04, 0.02}), g);
  EXPECT_TRUE(run.monotonicity.passed) << run.monotonicity.max_violation;
  ASSERT_EQ(run.distance_to_direct.size(), 4u);
  EXPECT_TRUE(strictly_decreasing(run.distance_to_direct));
  EXPECT_LE(run.distance_to_direct.back(), 5e-3);
}

TEST(Mollification, HarmonicWeightStagesIdentical) {
  const PolarGrid g = make_grid(24, 32, 0.5);
  const WeightModel w = atoms_weight(2, {{cd(0.95, 0), 1.0}});
  const MollificationRun run = run_mollification(w, MollifierSchedule({0.2, 0.1}), g);
  for (double d : run.distance_to_direct) EXPECT_LE(d, 1e-9);
}

TEST(Mollification, RejectsSampleWeights) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  EXPECT_THROW(run_mollification(samples_weight(2, ScalarField(g)), MollifierSchedule({0.1}), g), WeightError);
}

TEST(Parallel, WorkerCountDoesNotChangeResults) {
  std::vector<double> a(9), b(9);
  parallel_for(9, [&](std::size_t i) { a[i] = std::sin(static_cast<double>(i)); }, 1);
  parallel_for(9, [&](std::size_t i) { b[i] = std::sin(static_cast<double>(i)); }, 3);
  EXPECT_EQ(a, b);
  EXPECT_THROW(parallel_for(3, [](std::size_t i) { if (i == 1) throw std::runtime_error("x"); }, 2),
               std::runtime_error);
}
