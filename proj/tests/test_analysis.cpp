#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "toda/analysis.hpp"

using namespace toda;
using cd = std::complex<double>;

TEST(Constants, LemmaChain) {
  const LemmaConstants c = lemma_constants(2);
  EXPECT_DOUBLE_EQ(c.C, 0.25);
  EXPECT_DOUBLE_EQ(c.C1, 0.125);
  EXPECT_DOUBLE_EQ(c.C2, 0.5);
  // (1/2 + 1) / (1/8) = 12 against 1/2 + 2 = 2.5
  EXPECT_DOUBLE_EQ(cmphi_constant(2, 1.0), 12.0);
  // r = 3, M = 2: C = 1/18, (2/6 + 1) * 36 = 48 against 1 + 4 * 8 = 33
  EXPECT_NEAR(cmphi_constant(3, 2.0), 48.0, 1e-12);
  // large M: the power branch wins, 1/2 + 2 * 100^2
  EXPECT_DOUBLE_EQ(cmphi_constant(2, 100.0), 20000.5);
  EXPECT_THROW(cmphi_constant(2, -1.0), std::invalid_argument);
}

TEST(VolumeBounds, LiouvilleSolutionSitsOnLowerBound) {
  const PolarGrid g = make_grid(16, 16, 0.9);
  const BoundsReport b = check_volume_bounds(exact_hyperbolic(2, g, background(g)), 0.0);
  EXPECT_TRUE(b.passed);
  EXPECT_NEAR(b.min_ratio[0], 0.5, 1e-14);
  EXPECT_NEAR(b.max_ratio[0], 0.5, 1e-14);
}

TEST(VolumeBounds, FlatWeightOnHalfDisc) {
  const PolarGrid g = make_grid(48, 32, 0.5);
  const WeightModel w = differential_weight(2, {cd(1, 0)});
  const TodaState s = solve_dirichlet(w, g, boundary_lm(g, 2)).state;
  const BoundsReport b = check_volume_bounds(s, m_phi(w, g, background(g)).value);
  EXPECT_TRUE(b.passed);
  EXPECT_GT(b.min_ratio[0], 0.5);
}

TEST(VolumeBounds, DetectsViolations) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  TodaState s = exact_hyperbolic(3, g, background(g));
  for (double& v : s.u[1].values) v -= 1.0;  // e^{-1} * 2 * omega / 2 < omega / 2
  for (double& v : s.u[0].values) v += 4.0;  // 2 e^4 * omega / 2 > 36 omega
  const BoundsReport b = check_volume_bounds(s, 0.0);
  EXPECT_FALSE(b.passed);
  EXPECT_EQ(b.lower_violations[1].size(), g.size());
  EXPECT_EQ(b.upper_violations[0].size(), g.size());
  EXPECT_TRUE(b.lower_violations[0].empty());
}

TEST(Khn, LiouvilleEqualityCase) {
  const PolarGrid g = make_grid(16, 16, 0.9);
  const KhnReport k = check_khn(exact_hyperbolic(2, g, background(g)));
  EXPECT_TRUE(k.passed);
  EXPECT_NEAR(k.max_excess_top, 0.0, 1e-13);
}

TEST(Khn, HyperbolicStatesPass) {
  const PolarGrid g = make_grid(16, 16, 0.9);
  for (int r : {3, 4, 5, 6}) EXPECT_TRUE(check_khn(exact_hyperbolic(r, g, background(g))).passed) << r;
}

TEST(Khn, ShiftedWeightDetected) {
  const PolarGrid g = make_grid(16, 16, 0.9);
  for (int r : {3, 4}) {
    const TodaState s = exact_hyperbolic(r, g, background(g));
    HWeights h = reconstruct_h(s);
    h.w[static_cast<std::size_t>(r / 2 - 1)].values[5] += 1.0;
    const KhnReport k = check_khn(h, r);
    EXPECT_FALSE(k.passed);
    EXPECT_EQ(k.violations, std::vector<std::size_t>{5});
  }
}

namespace {
ExhaustionOptions coarse_run() {
  ExhaustionOptions o;
  o.last_stage = 6;
  o.rings_per_unit = 60;
  o.n_theta = 16;
  return o;
}
}  // namespace

TEST(Completeness, LiouvilleLengthsFollowClosedForm) {
  // e^{u/2} = 1 / (1 - rho^2), so the partial length to radius R is atanh R
  const ExhaustionRun run = run_exhaustion(zero_weight(2), coarse_run());
  const CompletenessReport c = completeness_diagnostic(run, {0.0, std::numbers::pi / 2});
  EXPECT_TRUE(c.increasing);
  for (std::size_t s = 0; s < run.states.size(); ++s) {
    EXPECT_NEAR(c.length[0][0][s] / std::atanh(run.radii[s]), 1.0, 2e-3);
    EXPECT_NEAR(c.length[0][0][s] * std::sqrt(2.0) / c.poincare[s], 1.0, 1e-3);
  }
}

TEST(Completeness, CertifiedForVanishingDifferential) {
  const ExhaustionRun run = run_exhaustion(differential_weight(2, {cd(0, 0), cd(1, 0)}), coarse_run());
  const CompletenessReport c = completeness_diagnostic(run, {0.0, 1.0, 4.0});
  EXPECT_TRUE(c.increasing);
  EXPECT_TRUE(c.lower_bound);
  EXPECT_TRUE(c.certified);
}

TEST(Completeness, FlatSolutionOnFixedDiscNotCertified) {
  const PolarGrid g = make_grid(24, 16, 0.5);
  const WeightModel w = differential_weight(2, {cd(1, 0)});
  const TodaState s = solve_dirichlet(w, g, {RingValues(g.n_theta, 0.0)}).state;
  const CompletenessReport c = completeness_diagnostic(std::vector<TodaState>{s, s}, {0.0});
  EXPECT_FALSE(c.certified);
  EXPECT_FALSE(c.lower_bound);
  EXPECT_FALSE(c.increasing);
  EXPECT_NEAR(c.length[0][0][0], 0.5, 1e-9);
}

TEST(Thermo, UniformDistributionForFlatState) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  const TodaState s = exact_flat(differential_weight(2, {cd(1, 0)}), g, background(g));
  const ThermoReport t = thermo(s, 1.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    EXPECT_NEAR(t.p[0][n], 0.5, 1e-15);
    EXPECT_NEAR(t.S[n], std::log(2.0), 1e-12);
  }
}

TEST(Thermo, HyperbolicRankThree) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  const ThermoReport t = thermo(exact_hyperbolic(3, g, background(g)), 1.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    EXPECT_EQ(t.p[0][n], 0.0);
    EXPECT_NEAR(t.p[1][n], 0.5, 1e-15);
    EXPECT_NEAR(t.p[2][n], 0.5, 1e-15);
    EXPECT_NEAR(t.S[n], std::log(2.0), 1e-12);
  }
}

TEST(Thermo, DistributionPropertiesOnSolvedState) {
  const PolarGrid g = make_grid(16, 32, 0.8);
  const WeightModel w = differential_weight(4, {cd(0.2, 0), cd(1, 0)});
  const TodaState s = solve_dirichlet(w, g, boundary_lm(g, 4)).state;
  for (double beta : {-2.0, 0.5, 1.0, 3.0}) {
    const ThermoReport t = thermo(s, beta, ReferenceMetric{Reference::H1, {}});
    EXPECT_LE(t.max_sum_defect, 1e-12);
    EXPECT_GE(t.min_S, 0.0);
    EXPECT_LE(t.max_S, std::log(4.0) + 1e-15);
    for (const auto& p : t.p)
      for (double v : p.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
  }
  EXPECT_THROW(thermo(s, 0.0), std::invalid_argument);
  EXPECT_THROW(thermo(exact_hyperbolic(3, g, background(g)), -1.0), std::domain_error);
}

TEST(Thermo, FreeEnergyReferenceInvariance) {
  const PolarGrid g = make_grid(16, 32, 0.8);
  const WeightModel w = differential_weight(3, {cd(0, 0), cd(1, 0)});
  const TodaState a = solve_dirichlet(w, g, boundary_lm(g, 3)).state;
  const TodaState b = solve_dirichlet(w, g, boundary_lm_scaled(g, 3, 1.5)).state;
  ReferenceMetric custom{Reference::Custom, ScalarField::from_function(g, [](double r, double t) {
                           return 3.0 * r * std::cos(t) - 1.0;
                         })};
  const ReferenceMetric omega{}, h1{Reference::H1, {}};
  EXPECT_LE(free_energy_invariance(a, b, 1.0, omega, custom), 1e-12);
  EXPECT_LE(free_energy_invariance(a, b, 2.5, omega, custom), 1e-12);
  // H_1 is state dependent, so it is not a common reference for a and b
  EXPECT_GT(free_energy_invariance(a, b, 1.0, omega, h1), 1e-3);
}

TEST(Inequalities, ToleranceShrinksAtSecondOrder) {
  double prev = 0.0;
  for (std::size_t nr : {64, 128, 256}) {
    const DiscreteTolerance t = calibrate_tol_disc(make_grid(nr, 2 * nr, 0.8), 3);
    if (prev > 0.0) {
      EXPECT_GE(std::log2(prev / t.coefficient()), 1.9);
    }
    prev = t.coefficient();
  }
}

TEST(Inequalities, FlatStateIsTheEqualityCase) {
  const PolarGrid g = make_grid(16, 32, 0.8);
  const WeightModel w = differential_weight(3, {cd(1, 0)});
  const TodaState s = exact_flat(w, g, background(g));
  const MasterReport m = check_master_inequalities(s, m_phi(w, g, background(g)).value, calibrate_tol_disc(g, 3));
  EXPECT_TRUE(m.passed);
  EXPECT_NEAR(m.well_known.min_margin, 0.0, 1e-10);
}

TEST(Inequalities, HoldOnSolvedStates) {
  const PolarGrid g = make_grid(32, 64, 0.8);
  const BackgroundGeometry bg = background(g);
  for (int r : {2, 3}) {
    const WeightModel w = differential_weight(r, {cd(0, 0), cd(1, 0)});
    const TodaState s = solve_dirichlet(w, g, boundary_lm(g, r)).state;
    const MasterReport m = check_master_inequalities(s, m_phi(w, g, bg).value, calibrate_tol_disc(g, r));
    EXPECT_TRUE(m.passed) << r;
    EXPECT_GT(m.well_known.min_margin, 0.0) << r;
    EXPECT_EQ(m.per_h.size(), static_cast<std::size_t>(r - 1));
  }
}

TEST(SSubharmonicity, IdenticalStatesGiveZero) {
  const PolarGrid g = make_grid(16, 32, 0.8);
  const TodaState s = exact_hyperbolic(3, g, background(g));
  const InequalityReport rep = s_subharmonicity_check(s, s, calibrate_tol_disc(g, 3));
  EXPECT_TRUE(rep.passed);
  EXPECT_NEAR(rep.min_margin, 0.0, 1e-10);
}

TEST(SSubharmonicity, PerturbedBoundarySolutions) {
  const PolarGrid g = make_grid(32, 64, 0.8);
  const WeightModel w = differential_weight(3, {cd(0, 0), cd(0, 0), cd(1, 0)});
  const TodaState a = solve_dirichlet(w, g, boundary_lm(g, 3)).state;
  const TodaState b = solve_dirichlet(w, g, boundary_lm_scaled(g, 3, 1.5)).state;
  EXPECT_TRUE(s_subharmonicity_check(a, b, calibrate_tol_disc(g, 3)).passed);
}

TEST(SSubharmonicity, NonSolutionPairDetected) {
  // s_1 = e^{t g}, s_r = e^{-t g} with g peaked at the centre: sum s is
  // strictly superharmonic there while the right side is non-negative.
  const PolarGrid g = make_grid(16, 32, 0.8);
  const TodaState a = exact_hyperbolic(2, g, background(g));
  HWeights h = reconstruct_h(a);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double rho = g.rho(n / g.n_theta);
    const double bump = 1.0 - rho * rho / 0.64;
    h.w[0][n] += bump;
    h.w[1][n] -= bump;
  }
  TodaState b = a;
  b.u = h.to_u();
  const InequalityReport rep = s_subharmonicity_check(a, b, calibrate_tol_disc(g, 2));
  EXPECT_FALSE(rep.passed);
  EXPECT_FALSE(rep.violations.empty());
}

TEST(SSubharmonicity, RejectsMismatchedStates) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  const TodaState a = exact_hyperbolic(2, g, background(g));
  EXPECT_THROW(s_subharmonicity_check(a, exact_hyperbolic(3, g, background(g)), calibrate_tol_disc(g, 2)), GridError);
}
