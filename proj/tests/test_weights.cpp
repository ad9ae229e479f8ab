#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "toda/weights.hpp"

using namespace toda;
using cd = std::complex<double>;

TEST(Weights, EvalEDifferential) {
  const PolarGrid g = make_grid(8, 16, 0.6);
  const auto bg = background(g);
  const ScalarField one = eval_E(differential_weight(3, {cd(1, 0)}), g, bg);
  for (double v : one.values) EXPECT_EQ(v, 1.0);
  const WeightModel qz = differential_weight(2, {cd(0, 0), cd(1, 0)});
  EXPECT_NEAR(E_at(qz, std::polar(0.3, 1.1)), 0.09, 1e-15);
  const ScalarField e = eval_E(qz, g, bg);
  for (std::size_t i = 0; i < g.n_r; ++i) EXPECT_NEAR(e(i, 3), g.rho(i) * g.rho(i), 1e-15);
}

TEST(Weights, ZeroCoefficientsCollapseToZero) {
  const WeightModel w = differential_weight(3, {cd(0, 0), cd(0, 0)});
  EXPECT_TRUE(w.is_zero());
  const PolarGrid g = make_grid(4, 8, 0.5);
  const auto bg = background(g);
  for (double v : eval_E(w, g, bg).values) EXPECT_EQ(v, 0.0);
  for (double v : eval_phi(w, g, bg).values) EXPECT_TRUE(is_minus_infinity(v));
}

TEST(Weights, EvalPhiClosedForms) {
  const WeightModel q1 = differential_weight(2, {cd(1, 0)});
  EXPECT_NEAR(phi_at(q1, cd(0, 0)), std::log(0.5), 1e-15);
  const WeightModel atom = atoms_weight(2, {{cd(0, 0), 1.0}});
  EXPECT_NEAR(phi_at(atom, std::polar(std::exp(-1.0), 0.4)), -1.0, 1e-14);
  EXPECT_TRUE(is_minus_infinity(phi_at(differential_weight(2, {cd(0, 0), cd(1, 0)}), cd(0, 0))));
}

TEST(Weights, PhiERoundTripThroughSamples) {
  const PolarGrid g = make_grid(8, 16, 0.7);
  const auto bg = background(g);
  const WeightModel w = differential_weight(3, {cd(0.3, 0.1), cd(0, 0), cd(1, -0.5)});
  const ScalarField E = eval_E(w, g, bg);
  const ScalarField back = eval_E(samples_weight(3, eval_phi(w, g, bg)), g, bg);
  for (std::size_t n = 0; n < g.size(); ++n)
    if (E[n] > 0.0) { EXPECT_NEAR(back[n] / E[n], 1.0, 1e-12); }
}

TEST(Weights, SamplesGridMismatch) {
  const PolarGrid g = make_grid(4, 8, 0.5);
  const auto bg = background(g);
  const WeightModel s = samples_weight(2, ScalarField(make_grid(5, 8, 0.5)));
  EXPECT_THROW(eval_E(s, g, bg), GridError);
}

TEST(Weights, AtomValidation) {
  EXPECT_THROW(atoms_weight(2, {{cd(1.0, 0), 1.0}}), WeightError);
  EXPECT_THROW(atoms_weight(2, {{cd(0.1, 0), -1.0}}), WeightError);
  EXPECT_THROW(zero_weight(1), WeightError);
}

TEST(Weights, SemipositivityPassesForAdmissibleWeights) {
  const PolarGrid g = make_grid(12, 16, 0.8);
  const auto bg = background(g);
  EXPECT_TRUE(validate_semipositivity(differential_weight(2, {cd(0, 0), cd(1, 0)}), g, bg).passed);
  EXPECT_TRUE(validate_semipositivity(atoms_weight(2, {{cd(0.2, 0.1), 1.5}}), g, bg).passed);
  EXPECT_TRUE(validate_semipositivity(zero_weight(4), g, bg).passed);
}

TEST(Weights, SemipositivityDetectsCounterexample) {
  // smooth part -4(x^2 + y^2) has Laplacian -16
  const PolarGrid g = make_grid(12, 16, 0.8);
  const auto bg = background(g);
  const WeightModel w = atoms_weight(2, {}, {{2, 0, -4.0}, {0, 2, -4.0}});
  const auto rep = validate_semipositivity(w, g, bg);
  EXPECT_FALSE(rep.passed);
  // omega density < 4 exactly for rho^2 < 1 - 1/sqrt(2)
  for (std::size_t n : rep.violations) EXPECT_LT(omega_density(g.rho(n / g.n_theta)), 4.0);
  EXPECT_FALSE(rep.violations.empty());
}

TEST(Weights, SemipositivityOnSamples) {
  const PolarGrid g = make_grid(24, 32, 0.7);
  const auto bg = background(g);
  const WeightModel w = differential_weight(2, {cd(1, 0), cd(0.2, 0)});
  EXPECT_TRUE(validate_semipositivity(samples_weight(2, eval_phi(w, g, bg)), g, bg).passed);
  const WeightModel bad = atoms_weight(2, {}, {{2, 0, -4.0}, {0, 2, -4.0}});
  EXPECT_FALSE(validate_semipositivity(samples_weight(2, eval_phi(bad, g, bg)), g, bg).passed);
}

TEST(Weights, MPhi) {
  const PolarGrid g = make_grid(16, 16, 0.8);
  const auto bg = background(g);
  const SupBound b = m_phi(differential_weight(2, {cd(1, 0)}), g, bg);
  EXPECT_NEAR(b.value, sigma_x(g.rho(0)), 1e-15);
  EXPECT_FALSE(b.infinite);
}

namespace {
// Independent oracle for the mollified log|z| at the atom: integrate the
// kernel against log(delta t) directly in 2D polar coordinates.
double mollified_log_at_centre(double delta) {
  double num = 0.0, den = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n;
    const double w = t * std::exp(1.0 / (t * t - 1.0));
    num += w * std::log(delta * t);
    den += w;
  }
  return num / den;
}
}  // namespace

TEST(Mollify, KernelHasUnitMass) {
  const double m = detail::integrate(detail::radial_density, 0.0, 1.0);
  EXPECT_NEAR(m, 1.0, 1e-12);
}

TEST(Mollify, LogAtCentreMatchesDirectQuadrature) {
  EXPECT_NEAR(mollified_log_distance(0.0, 0.1), mollified_log_at_centre(0.1), 1e-8);
  EXPECT_GT(mollified_log_distance(0.0, 0.1), std::log(0.1) - 1.0);
  EXPECT_LT(mollified_log_distance(0.0, 0.1), std::log(0.1));
}

TEST(Mollify, HarmonicAwayFromAtom) {
  EXPECT_DOUBLE_EQ(mollified_log_distance(0.3, 0.1), std::log(0.3));
}

TEST(Mollify, MonotoneInDeltaAndAbovePhi) {
  const PolarGrid g = make_grid(16, 16, 0.6);
  const auto bg = background(g);
  const WeightModel w = atoms_weight(2, {{cd(0, 0), 1.0}});
  const ScalarField phi = eval_phi(w, g, bg);
  const auto a = std::get<Samples>(mollify(w, 0.1, g, bg).kind).phi;
  const auto b = std::get<Samples>(mollify(w, 0.05, g, bg).kind).phi;
  for (std::size_t n = 0; n < g.size(); ++n) {
    EXPECT_LE(b[n], a[n] + 1e-8);
    EXPECT_GE(b[n], phi[n] - 1e-8);
  }
}

TEST(Mollify, HarmonicWeightUnchanged) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  const auto bg = background(g);
  const WeightModel w = atoms_weight(2, {{cd(0.9, 0), 1.0}}, {{1, 0, 0.3}});
  const auto m = std::get<Samples>(mollify(w, 0.2, g, bg).kind).phi;
  const ScalarField phi = eval_phi(w, g, bg);
  for (std::size_t n = 0; n < g.size(); ++n) EXPECT_NEAR(m[n], phi[n], 1e-12);
}

TEST(Mollify, DifferentialZerosBecomeFinite) {
  const PolarGrid g = make_grid(8, 16, 0.5);
  const auto bg = background(g);
  const WeightModel w = differential_weight(2, {cd(0, 0), cd(1, 0)});
  const auto m = std::get<Samples>(mollify(w, 0.1, g, bg).kind).phi;
  const ScalarField phi = eval_phi(w, g, bg);
  for (std::size_t n = 0; n < g.size(); ++n) {
    EXPECT_TRUE(std::isfinite(m[n]));
    EXPECT_GE(m[n], phi[n] - 1e-12);
  }
}

TEST(Mollify, RootsOfCompanionMatrix) {
  const auto roots = polynomial_roots({cd(-0.06, 0), cd(0.1, 0), cd(1, 0)});  // (z-0.2)(z+0.3)
  ASSERT_EQ(roots.size(), 2u);
  double lo = std::min(roots[0].real(), roots[1].real()), hi = std::max(roots[0].real(), roots[1].real());
  EXPECT_NEAR(lo, -0.3, 1e-12);
  EXPECT_NEAR(hi, 0.2, 1e-12);
}

TEST(Mollify, SamplesAgreeWithAnalyticPath) {
  // A smooth weight sampled on a larger grid: quadrature of the interpolant
  // must reproduce the mean-value property for a harmonic function.
  const PolarGrid big = make_grid(96, 128, 0.8);
  const PolarGrid g = make_grid(8, 16, 0.4);
  const auto bgb = background(big), bg = background(g);
  const WeightModel harmonic = atoms_weight(2, {{cd(0.95, 0), 1.0}});
  const WeightModel s = samples_weight(2, eval_phi(harmonic, big, bgb));
  const auto m = std::get<Samples>(mollify(s, 0.2, g, bg).kind).phi;
  const ScalarField phi = eval_phi(harmonic, g, bg);
  for (std::size_t n = 0; n < g.size(); ++n) EXPECT_NEAR(m[n], phi[n], 2e-3);
}

TEST(Mollify, DomainOverflow) {
  const PolarGrid g = make_grid(8, 16, 0.95);
  const auto bg = background(g);
  EXPECT_THROW(mollify(zero_weight(2), 0.1, g, bg), WeightError);
  EXPECT_THROW(MollifierSchedule({0.1, 0.2}), WeightError);
}
