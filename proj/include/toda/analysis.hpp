#ifndef TODA_ANALYSIS_HPP
#define TODA_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "toda/drivers.hpp"
#include "toda/toda.hpp"

namespace toda {

// Volume densities: vol(H_j) = e^{u_j} for j = 1..r-1 and vol(H_0) = vol(H_r)
// = E e^{-sum u}. i ddbar f corresponds to (Laplacian f) / 4 and i F_H to
// -(Laplacian log vol H) / 4.

/// vol(H_0), ..., vol(H_{r-1}) at one node (vol(H_r) = vol(H_0)).
inline std::vector<double> volumes(const TodaState& s, std::size_t node) {
  std::vector<double> v(static_cast<std::size_t>(s.r));
  double sum = 0.0;
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    v[j + 1] = std::exp(s.u[j][node]);
    sum += s.u[j][node];
  }
  v[0] = s.E[node] > 0.0 ? s.E[node] * std::exp(-sum) : 0.0;
  return v;
}

// --- constants ----------------------------------------------------------------

struct LemmaConstants {
  double C = 0.0;   // 1 / (r^2 (r-1))
  double C1 = 0.0;  // C / 2
  double C2 = 0.0;  // r C
};

inline LemmaConstants lemma_constants(int r) {
  if (r < 2) throw std::invalid_argument("rank r must be at least 2");
  const double rr = r;
  LemmaConstants c;
  c.C = 1.0 / (rr * rr * (rr - 1.0));
  c.C1 = 0.5 * c.C;
  c.C2 = rr * c.C;
  return c;
}

/// max{(C2 M + 1) / C1, (r - 1)/2 + 2^{r-1} M^r}.
inline double cmphi_constant(int r, double M) {
  if (!(M >= 0.0) || !std::isfinite(M)) throw std::invalid_argument("M_phi must be finite and non-negative");
  const LemmaConstants c = lemma_constants(r);
  return std::max((c.C2 * M + 1.0) / c.C1, 0.5 * (r - 1) + std::pow(2.0, r - 1) * std::pow(M, r));
}

// --- volume bounds ----------------------------------------------------------------

struct BoundsReport {
  int r = 0;
  double M_phi = 0.0;
  LemmaConstants constants;
  double C_M = 0.0;
  double upper_factor = 0.0;  // factor actually checked (C_M unless overridden)
  std::vector<double> min_ratio, max_ratio;  // per j: e^{u_j} / omega density
  std::vector<std::vector<std::size_t>> lower_violations, upper_violations;
  bool passed = true;
};

/// 1/2 omega - tol <= e^{u_j} <= C omega + tol with tol = rel_tol * omega.
/// `upper_factor` <= 0 means C = C_{M_phi}.
inline BoundsReport check_volume_bounds(const TodaState& s, double M_phi, double upper_factor = 0.0,
                                        double rel_tol = 1e-6) {
  BoundsReport rep;
  rep.r = s.r;
  rep.M_phi = M_phi;
  rep.constants = lemma_constants(s.r);
  rep.C_M = cmphi_constant(s.r, M_phi);
  rep.upper_factor = upper_factor > 0.0 ? upper_factor : rep.C_M;
  const PolarGrid& g = s.grid;
  const std::size_t m = s.u.size();
  rep.min_ratio.assign(m, std::numeric_limits<double>::infinity());
  rep.max_ratio.assign(m, 0.0);
  rep.lower_violations.resize(m);
  rep.upper_violations.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double om = omega_density(g.rho(n / g.n_theta));
      const double v = std::exp(s.u[j][n]);
      rep.min_ratio[j] = std::min(rep.min_ratio[j], v / om);
      rep.max_ratio[j] = std::max(rep.max_ratio[j], v / om);
      if (v < 0.5 * om - rel_tol * om) rep.lower_violations[j].push_back(n);
      if (v > rep.upper_factor * om + rel_tol * om) rep.upper_violations[j].push_back(n);
    }
  for (std::size_t j = 0; j < m; ++j)
    rep.passed = rep.passed && rep.lower_violations[j].empty() && rep.upper_violations[j].empty();
  return rep;
}

// --- domination estimates ------------------------------------------------------

struct KhnReport {
  bool passed = true;
  double max_excess_chain = -std::numeric_limits<double>::infinity();  // w_{n-k} - w_n - k log(2 sigma)
  double max_excess_top = -std::numeric_limits<double>::infinity();    // (2n+2-r) w_n - log(2 sigma)
  std::vector<std::size_t> violations;
};

/// h_{n-k} <= 2^k h_X^k h_n (k = 1..n-1) and h_n^{2n+2-r} <= 2 h_X, in logs.
inline KhnReport check_khn(const HWeights& h, int r, double tol = 1e-6) {
  KhnReport rep;
  const int n = r / 2;
  const PolarGrid& g = h.w.front().grid;
  for (std::size_t node = 0; node < g.size(); ++node) {
    const double l2s = std::log(2.0 * sigma_x(g.rho(node / g.n_theta)));
    const double wn = h.w[static_cast<std::size_t>(n - 1)][node];
    bool bad = false;
    for (int k = 1; k <= n - 1; ++k) {
      const double ex = h.w[static_cast<std::size_t>(n - k - 1)][node] - wn - k * l2s;
      rep.max_excess_chain = std::max(rep.max_excess_chain, ex);
      bad = bad || ex > tol;
    }
    const double top = (2 * n + 2 - r) * wn - l2s;
    rep.max_excess_top = std::max(rep.max_excess_top, top);
    bad = bad || top > tol;
    if (bad) rep.violations.push_back(node);
  }
  rep.passed = rep.violations.empty();
  return rep;
}

inline KhnReport check_khn(const TodaState& s, double tol = 1e-6) { return check_khn(reconstruct_h(s), s.r, tol); }

// --- completeness ------------------------------------------------------------------

struct CompletenessReport {
  std::vector<std::size_t> rays;             // angular indices
  std::vector<double> poincare;              // per stage: sum sqrt(omega) dr along a ray
  std::vector<std::vector<std::vector<double>>> length;  // [j][ray][stage]
  bool increasing = true;
  bool lower_bound = true;  // every stage passes e^{u_j} >= omega / 2
  bool certified = false;
};

/// Partial lengths L_j = sum over ray nodes of e^{u_j/2} dr, per stage.
inline CompletenessReport completeness_diagnostic(const std::vector<TodaState>& stages,
                                                  const std::vector<double>& ray_angles) {
  if (stages.empty()) throw std::invalid_argument("completeness diagnostic needs at least one state");
  CompletenessReport rep;
  const PolarGrid& g0 = stages.front().grid;
  for (double a : ray_angles) {
    const double t = std::fmod(std::fmod(a, 2.0 * std::numbers::pi) + 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
    rep.rays.push_back(static_cast<std::size_t>(std::lround(t / g0.dtheta())) % g0.n_theta);
  }
  const std::size_t m = stages.front().u.size();
  rep.length.assign(m, std::vector<std::vector<double>>(rep.rays.size()));
  for (const auto& s : stages) {
    if (s.grid.n_theta != g0.n_theta || s.u.size() != m) throw GridError("stages do not share a lattice");
    const double dr = s.grid.dr();
    double p = 0.0;
    for (std::size_t i = 0; i < s.grid.n_r; ++i) p += std::sqrt(omega_density(s.grid.rho(i))) * dr;
    rep.poincare.push_back(p);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t q = 0; q < rep.rays.size(); ++q) {
        double L = 0.0;
        for (std::size_t i = 0; i < s.grid.n_r; ++i) L += std::exp(0.5 * s.u[j](i, rep.rays[q])) * dr;
        rep.length[j][q].push_back(L);
      }
    rep.lower_bound = rep.lower_bound && check_volume_bounds(s, 0.0, std::numeric_limits<double>::max()).passed;
  }
  for (const auto& per_j : rep.length)
    for (const auto& seq : per_j)
      for (std::size_t k = 1; k < seq.size(); ++k) rep.increasing = rep.increasing && seq[k] > seq[k - 1];
  rep.certified = stages.size() >= 2 && rep.increasing && rep.lower_bound;
  return rep;
}

inline CompletenessReport completeness_diagnostic(const ExhaustionRun& run, const std::vector<double>& ray_angles) {
  return completeness_diagnostic(run.states, ray_angles);
}

// --- entropy and free energy ----------------------------------------------------

enum class Reference { OmegaX, H1, Custom };

struct ReferenceMetric {
  Reference kind = Reference::OmegaX;
  ScalarField log_density;  // Custom only
  std::string name() const { return kind == Reference::OmegaX ? "omega_X" : kind == Reference::H1 ? "H_1" : "custom"; }
};

inline double reference_log(const ReferenceMetric& ref, const TodaState& s, std::size_t node) {
  switch (ref.kind) {
    case Reference::OmegaX: return std::log(omega_density(s.grid.rho(node / s.grid.n_theta)));
    case Reference::H1: return s.u.front()[node];
    case Reference::Custom:
      if (!(ref.log_density.grid == s.grid)) throw GridError("custom reference lives on a different grid");
      return ref.log_density[node];
  }
  return 0.0;
}

struct ThermoReport {
  double beta = 1.0;
  std::string reference;
  std::vector<ScalarField> p;  // j = 0..r-1
  ScalarField S, F;
  double max_sum_defect = 0.0;  // max |sum p_j - 1|
  double min_S = 0.0, max_S = 0.0;
};

/// p_j = softmax_j(beta (log vol H_j - log ref)), S = -sum p log p, and
/// F = -(1/beta) log sum (vol H_j / ref)^beta. vol(H_0) = 0 gives p_0 = 0.
inline ThermoReport thermo(const TodaState& s, double beta, const ReferenceMetric& ref = {}) {
  if (beta == 0.0 || !std::isfinite(beta)) throw std::invalid_argument("beta must be a non-zero real number");
  const PolarGrid& g = s.grid;
  const auto r = static_cast<std::size_t>(s.r);
  ThermoReport rep;
  rep.beta = beta;
  rep.reference = ref.name();
  rep.p.assign(r, ScalarField(g));
  rep.S = ScalarField(g);
  rep.F = ScalarField(g);
  rep.min_S = std::numeric_limits<double>::infinity();
  rep.max_S = -std::numeric_limits<double>::infinity();
  std::vector<double> x(r);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double lr = reference_log(ref, s, n);
    double usum = 0.0;
    for (std::size_t j = 1; j < r; ++j) {
      x[j] = beta * (s.u[j - 1][n] - lr);
      usum += s.u[j - 1][n];
    }
    // vol(H_0) = 0 contributes 0^beta: nothing for beta > 0, a pole for beta < 0
    const bool zero0 = !(s.E[n] > 0.0);
    if (zero0 && beta < 0.0) throw std::domain_error("vol(H_0) vanishes and beta < 0");
    x[0] = zero0 ? -std::numeric_limits<double>::infinity() : beta * (std::log(s.E[n]) - usum - lr);
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (double v : x) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    double S = 0.0, total = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double p = std::exp(x[j] - lse);
      rep.p[j][n] = p;
      total += p;
      if (p > 0.0) S -= p * (x[j] - lse);
    }
    rep.S[n] = S;
    rep.F[n] = -lse / beta;
    rep.max_sum_defect = std::max(rep.max_sum_defect, std::abs(total - 1.0));
    rep.min_S = std::min(rep.min_S, S);
    rep.max_S = std::max(rep.max_S, S);
  }
  return rep;
}

/// max |(F_a(s1) - F_a(s2)) - (F_b(s1) - F_b(s2))| over nodes.
inline double free_energy_invariance(const TodaState& s1, const TodaState& s2, double beta, const ReferenceMetric& a,
                                     const ReferenceMetric& b) {
  if (!(s1.grid == s2.grid) || s1.r != s2.r) throw GridError("states must share grid and rank");
  const ThermoReport a1 = thermo(s1, beta, a), a2 = thermo(s2, beta, a);
  const ThermoReport b1 = thermo(s1, beta, b), b2 = thermo(s2, beta, b);
  double d = 0.0;
  for (std::size_t n = 0; n < s1.grid.size(); ++n)
    d = std::max(d, std::abs((a1.F[n] - a2.F[n]) - (b1.F[n] - b2.F[n])));
  return d;
}

// --- discrete distributional inequalities --------------------------------------------

/// Pointwise tolerance tol(node) = c * dr^2 * omega(node)^2 on rings 0..n_r-2
/// (the truncation error of the curvature terms grows like omega^2 at the rim).
/// c is 10x the worst scaled defect of the sum inequality on the exact
/// hyperbolic state, where that inequality is an equality.
struct DiscreteTolerance {
  double c = 0.0;
  double dr = 0.0;
  double at(const PolarGrid& g, std::size_t node) const {
    const double om = omega_density(g.rho(node / g.n_theta));
    return c * dr * dr * om * om;
  }
  /// c dr^2: tol_disc at a fixed point up to the omega^2 profile.
  double coefficient() const { return c * dr * dr; }
};

/// Delta_d(log sum_{j=1}^r vol H_j) / 4 at interior nodes (last ring zero).
inline ScalarField quarter_laplacian_log_sum(const TodaState& s) {
  ScalarField f(s.grid);
  for (std::size_t n = 0; n < s.grid.size(); ++n) {
    const auto v = volumes(s, n);
    double sum = 0.0;
    for (double x : v) sum += x;  // H_r = H_0 counted once
    f[n] = std::log(sum);
  }
  ScalarField lap = laplacian_interior(f);
  for (double& x : lap.values) x *= 0.25;
  return lap;
}

/// sum_{j=1}^r (vol H_{j-1} - vol H_j)^2 / sum_{j=1}^r vol H_j.
inline double cyclic_square_ratio(const std::vector<double>& v) {
  const std::size_t r = v.size();
  double num = 0.0, den = 0.0;
  for (std::size_t j = 1; j <= r; ++j) {
    const double d = v[j - 1] - v[j % r];
    num += d * d;
    den += v[j % r];
  }
  return num / den;
}

inline DiscreteTolerance calibrate_tol_disc(const PolarGrid& g, int r) {
  const TodaState ex = exact_hyperbolic(r, g, background(g));
  const ScalarField lhs = quarter_laplacian_log_sum(ex);
  double worst = 0.0;
  for (std::size_t n = 0; n + g.n_theta < g.size(); ++n) {
    const double defect = lhs[n] - cyclic_square_ratio(volumes(ex, n));
    const double om = omega_density(g.rho(n / g.n_theta));
    worst = std::max(worst, std::abs(defect) / (g.dr() * g.dr() * om * om));
  }
  return {10.0 * worst, g.dr()};
}

struct InequalityReport {
  std::string name;
  double min_margin = std::numeric_limits<double>::infinity();  // lhs - rhs
  double min_scaled_margin = std::numeric_limits<double>::infinity();  // (lhs - rhs) / tol
  std::size_t checked = 0;
  std::vector<std::size_t> violations;
  bool passed = true;
};

inline void record(InequalityReport& rep, std::size_t node, double margin, double tol) {
  ++rep.checked;
  rep.min_margin = std::min(rep.min_margin, margin);
  rep.min_scaled_margin = std::min(rep.min_scaled_margin, margin / tol);
  if (margin < -tol) {
    rep.violations.push_back(node);
    rep.passed = false;
  }
}

struct MasterReport {
  DiscreteTolerance tol;
  InequalityReport well_known;               // reference-free after cancelling i F_ref
  InequalityReport background;               // H = M_phi h_X^{-1}
  std::vector<InequalityReport> per_h;       // H = H_i, i = 1..r-1
  bool passed = true;
};

/// All three master inequalities at interior nodes. After multiplying by
/// vol(H) the curvature term of the chosen metric cancels identically, so
/// each check reads  Delta_d log sum / 4 >= rhs.
inline MasterReport check_master_inequalities(const TodaState& s, double M_phi, const DiscreteTolerance& tol,
                                              double delta = -1.0) {
  const LemmaConstants c = lemma_constants(s.r);
  // the H_i form uses min{C/2, delta}; delta defaults to C/2 (see lemma_lab)
  const double c1_hi = delta > 0.0 ? std::min(c.C1, delta) : c.C1;
  const double c2_hi = 2.0 * s.r * c.C;
  MasterReport rep;
  rep.tol = tol;
  rep.well_known.name = "well_known";
  rep.background.name = "C1C2";
  for (int i = 1; i < s.r; ++i) {
    rep.per_h.emplace_back();
    rep.per_h.back().name = "H_" + std::to_string(i);
  }
  const ScalarField lhs = quarter_laplacian_log_sum(s);
  const PolarGrid& g = s.grid;
  for (std::size_t n = 0; n + g.n_theta < g.size(); ++n) {
    const auto v = volumes(s, n);
    double sum = 0.0;
    for (double x : v) sum += x;
    const double t = tol.at(g, n);
    record(rep.well_known, n, lhs[n] - cyclic_square_ratio(v), t);
    const double vh = M_phi * omega_density(g.rho(n / g.n_theta));
    record(rep.background, n, lhs[n] - (c.C1 * sum - c.C2 * vh), t);
    for (int i = 1; i < s.r; ++i)
      record(rep.per_h[static_cast<std::size_t>(i - 1)], n, lhs[n] - (c1_hi * sum - c2_hi * v[static_cast<std::size_t>(i)]), t);
  }
  rep.passed = rep.well_known.passed && rep.background.passed;
  for (const auto& h : rep.per_h) rep.passed = rep.passed && h.passed;
  return rep;
}

/// Delta(sum s_j)/4 >= sum_j s_{j-1}^{-1} (s_{j-1} - s_j)^2 vol(H_{j-1}) with
/// s_j = h'_j / h_j and s_0 = s_r; vol(H) taken from `a`.
inline InequalityReport s_subharmonicity_check(const TodaState& a, const TodaState& b, const DiscreteTolerance& tol) {
  if (!(a.grid == b.grid) || a.r != b.r) throw GridError("states must share grid and rank");
  for (std::size_t n = 0; n < a.grid.size(); ++n)
    if (a.E[n] != b.E[n]) throw std::invalid_argument("states must come from the same weight");
  const HWeights ha = reconstruct_h(a), hb = reconstruct_h(b);
  const PolarGrid& g = a.grid;
  const auto r = static_cast<std::size_t>(a.r);
  ScalarField sum(g);
  for (std::size_t n = 0; n < g.size(); ++n)
    for (std::size_t j = 0; j < r; ++j) sum[n] += std::exp(hb.w[j][n] - ha.w[j][n]);
  const ScalarField lap = laplacian_interior(sum);
  InequalityReport rep;
  rep.name = "s";
  std::vector<double> sj(r);
  for (std::size_t n = 0; n + g.n_theta < g.size(); ++n) {
    for (std::size_t j = 0; j < r; ++j) sj[j] = std::exp(hb.w[j][n] - ha.w[j][n]);  // sj[j] = s_{j+1}
    const auto v = volumes(a, n);
    double rhs = 0.0;
    for (std::size_t j = 1; j <= r; ++j) {
      const double prev = sj[(j + r - 2) % r], cur = sj[j - 1];  // s_{j-1}, s_j with s_0 = s_r
      rhs += (prev - cur) * (prev - cur) / prev * v[j - 1];
    }
    record(rep, n, 0.25 * lap[n] - rhs, tol.at(g, n));
  }
  return rep;
}

// --- serialisation ---------------------------------------------------------------

inline nlohmann::json to_json(const BoundsReport& b) {
  std::vector<std::size_t> nl, nu;
  for (const auto& v : b.lower_violations) nl.push_back(v.size());
  for (const auto& v : b.upper_violations) nu.push_back(v.size());
  return {{"r", b.r},
          {"M_phi", b.M_phi},
          {"C", b.constants.C},
          {"C1", b.constants.C1},
          {"C2", b.constants.C2},
          {"C_M_phi", b.C_M},
          {"upper_factor", b.upper_factor},
          {"min_ratio", b.min_ratio},
          {"max_ratio", b.max_ratio},
          {"lower_violations", nl},
          {"upper_violations", nu},
          {"passed", b.passed}};
}

inline nlohmann::json to_json(const KhnReport& k) {
  return {{"passed", k.passed},
          {"max_excess_chain", std::isfinite(k.max_excess_chain) ? nlohmann::json(k.max_excess_chain) : nlohmann::json()},
          {"max_excess_top", k.max_excess_top},
          {"violations", k.violations.size()}};
}

inline nlohmann::json to_json(const CompletenessReport& c) {
  return {{"rays", c.rays},
          {"poincare_length", c.poincare},
          {"length", c.length},
          {"increasing", c.increasing},
          {"lower_bound", c.lower_bound},
          {"certified", c.certified}};
}

inline nlohmann::json to_json(const InequalityReport& r) {
  return {{"name", r.name},
          {"min_margin", r.min_margin},
          {"min_margin_over_tol", r.min_scaled_margin},
          {"checked", r.checked},
          {"violations", r.violations.size()},
          {"passed", r.passed}};
}

inline nlohmann::json to_json(const MasterReport& m) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& h : m.per_h) per.push_back(to_json(h));
  return {{"tol_disc_c", m.tol.c},
          {"well_known", to_json(m.well_known)},
          {"C1C2", to_json(m.background)},
          {"H_i", per},
          {"passed", m.passed}};
}

inline nlohmann::json to_json(const ThermoReport& t) {
  return {{"beta", t.beta},
          {"reference", t.reference},
          {"max_sum_defect", t.max_sum_defect},
          {"min_S", t.min_S},
          {"max_S", t.max_S}};
}

}  // namespace toda

#endif  // TODA_ANALYSIS_HPP
