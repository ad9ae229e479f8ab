#ifndef TODA_DRIVERS_HPP
#define TODA_DRIVERS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "toda/parallel.hpp"
#include "toda/solver.hpp"

namespace toda {

// Exhaustion by the nested discs Y_i = D_{1 - 1/i}, i = 2..I, all cut from one
// master lattice with radial step 1/rings_per_unit, so every stage boundary is
// a lattice circle and restriction between stages is an index prefix.

enum class Order { Decreasing, Increasing };

inline std::string to_string(Order o) { return o == Order::Decreasing ? "decreasing" : "increasing"; }

struct ExhaustionOptions {
  int last_stage = 7;                // I; stages 2..I
  std::size_t rings_per_unit = 420;  // master lattice: dr = 1 / rings_per_unit
  std::size_t n_theta = 64;
  double inner_radius = 0.5;  // fixed compact subdisc for discrepancies
  double seed_factor = 1.0;   // boundary density = seed_factor * LM density
  double slack = 1e-9;
  // Expected ordering of w_j (j <= n) as the stage grows. With LM data the
  // stage solutions of u_j increase, so w_1..w_n decrease.
  Order order = Order::Decreasing;
  SolveOptions solve;

  void validate() const {
    if (last_stage < 2) throw std::invalid_argument("exhaustion needs at least stage 2");
    if (rings_per_unit < 4) throw std::invalid_argument("rings_per_unit too small");
    if (!(seed_factor > 0.0)) throw std::invalid_argument("seed_factor must be positive");
    if (!(inner_radius > 0.0) || inner_radius > 0.5)
      throw std::invalid_argument("inner_radius must lie in (0, 1/2] so that it sits inside every stage");
    for (int i = 2; i <= last_stage; ++i)
      if ((rings_per_unit * static_cast<std::size_t>(i - 1)) % static_cast<std::size_t>(i) != 0)
        throw GridError("stage radius 1 - 1/" + std::to_string(i) + " is not a ring of the master lattice");
    const double inner = inner_radius * static_cast<double>(rings_per_unit);
    if (std::abs(inner - std::round(inner)) > 1e-9) throw GridError("inner_radius is not a ring of the master lattice");
    solve.validate();
  }
  std::size_t inner_rings() const {
    return static_cast<std::size_t>(std::lround(inner_radius * static_cast<double>(rings_per_unit)));
  }
  PolarGrid stage_grid(int i) const {
    const std::size_t nr = rings_per_unit * static_cast<std::size_t>(i - 1) / static_cast<std::size_t>(i);
    return make_grid_with_step(nr, n_theta, 1.0 / static_cast<double>(rings_per_unit));
  }
};

struct OrderingCertificate {
  bool passed = true;
  Order order = Order::Decreasing;
  double max_violation = 0.0;  // largest step against the expected order
  double max_opposite = 0.0;   // largest step along the expected order
};

struct ExhaustionRun {
  int r = 0;
  ExhaustionOptions options;
  std::vector<int> stages;
  std::vector<double> radii;
  std::vector<TodaState> states;
  std::vector<SolveReport> reports;
  bool truncated = false;
  std::string failure;
  OrderingCertificate monotonicity;
  std::vector<double> discrepancy;  // max_j |w^{(i+1)} - w^{(i)}| on the inner disc
  bool discrepancy_decreasing = true;
};

/// w_1..w_r restricted to the first `rings` rings.
inline std::vector<ScalarField> inner_w(const TodaState& s, std::size_t rings) {
  const PolarGrid inner = make_grid_with_step(rings, s.grid.n_theta, s.grid.dr());
  std::vector<ScalarField> out;
  for (const auto& f : reconstruct_h(s).w) out.push_back(restrict_to(f, inner));
  return out;
}

inline double max_difference(const std::vector<ScalarField>& a, const std::vector<ScalarField>& b,
                             std::size_t components = std::numeric_limits<std::size_t>::max()) {
  double d = 0.0;
  for (std::size_t j = 0; j < std::min({a.size(), b.size(), components}); ++j)
    for (std::size_t n = 0; n < a[j].size(); ++n) d = std::max(d, std::abs(a[j][n] - b[j][n]));
  return d;
}

/// Compares `later` against `earlier` for w_1..w_n on the nodes of the smaller
/// grid, accumulating into `cert`.
inline void accumulate_order(const TodaState& earlier, const TodaState& later, OrderingCertificate& cert) {
  const std::size_t rings = std::min(earlier.grid.n_r, later.grid.n_r);
  const auto a = inner_w(earlier, rings), b = inner_w(later, rings);
  const double sign = cert.order == Order::Decreasing ? 1.0 : -1.0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(earlier.n()); ++j)
    for (std::size_t n = 0; n < a[j].size(); ++n) {
      const double step = sign * (b[j][n] - a[j][n]);  // > 0 means against the order
      cert.max_violation = std::max(cert.max_violation, step);
      cert.max_opposite = std::max(cert.max_opposite, -step);
    }
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

/// Stage solves with (scaled) LM boundary data. A failing stage truncates the
/// run; everything before it is reported.
inline ExhaustionRun run_exhaustion(const WeightModel& w, const ExhaustionOptions& opts = {}) {
  opts.validate();
  ExhaustionRun run;
  run.r = w.rank;
  run.options = opts;
  const std::size_t count = static_cast<std::size_t>(opts.last_stage - 1);
  std::vector<std::optional<SolveResult>> results(count);
  std::vector<std::string> errors(count);
  parallel_for(count, [&](std::size_t s) {
    const PolarGrid g = opts.stage_grid(static_cast<int>(s) + 2);
    try {
      results[s] = solve_dirichlet(w, g, boundary_lm_scaled(g, w.rank, opts.seed_factor), opts.solve);
    } catch (const NonConvergence& e) {
      errors[s] = e.what();
    } catch (const LinearSolveFailure& e) {
      errors[s] = e.what();
    }
  });
  for (std::size_t s = 0; s < count; ++s) {
    if (!results[s]) {
      run.truncated = true;
      run.failure = "stage " + std::to_string(s + 2) + ": " + errors[s];
      break;
    }
    run.stages.push_back(static_cast<int>(s) + 2);
    run.radii.push_back(results[s]->state.grid.outer_radius);
    run.states.push_back(std::move(results[s]->state));
    run.reports.push_back(results[s]->report);
  }
  run.monotonicity.order = opts.order;
  for (std::size_t i = 0; i < run.states.size(); ++i)
    for (std::size_t k = i + 1; k < run.states.size(); ++k) accumulate_order(run.states[i], run.states[k], run.monotonicity);
  run.monotonicity.passed = run.monotonicity.max_violation <= opts.slack;
  const std::size_t rings = opts.inner_rings();
  for (std::size_t i = 1; i < run.states.size(); ++i)
    run.discrepancy.push_back(max_difference(inner_w(run.states[i], rings), inner_w(run.states[i - 1], rings)));
  run.discrepancy_decreasing = strictly_decreasing(run.discrepancy);
  return run;
}

/// Extrapolated stage limit of u_j on the inner disc: the stage solutions are
/// smooth in eps = 1/i, so a polynomial through the last `points` stages is
/// evaluated at eps = 0 (Neville). points = 1 returns the last stage.
struct StageLimit {
  std::vector<ScalarField> u;
  std::size_t points = 1;
};

inline StageLimit richardson_limit(const ExhaustionRun& run, std::size_t points = 4) {
  const std::size_t m = run.states.size();
  if (m == 0) throw std::invalid_argument("empty exhaustion run");
  points = std::clamp<std::size_t>(points, 1, m);
  const std::size_t rings = run.options.inner_rings();
  const PolarGrid inner = make_grid_with_step(rings, run.states.back().grid.n_theta, run.states.back().grid.dr());
  std::vector<std::vector<ScalarField>> t;  // Neville tableau, column by column
  std::vector<double> eps;
  for (std::size_t s = m - points; s < m; ++s) {
    std::vector<ScalarField> u;
    for (const auto& f : run.states[s].u) u.push_back(restrict_to(f, inner));
    t.push_back(std::move(u));
    eps.push_back(1.0 / run.stages[s]);
  }
  for (std::size_t level = 1; level < points; ++level)
    for (std::size_t i = points - 1; i >= level; --i) {
      const double e0 = eps[i - level], e1 = eps[i];
      for (std::size_t j = 0; j < t[i].size(); ++j)
        for (std::size_t n = 0; n < t[i][j].size(); ++n)
          t[i][j][n] = (e0 * t[i][j][n] - e1 * t[i - 1][j][n]) / (e0 - e1);
    }
  return {std::move(t.back()), points};
}

inline nlohmann::json to_json(const OrderingCertificate& c) {
  return {{"passed", c.passed},
          {"order", to_string(c.order)},
          {"max_violation", c.max_violation},
          {"max_step_along_order", c.max_opposite}};
}

inline nlohmann::json to_json(const ExhaustionRun& run) {
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t s = 0; s < run.states.size(); ++s)
    stages.push_back({{"stage", run.stages[s]},
                      {"radius", run.radii[s]},
                      {"n_r", run.states[s].grid.n_r},
                      {"solve", to_json(run.reports[s])}});
  return {{"r", run.r},
          {"stages", stages},
          {"truncated", run.truncated},
          {"failure", run.failure},
          {"monotonicity", to_json(run.monotonicity)},
          {"inner_radius", run.options.inner_radius},
          {"discrepancy", run.discrepancy},
          {"discrepancy_decreasing", run.discrepancy_decreasing}};
}

// --- mollification ---------------------------------------------------------

struct MollificationRun {
  int r = 0;
  std::vector<double> radii;  // mollifier radii delta, decreasing
  std::vector<TodaState> states;
  std::vector<SolveReport> reports;
  std::optional<TodaState> direct;  // solve with the unmollified weight
  OrderingCertificate monotonicity;
  std::vector<double> distance_to_direct;  // on the inner disc, per delta
  double inner_radius = 0.5;
};

/// Fixed-grid policy: every mollified weight is solved on the same grid with
/// LM boundary data. As delta decreases phi_delta decreases, hence u_j
/// decreases and w_1..w_n increase.
inline MollificationRun run_mollification(const WeightModel& w, const MollifierSchedule& schedule,
                                          const PolarGrid& g, const SolveOptions& opts = {},
                                          double inner_radius = 0.5, double slack = 1e-9) {
  if (!std::holds_alternative<Differential>(w.kind) && !std::holds_alternative<LogAtoms>(w.kind))
    throw WeightError("mollification needs a Differential or LogAtoms weight");
  if (!(inner_radius > 0.0) || inner_radius > g.outer_radius) throw GridError("inner radius outside the grid");
  MollificationRun run;
  run.r = w.rank;
  run.inner_radius = inner_radius;
  run.radii = schedule.radii();
  const BackgroundGeometry bg = background(g);
  const auto b = boundary_lm(g, w.rank);
  const std::size_t count = run.radii.size();
  std::vector<std::optional<SolveResult>> results(count + 1);
  parallel_for(count + 1, [&](std::size_t s) {
    if (s < count)
      results[s] = solve_dirichlet(mollify(w, run.radii[s], g, bg), g, b, opts);
    else
      results[s] = solve_dirichlet(w, g, b, opts);
  });
  for (std::size_t s = 0; s < count; ++s) {
    run.states.push_back(std::move(results[s]->state));
    run.reports.push_back(results[s]->report);
  }
  run.direct = std::move(results[count]->state);
  run.monotonicity.order = Order::Increasing;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = i + 1; k < count; ++k) accumulate_order(run.states[i], run.states[k], run.monotonicity);
    accumulate_order(run.states[i], *run.direct, run.monotonicity);
  }
  run.monotonicity.passed = run.monotonicity.max_violation <= slack;
  const auto rings = static_cast<std::size_t>(std::floor(inner_radius / g.dr() + 1e-9));
  const auto ref = inner_w(*run.direct, rings);
  for (const auto& s : run.states) run.distance_to_direct.push_back(max_difference(inner_w(s, rings), ref));
  return run;
}

inline nlohmann::json to_json(const MollificationRun& run) {
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t s = 0; s < run.states.size(); ++s)
    stages.push_back({{"delta", run.radii[s]},
                      {"distance_to_direct", run.distance_to_direct[s]},
                      {"solve", to_json(run.reports[s])}});
  return {{"r", run.r},
          {"stages", stages},
          {"inner_radius", run.inner_radius},
          {"monotonicity", to_json(run.monotonicity)}};
}

// --- uniqueness probe --------------------------------------------------------

struct UniquenessProbe {
  ExhaustionRun first, second;
  std::vector<double> difference;  // per stage, max_j |w - w'| on the inner disc
  bool strictly_decreasing = false;
  double decay = 0.0;  // final / initial
  bool passed = false;
  double required_decay = 1e-2;
};

/// Two exhaustions whose stage data differ by constant density factors.
inline UniquenessProbe run_uniqueness_probe(const WeightModel& w, const ExhaustionOptions& base, double factor_a,
                                            double factor_b) {
  if (!(factor_a > 0.0) || !(factor_b > 0.0)) throw std::invalid_argument("seed factors must be positive");
  UniquenessProbe p;
  ExhaustionOptions a = base, b = base;
  a.seed_factor = factor_a;
  b.seed_factor = factor_b;
  p.first = run_exhaustion(w, a);
  p.second = run_exhaustion(w, b);
  const std::size_t rings = base.inner_rings();
  const std::size_t m = std::min(p.first.states.size(), p.second.states.size());
  for (std::size_t s = 0; s < m; ++s)
    p.difference.push_back(max_difference(inner_w(p.first.states[s], rings), inner_w(p.second.states[s], rings)));
  p.strictly_decreasing = toda::strictly_decreasing(p.difference);
  if (!p.difference.empty() && p.difference.front() > 0.0) p.decay = p.difference.back() / p.difference.front();
  p.passed = m >= 2 && p.strictly_decreasing && p.decay <= p.required_decay;
  return p;
}

inline nlohmann::json to_json(const UniquenessProbe& p) {
  return {{"difference", p.difference},
          {"strictly_decreasing", p.strictly_decreasing},
          {"decay", p.decay},
          {"required_decay", p.required_decay},
          {"passed", p.passed},
          {"first", to_json(p.first)},
          {"second", to_json(p.second)}};
}

}  // namespace toda

#endif  // TODA_DRIVERS_HPP
