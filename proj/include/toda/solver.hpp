#ifndef TODA_SOLVER_HPP
#define TODA_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "toda/grid.hpp"
#include "toda/toda.hpp"
#include "toda/weights.hpp"

namespace toda {

enum class Scheme { Newton, Monotone };

inline std::string to_string(Scheme s) { return s == Scheme::Newton ? "newton" : "monotone"; }

struct SolveOptions {
  double newton_tol = 1e-10;  // on the stencil-normalised residual
  int max_newton = 50;
  double backtrack = 0.5;
  double min_step = 0x1p-20;
  double linear_tol = 1e-12;
  double step_tol = 1e-9;  // once the residual is below tolerance, polish until steps are this small
  Scheme scheme = Scheme::Newton;
  double monotone_tol = 1e-10;  // bracket gap
  int max_monotone = 20000;

  void validate() const {
    if (!(newton_tol > 0.0) || !(linear_tol > 0.0) || !(monotone_tol > 0.0))
      throw std::invalid_argument("solver tolerances must be positive");
    if (max_newton < 1 || max_monotone < 1) throw std::invalid_argument("iteration budgets must be at least 1");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("backtracking factor must lie in (0, 1)");
    if (!(min_step > 0.0 && min_step <= 1.0)) throw std::invalid_argument("minimum step must lie in (0, 1]");
  }
};

struct BracketCertificate {
  bool checked = false;
  bool sub_below = true;    // lower iterate never above the upper one
  bool monotone = true;     // lower increases, upper decreases
  double max_violation = 0.0;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;  // normalised max-norm per accepted iterate
  double raw_residual = 0.0;             // plain max |R_j|
  double normalized_residual = 0.0;
  BracketCertificate bracket;
  double wall_time = 0.0;
  Scheme scheme = Scheme::Newton;
  std::string message;
};

inline nlohmann::json to_json(const SolveReport& r) {
  return {{"converged", r.converged},
          {"scheme", to_string(r.scheme)},
          {"iterations", r.iterations},
          {"residual_history", r.residual_history},
          {"raw_residual", r.raw_residual},
          {"normalized_residual", r.normalized_residual},
          {"bracket_certificate",
           {{"checked", r.bracket.checked},
            {"sub_below_super", r.bracket.sub_below},
            {"monotone", r.bracket.monotone},
            {"max_violation", r.bracket.max_violation}}},
          {"wall_time", r.wall_time},
          {"message", r.message}};
}

struct SolveResult {
  TodaState state;
  SolveReport report;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, SolveResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SolveResult& partial() const { return partial_; }

 private:
  SolveResult partial_;
};

class LinearSolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BracketViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// --- boundary data --------------------------------------------------------

/// Dirichlet data with d h_j^{-1} (x) h_{j+1} = (1/2) h_X^{-1} on the ring:
/// u_j = -2 log(1 - R^2) for every j.
inline std::vector<RingValues> boundary_lm(const PolarGrid& g, int r) {
  const double v = -2.0 * std::log1p(-g.outer_radius * g.outer_radius);
  return std::vector<RingValues>(static_cast<std::size_t>(r - 1), RingValues(g.n_theta, v));
}

/// Same data with every density multiplied by `factor` (uniqueness seeds).
inline std::vector<RingValues> boundary_lm_scaled(const PolarGrid& g, int r, double factor) {
  auto b = boundary_lm(g, r);
  for (auto& ring : b)
    for (double& v : ring) v += std::log(factor);
  return b;
}

inline bool symmetric_boundary(const std::vector<RingValues>& b, double tol = 0.0) {
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t k = 0; k < b[j].size(); ++k)
      if (std::abs(b[j][k] - b[b.size() - 1 - j][k]) > tol) return false;
  return true;
}

// --- linear algebra helpers ----------------------------------------------

/// Discrete Laplacian with homogeneous Dirichlet data, minus diag(shift).
inline Eigen::SparseMatrix<double> laplacian_matrix(const PolarGrid& g, const std::vector<double>& shift = {}) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * 5);
  for (std::size_t i = 0; i < g.n_r; ++i) {
    const StencilRow st = stencil_row(g, i);
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const auto row = static_cast<Eigen::Index>(g.index(i, k));
      const auto [ii, ki] = inner_neighbour(g, i, k);
      const double s = shift.empty() ? 0.0 : shift[g.index(i, k)];
      trip.emplace_back(row, row, st.center - s);
      if (st.inner != 0.0) trip.emplace_back(row, static_cast<Eigen::Index>(g.index(ii, ki)), st.inner);
      if (!st.outer_is_boundary) trip.emplace_back(row, static_cast<Eigen::Index>(g.index(i + 1, k)), st.outer);
      trip.emplace_back(row, static_cast<Eigen::Index>(g.index(i, (k + 1) % g.n_theta)), st.angular);
      trip.emplace_back(row, static_cast<Eigen::Index>(g.index(i, (k + g.n_theta - 1) % g.n_theta)), st.angular);
    }
  }
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

/// Contribution of Dirichlet data to the Laplacian at the last ring.
inline Eigen::VectorXd boundary_contribution(const PolarGrid& g, const RingValues& b) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  const StencilRow st = stencil_row(g, g.n_r - 1);
  for (std::size_t k = 0; k < g.n_theta; ++k) v(static_cast<Eigen::Index>(g.index(g.n_r - 1, k))) = st.outer * b[k];
  return v;
}

/// Block-diagonal S = W_node (x) block, with W the symmetrising ring weights.
inline Eigen::SparseMatrix<double> weight_matrix(const PolarGrid& g, const Eigen::MatrixXd& block) {
  const Eigen::Index m = block.rows();
  const std::vector<double> W = symmetrising_weights(g);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * static_cast<std::size_t>(m * m));
  for (std::size_t node = 0; node < g.size(); ++node) {
    const auto base = static_cast<Eigen::Index>(node) * m;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        if (block(a, b) != 0.0) trip.emplace_back(base + a, base + b, W[node / g.n_theta] * block(a, b));
  }
  Eigen::SparseMatrix<double> S(static_cast<Eigen::Index>(g.size()) * m, static_cast<Eigen::Index>(g.size()) * m);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

/// Inverse of the A_{r-1} Cartan matrix.
inline Eigen::MatrixXd inverse_cartan(int r) {
  const int m = r - 1;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    C(i, i) = 2.0;
    if (i + 1 < m) C(i, i + 1) = C(i + 1, i) = -1.0;
  }
  return C.inverse();
}

////////////////////////////////////////////////////////////////////////////////
/// Solves A x = b for operators that become symmetric negative definite
/// after left multiplication by S: the polar Laplacian (minus a nonnegative
/// diagonal) with S = W, and the Toda Jacobian with S = W (x) C^{-1}, where
/// C^{-1} e_1 + C^{-1} e_{r-1} = (1, ..., 1) turns the H_0 coupling into a
/// symmetric rank-one term. -S A is factorised by sparse LDL^T.
////////////////////////////////////////////////////////////////////////////////
class SymmetrizedSolver {
 public:
  SymmetrizedSolver(const Eigen::SparseMatrix<double>& A, const Eigen::SparseMatrix<double>& S) : A_(A), S_(S) {
    const Eigen::SparseMatrix<double> B = -(S_ * A_);
    ldlt_.compute(B);
    if (ldlt_.info() != Eigen::Success) throw LinearSolveFailure("sparse LDL^T factorisation failed");
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b, double rel_tol) {
    auto raw = [&](const Eigen::VectorXd& rhs) {
      Eigen::VectorXd x = ldlt_.solve(-(S_ * rhs));
      if (ldlt_.info() != Eigen::Success || !x.allFinite()) throw LinearSolveFailure("sparse LDL^T solve failed");
      return x;
    };
    Eigen::VectorXd x = raw(b);
    const double bn = b.norm();
    if (bn > 0.0) {
      // one step of iterative refinement keeps the relative residual at round-off
      Eigen::VectorXd res = b - A_ * x;
      if (res.norm() > rel_tol * bn) {
        x += raw(res);
        res = b - A_ * x;
      }
      if (res.norm() > std::max(rel_tol, 1e-9) * bn)
        throw LinearSolveFailure("linear solve residual " + std::to_string(res.norm() / bn) + " above tolerance");
    }
    return x;
  }

 private:
  Eigen::SparseMatrix<double> A_;
  Eigen::SparseMatrix<double> S_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

inline SymmetrizedSolver scalar_solver(const PolarGrid& g, const std::vector<double>& shift = {}) {
  return SymmetrizedSolver(laplacian_matrix(g, shift), weight_matrix(g, Eigen::MatrixXd::Identity(1, 1)));
}

inline ScalarField harmonic_extension(const PolarGrid& g, const RingValues& b) {
  SymmetrizedSolver solver = scalar_solver(g);
  const Eigen::VectorXd x = solver.solve(-boundary_contribution(g, b), 1e-12);
  ScalarField out(g);
  for (std::size_t n = 0; n < g.size(); ++n) out[n] = x(static_cast<Eigen::Index>(n));
  return out;
}

// --- residual norms ---------------------------------------------------------

/// max_j,nodes |R_j| / |stencil diagonal|. The diagonal grows like
/// 1/(rho dtheta)^2 near the centre, where the plain residual sits at
/// round-off times that factor.
inline double normalized_norm(const std::vector<ScalarField>& R) {
  double m = 0.0;
  const PolarGrid& g = R.front().grid;
  std::vector<double> scale(g.n_r);
  for (std::size_t i = 0; i < g.n_r; ++i) scale[i] = stencil_scale(g, i);
  for (const auto& f : R)
    for (std::size_t i = 0; i < g.n_r; ++i)
      for (std::size_t k = 0; k < g.n_theta; ++k) m = std::max(m, std::abs(f(i, k)) / scale[i]);
  return m;
}

inline double raw_norm(const std::vector<ScalarField>& R) {
  double m = 0.0;
  for (const auto& f : R)
    for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

// --- Newton -----------------------------------------------------------------

/// Initial guess: pointwise max of the harmonic extension of the data and the
/// flat state (1/r) log E where E > 0.
inline std::vector<ScalarField> initial_guess(const PolarGrid& g, int r, const ScalarField& E,
                                              const std::vector<RingValues>& boundary) {
  std::vector<ScalarField> u;
  for (int j = 1; j < r; ++j) {
    ScalarField f = harmonic_extension(g, boundary[static_cast<std::size_t>(j - 1)]);
    for (std::size_t n = 0; n < g.size(); ++n)
      if (E[n] > 0.0) f[n] = std::max(f[n], std::log(E[n]) / r);
    u.push_back(std::move(f));
  }
  return u;
}

inline void check_dirichlet_inputs(const WeightModel& w, const PolarGrid& g, const std::vector<RingValues>& b) {
  if (b.size() != static_cast<std::size_t>(w.rank - 1))
    throw std::invalid_argument("boundary data needs one ring per u_j (r - 1 rings)");
  for (const auto& ring : b) {
    if (ring.size() != g.n_theta) throw GridError("boundary ring length does not match n_theta");
    for (double v : ring)
      if (!std::isfinite(v)) throw std::invalid_argument("boundary data must be finite");
  }
}

/// Damped Newton from a given starting state (boundary and E already set).
inline SolveResult newton_from(TodaState s, const SolveOptions& opts) {
  opts.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.scheme = Scheme::Newton;
  auto R = residual(s);
  double norm = normalized_norm(R);
  rep.residual_history.push_back(norm);
  auto finish = [&](bool ok, std::string msg) {
    rep.converged = ok;
    rep.normalized_residual = norm;
    rep.raw_residual = raw_norm(R);
    rep.message = std::move(msg);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  double last_step = norm <= opts.newton_tol ? 0.0 : std::numeric_limits<double>::infinity();
  while (norm > opts.newton_tol || last_step > opts.step_tol) {
    if (norm <= opts.newton_tol && rep.iterations >= opts.max_newton) break;
    if (rep.iterations >= opts.max_newton) {
      finish(false, "Newton budget exhausted");
      throw NonConvergence("Newton did not converge within " + std::to_string(opts.max_newton) + " iterations",
                           {std::move(s), rep});
    }
    SymmetrizedSolver solver(jacobian(s), weight_matrix(s.grid, inverse_cartan(s.r)));
    const Eigen::VectorXd delta = solver.solve(-flatten(R), opts.linear_tol);
    std::vector<ScalarField> step = s.u;
    unflatten(delta, step);
    double t = 1.0;
    bool accepted = false;
    while (t >= opts.min_step) {
      TodaState trial = s;
      for (std::size_t j = 0; j < trial.u.size(); ++j)
        for (std::size_t n = 0; n < trial.grid.size(); ++n) trial.u[j][n] += t * step[j][n];
      auto Rt = residual(trial);
      const double nt = normalized_norm(Rt);
      if (std::isfinite(nt) && nt < (1.0 - 1e-4 * t) * norm) {
        s = std::move(trial);
        R = std::move(Rt);
        norm = nt;
        accepted = true;
        break;
      }
      t *= opts.backtrack;
    }
    if (!accepted && norm <= opts.newton_tol) break;  // already at round-off
    if (!accepted) {
      finish(false, "line search failed");
      throw NonConvergence("Newton line search stalled at residual " + std::to_string(norm), {std::move(s), rep});
    }
    last_step = t * delta.cwiseAbs().maxCoeff();
    ++rep.iterations;
    rep.residual_history.push_back(norm);
  }
  finish(true, "converged");
  return {std::move(s), rep};
}

inline SolveResult solve_monotone(const WeightModel& w, const PolarGrid& g,
                                  const std::vector<RingValues>& boundary, const SolveOptions& opts);

/// Dirichlet problem on the grid's disc for the given weight and data.
inline SolveResult solve_dirichlet(const WeightModel& w, const PolarGrid& g,
                                   const std::vector<RingValues>& boundary, const SolveOptions& opts = {}) {
  if (opts.scheme == Scheme::Monotone) return solve_monotone(w, g, boundary, opts);
  check_dirichlet_inputs(w, g, boundary);
  const BackgroundGeometry bg = background(g);
  TodaState s = make_state(w.rank, g, eval_E(w, g, bg), boundary);
  s.u = initial_guess(g, w.rank, s.E, boundary);
  return newton_from(std::move(s), opts);
}

////////////////////////////////////////////////////////////////////////////////
/// Monotone iteration for real data.
///
/// With u_j = u_{r-j} the metric is real, w_{r+1-j} = -w_j, and the system
/// closes on w_1..w_n (n = floor(r/2)):
///   Delta w_j = g_j = 4 (e^{u_{j-1}} - e^{u_j}),  u_j = w_{j+1} - w_j,
///   e^{u_0} = E e^{2 w_1},  w_{n+1} = -w_n (r even) or 0 (r odd).
/// g_j decreases in w_k for k != j, so the reduced system is cooperative and
/// the iteration (Delta - M) w^{k+1} = g(w^k) - M w^k is order preserving
/// once M_j bounds dg_j/dw_j on the bracket. The upper bracket is a scaled
/// hyperbolic state on a larger disc, the lower one a constant state.
////////////////////////////////////////////////////////////////////////////////
namespace monotone_detail {

struct Reduced {
  int r = 2;
  int n = 1;
  std::vector<ScalarField> w;  // w_1..w_n
};

// e^{u_j} for j = 0..n from reduced w at one node
inline void exp_u(const Reduced& R, const ScalarField& E, std::size_t node, std::vector<double>& eu) {
  const int n = R.n;
  auto wv = [&](int j) -> double {  // w_j for j = 1..n+1
    if (j <= n) return R.w[static_cast<std::size_t>(j - 1)][node];
    return R.r % 2 == 0 ? -R.w[static_cast<std::size_t>(n - 1)][node] : 0.0;
  };
  eu.assign(static_cast<std::size_t>(n + 1), 0.0);
  eu[0] = E[node] * std::exp(2.0 * wv(1));
  for (int j = 1; j <= n; ++j) eu[static_cast<std::size_t>(j)] = std::exp(wv(j + 1) - wv(j));
}

inline std::vector<ScalarField> g_field(const Reduced& R, const ScalarField& E) {
  std::vector<ScalarField> out(static_cast<std::size_t>(R.n), ScalarField(E.grid));
  std::vector<double> eu;
  for (std::size_t node = 0; node < E.size(); ++node) {
    exp_u(R, E, node, eu);
    for (int j = 1; j <= R.n; ++j)
      out[static_cast<std::size_t>(j - 1)][node] = 4.0 * (eu[static_cast<std::size_t>(j - 1)] - eu[static_cast<std::size_t>(j)]);
  }
  return out;
}

/// Per-node bound of dg_j/dw_j over the bracket [lo, hi].
inline std::vector<std::vector<double>> lipschitz(const Reduced& lo, const Reduced& hi, const ScalarField& E) {
  const int n = lo.n, r = lo.r;
  std::vector<std::vector<double>> M(static_cast<std::size_t>(n), std::vector<double>(E.size()));
  for (std::size_t node = 0; node < E.size(); ++node) {
    auto wmax = [&](int j) { return hi.w[static_cast<std::size_t>(j - 1)][node]; };
    auto wmin = [&](int j) { return lo.w[static_cast<std::size_t>(j - 1)][node]; };
    for (int j = 1; j <= n; ++j) {
      // max e^{u_{j-1}} and max e^{u_j} over the bracket
      const double left = j == 1 ? E[node] * std::exp(2.0 * wmax(1)) : std::exp(wmax(j) - wmin(j - 1));
      double right;
      if (j < n) right = std::exp(wmax(j + 1) - wmin(j));
      else if (r % 2 == 0) right = std::exp(-2.0 * wmin(j));
      else right = std::exp(-wmin(j));
      const double a = j == 1 ? 2.0 : 1.0;
      const double b = (j == n && r % 2 == 0) ? 2.0 : 1.0;
      M[static_cast<std::size_t>(j - 1)][node] = 4.0 * (a * left + b * right);
    }
  }
  return M;
}

inline Reduced reduce(const std::vector<ScalarField>& u, int r) {
  const PolarGrid& g = u.front().grid;
  TodaState tmp = make_state(r, g, ScalarField(g, 0.0, true));
  tmp.u = u;
  const HWeights h = reconstruct_h(tmp);
  Reduced R{r, r / 2, {}};
  for (int j = 0; j < R.n; ++j) R.w.push_back(h.w[static_cast<std::size_t>(j)]);
  return R;
}

inline std::vector<ScalarField> expand(const Reduced& R) {
  const PolarGrid& g = R.w.front().grid;
  std::vector<ScalarField> w(static_cast<std::size_t>(R.r), ScalarField(g));
  for (int j = 1; j <= R.n; ++j) {
    w[static_cast<std::size_t>(j - 1)] = R.w[static_cast<std::size_t>(j - 1)];
    for (std::size_t n = 0; n < g.size(); ++n)
      w[static_cast<std::size_t>(R.r - j)][n] = -R.w[static_cast<std::size_t>(j - 1)][n];
  }
  return HWeights{w}.to_u();
}

/// Reduced w-data on the Dirichlet ring.
inline std::vector<RingValues> reduce_boundary(const std::vector<RingValues>& b, int r) {
  const int n = r / 2;
  std::vector<RingValues> out(static_cast<std::size_t>(n), RingValues(b.front().size()));
  for (std::size_t k = 0; k < b.front().size(); ++k) {
    double w = 0.0;
    for (int j = 1; j < r; ++j) w -= static_cast<double>(r - j) * b[static_cast<std::size_t>(j - 1)][k];
    w /= r;
    for (int j = 1; j <= n; ++j) {
      out[static_cast<std::size_t>(j - 1)][k] = w;
      w += b[static_cast<std::size_t>(j - 1)][k];
    }
  }
  return out;
}

}  // namespace monotone_detail

/// Scaled hyperbolic state kappa * lambda_j * Poincare(D_{R'}) in u-variables.
inline std::vector<ScalarField> hyperbolic_bracket(const PolarGrid& g, int r, double kappa, double outer) {
  const auto lambda = lambda_vector(r);
  std::vector<ScalarField> u;
  for (int j = 1; j < r; ++j) {
    const double c = std::log(kappa * lambda[static_cast<std::size_t>(j - 1)]) + 2.0 * std::log(outer);
    u.push_back(ScalarField::from_function(g, [&](double rho, double) { return c - 2.0 * std::log(outer * outer - rho * rho); }));
  }
  return u;
}

inline SolveResult solve_monotone(const WeightModel& w, const PolarGrid& g,
                                  const std::vector<RingValues>& boundary, const SolveOptions& opts) {
  using namespace monotone_detail;
  opts.validate();
  check_dirichlet_inputs(w, g, boundary);
  if (!symmetric_boundary(boundary))
    throw std::invalid_argument("monotone scheme needs boundary data symmetric under j -> r - j");
  const auto t0 = std::chrono::steady_clock::now();
  const int r = w.rank;
  const int n = r / 2;
  const BackgroundGeometry bg = background(g);
  const ScalarField E = eval_E(w, g, bg);
  double e_max = 0.0;
  for (double v : E.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("monotone scheme needs bounded E");
    e_max = std::max(e_max, v);
  }
  const auto wb = reduce_boundary(boundary, r);
  const auto lambda = lambda_vector(r);

  // upper bracket: grow R' until it dominates the data on the ring
  double outer = g.outer_radius * 1.05 + 0.05;
  Reduced hi;
  for (int attempt = 0;; ++attempt) {
    hi = reduce(hyperbolic_bracket(g, r, 0.5, outer), r);
    // value on the Dirichlet ring
    std::vector<RingValues> ub;
    for (int j = 1; j < r; ++j)
      ub.emplace_back(g.n_theta, std::log(0.5 * lambda[static_cast<std::size_t>(j - 1)]) + 2.0 * std::log(outer) -
                                     2.0 * std::log(outer * outer - g.outer_radius * g.outer_radius));
    const auto hb = reduce_boundary(ub, r);
    bool ok = true;
    for (int j = 0; j < n; ++j)
      for (std::size_t k = 0; k < g.n_theta; ++k) ok = ok && hb[static_cast<std::size_t>(j)][k] >= wb[static_cast<std::size_t>(j)][k];
    if (ok) break;
    if (attempt > 200) throw std::invalid_argument("could not build an upper bracket for the boundary data");
    outer *= 1.5;
  }

  // lower bracket: constant u_j = log(lambda_j K)
  double log_big_lambda = 0.0;
  for (int k = 1; k < r; ++k) log_big_lambda -= 2.0 / r * (r - k) * std::log(lambda[static_cast<std::size_t>(k - 1)]);
  double logK = std::log(std::max(1.0, 2.0 * e_max * std::exp(log_big_lambda) / (r - 1))) / r;
  Reduced lo;
  for (int attempt = 0;; ++attempt) {
    std::vector<ScalarField> u;
    for (int j = 1; j < r; ++j) u.emplace_back(g, std::log(lambda[static_cast<std::size_t>(j - 1)]) + logK);
    lo = reduce(u, r);
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      const double c = lo.w[static_cast<std::size_t>(j)][0];
      for (std::size_t k = 0; k < g.n_theta; ++k) ok = ok && c <= wb[static_cast<std::size_t>(j)][k];
      for (std::size_t node = 0; node < g.size(); ++node) ok = ok && c <= hi.w[static_cast<std::size_t>(j)][node];
    }
    if (ok) break;
    if (attempt > 200) throw std::invalid_argument("could not build a lower bracket for the boundary data");
    logK += 1.0;
  }

  SolveReport rep;
  rep.scheme = Scheme::Monotone;
  rep.bracket.checked = true;
  auto M = lipschitz(lo, hi, E);
  std::vector<double> M_norm(static_cast<std::size_t>(n));
  std::vector<std::unique_ptr<SymmetrizedSolver>> solvers;
  std::vector<Eigen::VectorXd> bc;
  auto refactor = [&]() {
    solvers.clear();
    for (int j = 0; j < n; ++j) {
      solvers.push_back(std::make_unique<SymmetrizedSolver>(laplacian_matrix(g, M[static_cast<std::size_t>(j)]),
                                                            weight_matrix(g, Eigen::MatrixXd::Identity(1, 1))));
      M_norm[static_cast<std::size_t>(j)] = *std::max_element(M[static_cast<std::size_t>(j)].begin(), M[static_cast<std::size_t>(j)].end());
    }
  };
  refactor();
  for (int j = 0; j < n; ++j) bc.push_back(boundary_contribution(g, wb[static_cast<std::size_t>(j)]));

  auto step = [&](const Reduced& cur) {
    Reduced next = cur;
    const auto G = g_field(cur, E);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(g.size()));
      for (std::size_t node = 0; node < g.size(); ++node)
        rhs(static_cast<Eigen::Index>(node)) =
            G[static_cast<std::size_t>(j)][node] - M[static_cast<std::size_t>(j)][node] * cur.w[static_cast<std::size_t>(j)][node];
      const Eigen::VectorXd x = solvers[static_cast<std::size_t>(j)]->solve(rhs - bc[static_cast<std::size_t>(j)], opts.linear_tol);
      for (std::size_t node = 0; node < g.size(); ++node) next.w[static_cast<std::size_t>(j)][node] = x(static_cast<Eigen::Index>(node));
    }
    return next;
  };

  double gap = std::numeric_limits<double>::infinity();
  while (true) {
    gap = 0.0;
    for (int j = 0; j < n; ++j)
      for (std::size_t node = 0; node < g.size(); ++node)
        gap = std::max(gap, hi.w[static_cast<std::size_t>(j)][node] - lo.w[static_cast<std::size_t>(j)][node]);
    rep.residual_history.push_back(gap);
    if (gap <= opts.monotone_tol) break;
    if (rep.iterations >= opts.max_monotone) {
      rep.message = "monotone budget exhausted";
      break;
    }
    Reduced nlo = step(lo), nhi = step(hi);
    for (int j = 0; j < n; ++j)
      for (std::size_t node = 0; node < g.size(); ++node) {
        const double a0 = lo.w[static_cast<std::size_t>(j)][node], a1 = nlo.w[static_cast<std::size_t>(j)][node];
        const double b0 = hi.w[static_cast<std::size_t>(j)][node], b1 = nhi.w[static_cast<std::size_t>(j)][node];
        const double slack = 1e-12 * (1.0 + std::abs(a0) + std::abs(b0));
        const double v = std::max({a0 - a1, b1 - b0, a1 - b1});
        rep.bracket.max_violation = std::max(rep.bracket.max_violation, std::max(0.0, v));
        if (a1 < a0 - slack || b1 > b0 + slack) rep.bracket.monotone = false;
        if (a1 > b1 + slack) rep.bracket.sub_below = false;
      }
    if (!rep.bracket.monotone || !rep.bracket.sub_below)
      throw BracketViolation("monotone iteration left its bracket (max violation " +
                             std::to_string(rep.bracket.max_violation) + ")");
    lo = std::move(nlo);
    hi = std::move(nhi);
    ++rep.iterations;
    // tighter bracket -> smaller M; refactor once it drops by a quarter
    auto Mn = lipschitz(lo, hi, E);
    bool drop = false;
    for (int j = 0; j < n; ++j) {
      const double mx = *std::max_element(Mn[static_cast<std::size_t>(j)].begin(), Mn[static_cast<std::size_t>(j)].end());
      drop = drop || mx <= 0.75 * M_norm[static_cast<std::size_t>(j)];
    }
    if (drop) {
      M = std::move(Mn);
      refactor();
    }
  }

  Reduced mid = lo;
  for (int j = 0; j < n; ++j)
    for (std::size_t node = 0; node < g.size(); ++node)
      mid.w[static_cast<std::size_t>(j)][node] = 0.5 * (lo.w[static_cast<std::size_t>(j)][node] + hi.w[static_cast<std::size_t>(j)][node]);
  TodaState s = make_state(r, g, E, boundary);
  s.u = expand(mid);
  const auto R = residual(s);
  rep.raw_residual = raw_norm(R);
  rep.normalized_residual = normalized_norm(R);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.converged = gap <= opts.monotone_tol;
  if (!rep.converged)
    throw NonConvergence("monotone iteration did not close its bracket (gap " + std::to_string(gap) + ")", {std::move(s), rep});
  rep.message = "converged";
  return {std::move(s), rep};
}

}  // namespace toda

#endif  // TODA_SOLVER_HPP
