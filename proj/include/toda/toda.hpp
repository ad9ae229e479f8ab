#ifndef TODA_TODA_HPP
#define TODA_TODA_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "toda/field_io.hpp"
#include "toda/grid.hpp"
#include "toda/weights.hpp"

namespace toda {

class StateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// lambda_j = j (r - j): twice the row sums of the inverse A_{r-1} Cartan matrix.
inline std::vector<double> lambda_vector(int r) {
  if (r < 2) throw StateError("rank r must be at least 2");
  std::vector<double> out;
  for (int j = 1; j < r; ++j) out.push_back(static_cast<double>(j) * (r - j));
  return out;
}

/// The same vector obtained by inverting the Cartan matrix explicitly.
inline std::vector<double> lambda_from_cartan(int r) {
  if (r < 2) throw StateError("rank r must be at least 2");
  const int m = r - 1;
  Eigen::MatrixXd cartan = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    cartan(i, i) = 2.0;
    if (i + 1 < m) cartan(i, i + 1) = cartan(i + 1, i) = -1.0;
  }
  const Eigen::VectorXd sums = cartan.inverse().rowwise().sum();
  std::vector<double> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = 2.0 * sums(i);
  return out;
}

////////////////////////////////////////////////////////////////////////////////
/// Discrete unknowns of the diagonal Toda system.
///
/// u[j-1] is the log-density of H_j on the frame d/dz (j = 1..r-1). The
/// cyclic closing term H_0 = H_r has density E * exp(-sum u). boundary[j-1]
/// holds the Dirichlet data of u_j on the ring rho = outer_radius.
////////////////////////////////////////////////////////////////////////////////
struct TodaState {
  int r = 2;
  PolarGrid grid;
  std::vector<ScalarField> u;
  ScalarField E;
  std::vector<RingValues> boundary;

  int n() const { return r / 2; }
  bool has_boundary() const { return boundary.size() == static_cast<std::size_t>(r - 1); }

  /// Density of H_0 at node `node`.
  double h0_density(std::size_t node) const {
    double s = 0.0;
    for (const auto& f : u) s += f[node];
    return E[node] * std::exp(-s);
  }
};

inline TodaState make_state(int r, const PolarGrid& g, ScalarField E, std::vector<RingValues> boundary = {}) {
  if (r < 2) throw StateError("rank r must be at least 2");
  if (!(E.grid == g)) throw StateError("E lives on a different grid");
  TodaState s{r, g, std::vector<ScalarField>(static_cast<std::size_t>(r - 1), ScalarField(g)), std::move(E),
              std::move(boundary)};
  return s;
}

/// H_j = lambda_j * H with H the Liouville solution of density (1 - rho^2)^{-2}.
inline TodaState exact_hyperbolic(int r, const PolarGrid& g, const BackgroundGeometry& bg) {
  const auto lambda = lambda_vector(r);
  TodaState s = make_state(r, g, ScalarField(g, 0.0, true));
  const double rb = std::log1p(-g.outer_radius * g.outer_radius);
  for (int j = 1; j < r; ++j) {
    const double ll = std::log(lambda[static_cast<std::size_t>(j - 1)]);
    ScalarField& f = s.u[static_cast<std::size_t>(j - 1)];
    for (std::size_t n = 0; n < g.size(); ++n) f[n] = ll - 2.0 * bg.log_f_field[n];
    s.boundary.emplace_back(g.n_theta, ll - 2.0 * rb);
  }
  return s;
}

/// u_j = (1/r) log E for every j; requires E > 0 on the grid.
inline TodaState exact_flat(const WeightModel& w, const PolarGrid& g, const BackgroundGeometry& bg) {
  if (const auto* d = std::get_if<Differential>(&w.kind))
    for (const auto& root : polynomial_roots(d->coeffs))
      if (std::abs(root) <= g.outer_radius) throw StateError("exact_flat needs E > 0, but q has a zero inside the domain");
  ScalarField E = eval_E(w, g, bg);
  for (std::size_t n = 0; n < g.size(); ++n)
    if (!(E[n] > 0.0)) throw StateError("exact_flat needs E > 0, but E vanishes at node " + std::to_string(n));
  TodaState s = make_state(w.rank, g, E);
  for (auto& f : s.u)
    for (std::size_t n = 0; n < g.size(); ++n) f[n] = std::log(E[n]) / w.rank;
  if (!std::holds_alternative<Samples>(w.kind)) {
    RingValues b = eval_E_boundary(w, g);
    for (double& v : b) {
      if (!(v > 0.0)) throw StateError("exact_flat needs E > 0 on the boundary ring");
      v = std::log(v) / w.rank;
    }
    s.boundary.assign(static_cast<std::size_t>(w.rank - 1), b);
  }
  return s;
}

/// R_j = Delta u_j - 4 (2 e^{u_j} - e^{u_{j-1}} - e^{u_{j+1}}), e^{u_0} = e^{u_r} = H_0.
inline std::vector<ScalarField> residual(const TodaState& s) {
  if (!s.has_boundary()) throw StateError("residual needs boundary data for every u_j");
  const PolarGrid& g = s.grid;
  const std::size_t m = static_cast<std::size_t>(s.r - 1);
  std::vector<ScalarField> out;
  out.reserve(m);
  for (std::size_t j = 0; j < m; ++j) out.push_back(laplacian(s.u[j], s.boundary[j]));
  std::vector<double> eu(m);
  for (std::size_t node = 0; node < g.size(); ++node) {
    const double h0 = s.h0_density(node);
    for (std::size_t j = 0; j < m; ++j) eu[j] = std::exp(s.u[j][node]);
    for (std::size_t j = 0; j < m; ++j) {
      const double left = j == 0 ? h0 : eu[j - 1];
      const double right = j + 1 == m ? h0 : eu[j + 1];
      out[j][node] -= 4.0 * (2.0 * eu[j] - left - right);
    }
  }
  return out;
}

/// Unknown index of u_j (1-based j) at a flat node index.
inline Eigen::Index unknown_index(const TodaState& s, std::size_t node, int j) {
  return static_cast<Eigen::Index>(node * static_cast<std::size_t>(s.r - 1) + static_cast<std::size_t>(j - 1));
}

/// Exact derivative of `residual` with respect to the interior unknowns.
inline Eigen::SparseMatrix<double> jacobian(const TodaState& s) {
  const PolarGrid& g = s.grid;
  const int m = s.r - 1;
  const auto dim = static_cast<Eigen::Index>(g.size()) * m;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(dim) * (5 + static_cast<std::size_t>(m) + 2));
  for (std::size_t i = 0; i < g.n_r; ++i) {
    const StencilRow st = stencil_row(g, i);
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const std::size_t node = g.index(i, k);
      const std::size_t kp = (k + 1) % g.n_theta, km = (k + g.n_theta - 1) % g.n_theta;
      const auto [ii, ki] = inner_neighbour(g, i, k);
      const double h0 = s.h0_density(node);
      for (int j = 1; j <= m; ++j) {
        const Eigen::Index row = unknown_index(s, node, j);
        const double euj = std::exp(s.u[static_cast<std::size_t>(j - 1)][node]);
        trip.emplace_back(row, row, st.center - 8.0 * euj);
        trip.emplace_back(row, unknown_index(s, g.index(ii, ki), j), st.inner);
        if (!st.outer_is_boundary) trip.emplace_back(row, unknown_index(s, g.index(i + 1, k), j), st.outer);
        trip.emplace_back(row, unknown_index(s, g.index(i, kp), j), st.angular);
        trip.emplace_back(row, unknown_index(s, g.index(i, km), j), st.angular);
        if (j > 1) trip.emplace_back(row, unknown_index(s, node, j - 1), 4.0 * std::exp(s.u[static_cast<std::size_t>(j - 2)][node]));
        if (j < m) trip.emplace_back(row, unknown_index(s, node, j + 1), 4.0 * std::exp(s.u[static_cast<std::size_t>(j)][node]));
        const int h0_terms = (j == 1) + (j == m);
        if (h0_terms > 0 && h0 > 0.0)
          for (int l = 1; l <= m; ++l) trip.emplace_back(row, unknown_index(s, node, l), -4.0 * h0 * h0_terms);
      }
    }
  }
  Eigen::SparseMatrix<double> J(dim, dim);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

/// Flattened node-major vector of the unknowns (or of a residual list).
inline Eigen::VectorXd flatten(const std::vector<ScalarField>& fields) {
  const std::size_t m = fields.size();
  const std::size_t size = fields.empty() ? 0 : fields.front().size();
  Eigen::VectorXd v(static_cast<Eigen::Index>(size * m));
  for (std::size_t node = 0; node < size; ++node)
    for (std::size_t j = 0; j < m; ++j) v(static_cast<Eigen::Index>(node * m + j)) = fields[j][node];
  return v;
}

inline void unflatten(const Eigen::VectorXd& v, std::vector<ScalarField>& fields) {
  const std::size_t m = fields.size();
  for (std::size_t node = 0; node < fields.front().size(); ++node)
    for (std::size_t j = 0; j < m; ++j) fields[j][node] = v(static_cast<Eigen::Index>(node * m + j));
}

////////////////////////////////////////////////////////////////////////////////
/// Log-densities w_1..w_r of the diagonal metric h = (h_1, ..., h_r) on the
/// frames dz^{(r-2j+1)/2}; det h = 1 means sum w_j = 0.
////////////////////////////////////////////////////////////////////////////////
struct HWeights {
  std::vector<ScalarField> w;

  std::vector<ScalarField> to_u() const {
    std::vector<ScalarField> u;
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
      ScalarField f(w[j].grid);
      for (std::size_t n = 0; n < f.size(); ++n) f[n] = w[j + 1][n] - w[j][n];
      u.push_back(std::move(f));
    }
    return u;
  }
};

inline HWeights reconstruct_h(const TodaState& s) {
  const PolarGrid& g = s.grid;
  const int r = s.r;
  HWeights h;
  h.w.assign(static_cast<std::size_t>(r), ScalarField(g));
  for (std::size_t n = 0; n < g.size(); ++n) {
    double w1 = 0.0;
    for (int j = 1; j < r; ++j) w1 -= static_cast<double>(r - j) * s.u[static_cast<std::size_t>(j - 1)][n];
    w1 /= r;
    h.w[0][n] = w1;
    for (int j = 1; j < r; ++j)
      h.w[static_cast<std::size_t>(j)][n] = h.w[static_cast<std::size_t>(j - 1)][n] + s.u[static_cast<std::size_t>(j - 1)][n];
  }
  return h;
}

/// max over j and nodes of |u_j - u_{r-j}|.
inline double reality_defect(const TodaState& s) {
  double d = 0.0;
  const auto m = static_cast<std::size_t>(s.r - 1);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t n = 0; n < s.grid.size(); ++n) d = std::max(d, std::abs(s.u[j][n] - s.u[m - 1 - j][n]));
  return d;
}

/// Restriction of a state onto a nested smaller grid; boundary data for the
/// smaller grid is read off the node ring sitting on its Dirichlet circle
/// when that ring exists in the source (interpolated halfway otherwise).
inline TodaState restrict_state(const TodaState& s, const PolarGrid& smaller) {
  TodaState out = make_state(s.r, smaller, restrict_to(s.E, smaller));
  for (std::size_t j = 0; j < s.u.size(); ++j) out.u[j] = restrict_to(s.u[j], smaller);
  if (smaller.n_r < s.grid.n_r) {
    for (const auto& f : s.u) {
      RingValues b(smaller.n_theta);
      for (std::size_t k = 0; k < smaller.n_theta; ++k) b[k] = 0.5 * (f(smaller.n_r - 1, k) + f(smaller.n_r, k));
      out.boundary.push_back(std::move(b));
    }
  } else {
    out.boundary = s.boundary;
  }
  return out;
}

// --- state directories ----------------------------------------------------

/// Writes manifest.json plus u_<j>.toda1 and E.toda1 into `dir`.
inline void save_state(const std::filesystem::path& dir, const TodaState& s, const nlohmann::json& extra = {}) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"r", s.r},
                             {"grid", {{"n_r", s.grid.n_r}, {"n_theta", s.grid.n_theta}, {"outer_radius", s.grid.outer_radius}}},
                             {"fields", nlohmann::json::array()}};
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    const std::string name = "u_" + std::to_string(j + 1);
    save_toda1(dir / (name + ".toda1"), s.u[j], name);
    manifest["fields"].push_back(name + ".toda1");
  }
  save_toda1(dir / "E.toda1", s.E, "E");
  manifest["fields"].push_back("E.toda1");
  if (s.has_boundary()) manifest["boundary"] = s.boundary;
  for (auto it = extra.begin(); extra.is_object() && it != extra.end(); ++it) manifest[it.key()] = it.value();
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw FormatError("cannot write manifest in " + dir.string());
}

inline TodaState load_state(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw FormatError("no manifest.json in " + dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(is);
  const int r = manifest.at("r").get<int>();
  const auto& gj = manifest.at("grid");
  const PolarGrid g{gj.at("n_r").get<std::size_t>(), gj.at("n_theta").get<std::size_t>(),
                    gj.at("outer_radius").get<double>()};
  ScalarField E = load_toda1(dir / "E.toda1").field;
  E.density = true;
  TodaState s = make_state(r, g, std::move(E));
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    s.u[j] = load_toda1(dir / ("u_" + std::to_string(j + 1) + ".toda1")).field;
    if (!(s.u[j].grid == g)) throw FormatError("field grid does not match manifest");
  }
  if (manifest.contains("boundary")) s.boundary = manifest["boundary"].get<std::vector<RingValues>>();
  return s;
}

}  // namespace toda

#endif  // TODA_TODA_HPP
