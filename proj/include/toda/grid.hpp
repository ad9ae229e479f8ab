#ifndef TODA_GRID_HPP
#define TODA_GRID_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace toda {

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

////////////////////////////////////////////////////////////////////////////////
/// Offset polar lattice on the subdisc |z| < outer_radius of the unit disc.
///
/// Radial nodes sit at (i + 1/2) * dr, so no node lands on the origin. The
/// Dirichlet ring is the circle rho = outer_radius = n_r * dr, half a step
/// outside the last node ring. Two grids with equal dr and n_theta are
/// nested: the smaller grid's nodes are an index prefix of the larger one.
////////////////////////////////////////////////////////////////////////////////
struct PolarGrid {
  std::size_t n_r = 0;
  std::size_t n_theta = 0;
  double outer_radius = 0.0;

  double dr() const { return outer_radius / static_cast<double>(n_r); }
  double dtheta() const { return 2.0 * std::numbers::pi / static_cast<double>(n_theta); }
  std::size_t size() const { return n_r * n_theta; }

  double rho(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dr(); }
  double theta(std::size_t k) const { return static_cast<double>(k) * dtheta(); }
  std::size_t index(std::size_t i, std::size_t k) const { return i * n_theta + k; }

  std::complex<double> point(std::size_t i, std::size_t k) const {
    return std::polar(rho(i), theta(k));
  }
  /// Point on the Dirichlet ring at angular index k.
  std::complex<double> boundary_point(std::size_t k) const {
    return std::polar(outer_radius, theta(k));
  }

  /// Same radial step and angular count; used for nesting checks.
  bool same_lattice(const PolarGrid& other) const {
    return n_theta == other.n_theta && std::abs(dr() - other.dr()) <= 1e-14 * dr();
  }

  friend bool operator==(const PolarGrid& a, const PolarGrid& b) {
    return a.n_r == b.n_r && a.n_theta == b.n_theta && a.outer_radius == b.outer_radius;
  }
};

inline PolarGrid make_grid(std::size_t n_r, std::size_t n_theta, double outer_radius) {
  if (!(outer_radius > 0.0))
    throw GridError("outer_radius must be positive");
  if (outer_radius >= 1.0)
    throw GridError("domain is not a proper subdisc of the unit disc (outer_radius >= 1)");
  if (n_r < 2)
    throw GridError("n_r must be at least 2");
  if (n_theta < 8 || n_theta % 2 != 0)
    throw GridError("n_theta must be even and at least 8");
  return PolarGrid{n_r, n_theta, outer_radius};
}

/// Grid with a given radial step; outer_radius = n_r * dr.
inline PolarGrid make_grid_with_step(std::size_t n_r, std::size_t n_theta, double dr) {
  return make_grid(n_r, n_theta, static_cast<double>(n_r) * dr);
}

////////////////////////////////////////////////////////////////////////////////
/// Node values on a polar grid, row-major over (radial, angular) index.
////////////////////////////////////////////////////////////////////////////////
struct ScalarField {
  PolarGrid grid;
  std::vector<double> values;
  bool density = false;

  ScalarField() = default;
  explicit ScalarField(const PolarGrid& g, double fill = 0.0, bool is_density = false)
      : grid(g), values(g.size(), fill), density(is_density) {}

  double& operator()(std::size_t i, std::size_t k) { return values[grid.index(i, k)]; }
  double operator()(std::size_t i, std::size_t k) const { return values[grid.index(i, k)]; }
  double& operator[](std::size_t n) { return values[n]; }
  double operator[](std::size_t n) const { return values[n]; }
  std::size_t size() const { return values.size(); }

  template <class F>
  static ScalarField from_function(const PolarGrid& g, F&& f, bool is_density = false) {
    ScalarField out(g, 0.0, is_density);
    for (std::size_t i = 0; i < g.n_r; ++i)
      for (std::size_t k = 0; k < g.n_theta; ++k) out(i, k) = f(g.rho(i), g.theta(k));
    return out;
  }
};

/// Angular array on the Dirichlet ring.
using RingValues = std::vector<double>;

/// Index-prefix restriction of a field onto a nested smaller grid.
inline ScalarField restrict_to(const ScalarField& field, const PolarGrid& smaller) {
  if (!field.grid.same_lattice(smaller) || smaller.n_r > field.grid.n_r)
    throw GridError("restriction target is not nested in the source grid");
  ScalarField out(smaller, 0.0, field.density);
  std::copy_n(field.values.begin(), smaller.size(), out.values.begin());
  return out;
}

// Poincare background data (coordinate z on the unit disc).
inline double sigma_x(double rho) {
  const double f = 1.0 - rho * rho;
  return 0.5 * f * f;
}
inline double omega_density(double rho) {
  const double f = 1.0 - rho * rho;
  return 2.0 / (f * f);
}
inline double log_f(double rho) { return std::log1p(-rho * rho); }

struct BackgroundGeometry {
  ScalarField sigma_field;
  ScalarField omega_field;
  ScalarField log_f_field;
};

inline BackgroundGeometry background(const PolarGrid& g) {
  return BackgroundGeometry{
      ScalarField::from_function(g, [](double r, double) { return sigma_x(r); }, true),
      ScalarField::from_function(g, [](double r, double) { return omega_density(r); }, true),
      ScalarField::from_function(g, [](double r, double) { return log_f(r); }),
  };
}

////////////////////////////////////////////////////////////////////////////////
/// Five-point polar Laplacian  d_rr + d_r / rho + d_thth / rho^2.
///
/// Interior rings use the conservative form
///   [ (rho + h/2)(u_{i+1} - u_i) - (rho - h/2)(u_i - u_{i-1}) ] / (rho h^2),
/// which is exact on quadratics. On ring 0 the inward neighbour is the node
/// across the centre (angle + pi); its weight (rho_0 - h/2) vanishes. The last
/// ring sees the Dirichlet value at distance h/2 and uses the three-point
/// nonuniform stencil, also exact on quadratics.
////////////////////////////////////////////////////////////////////////////////
struct StencilRow {
  double center = 0.0;
  double inner = 0.0;    // radial neighbour i-1 (or across the centre on ring 0)
  double outer = 0.0;    // radial neighbour i+1, or the boundary value on the last ring
  double angular = 0.0;  // each of k-1, k+1
  bool outer_is_boundary = false;
};

inline StencilRow stencil_row(const PolarGrid& g, std::size_t i) {
  const double h = g.dr();
  const double rho = g.rho(i);
  StencilRow s;
  s.angular = 1.0 / (rho * rho * g.dtheta() * g.dtheta());
  if (i + 1 < g.n_r) {
    s.outer = (rho + 0.5 * h) / (rho * h * h);
    s.inner = (rho - 0.5 * h) / (rho * h * h);
  } else {
    const double a = 0.5 * h;  // distance to the Dirichlet ring
    const double d2m = 2.0 / (h * (h + a)), d2c = -2.0 / (h * a), d2p = 2.0 / (a * (h + a));
    const double d1m = -a / (h * (h + a)), d1c = (a - h) / (h * a), d1p = h / (a * (h + a));
    s.inner = d2m + d1m / rho;
    s.outer = d2p + d1p / rho;
    s.outer_is_boundary = true;
    s.center = d2c + d1c / rho - 2.0 * s.angular;
    return s;
  }
  s.center = -(s.inner + s.outer) - 2.0 * s.angular;
  return s;
}

/// Radial index and angular index of the inward neighbour of (i, k).
inline std::pair<std::size_t, std::size_t> inner_neighbour(const PolarGrid& g, std::size_t i,
                                                           std::size_t k) {
  if (i == 0) return {0, (k + g.n_theta / 2) % g.n_theta};
  return {i - 1, k};
}

/// Discrete Laplacian at every node; `boundary` holds the values on the
/// Dirichlet ring.
inline ScalarField laplacian(const ScalarField& field, std::span<const double> boundary) {
  const PolarGrid& g = field.grid;
  if (boundary.size() != g.n_theta)
    throw GridError("boundary array length " + std::to_string(boundary.size()) +
                    " does not match n_theta " + std::to_string(g.n_theta));
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n_r; ++i) {
    const StencilRow s = stencil_row(g, i);
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const std::size_t kp = (k + 1) % g.n_theta, km = (k + g.n_theta - 1) % g.n_theta;
      const auto [ii, ki] = inner_neighbour(g, i, k);
      const double outer = s.outer_is_boundary ? boundary[k] : field(i + 1, k);
      out(i, k) = s.center * field(i, k) + s.inner * field(ii, ki) + s.outer * outer +
                  s.angular * (field(i, kp) + field(i, km));
    }
  }
  return out;
}

/// Laplacian on rings 0..n_r-2 only (no boundary data needed); the last ring
/// is left at zero.
inline ScalarField laplacian_interior(const ScalarField& field) {
  const PolarGrid& g = field.grid;
  ScalarField out(g);
  for (std::size_t i = 0; i + 1 < g.n_r; ++i) {
    const StencilRow s = stencil_row(g, i);
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const std::size_t kp = (k + 1) % g.n_theta, km = (k + g.n_theta - 1) % g.n_theta;
      const auto [ii, ki] = inner_neighbour(g, i, k);
      out(i, k) = s.center * field(i, k) + s.inner * field(ii, ki) + s.outer * field(i + 1, k) +
                  s.angular * (field(i, kp) + field(i, km));
    }
  }
  return out;
}

/// Per-ring weights W_i under which the Dirichlet Laplacian is symmetric:
/// rho_i on rings with the conservative stencil, and on the last ring the
/// value that balances its coupling with the previous ring.
inline std::vector<double> symmetrising_weights(const PolarGrid& g) {
  std::vector<double> w(g.n_r);
  for (std::size_t i = 0; i < g.n_r; ++i) w[i] = g.rho(i);
  const StencilRow prev = stencil_row(g, g.n_r - 2), last = stencil_row(g, g.n_r - 1);
  w[g.n_r - 1] = w[g.n_r - 2] * prev.outer / last.inner;
  return w;
}

/// Magnitude of the stencil diagonal; used to normalise residuals.
inline double stencil_scale(const PolarGrid& g, std::size_t i) {
  return std::abs(stencil_row(g, i).center);
}

}  // namespace toda

#endif  // TODA_GRID_HPP
