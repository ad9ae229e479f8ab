#ifndef TODA_WEIGHTS_HPP
#define TODA_WEIGHTS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "toda/common.hpp"
#include "toda/grid.hpp"

namespace toda {

class WeightError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_minus_infinity(double v) { return v == kMinusInfinity; }

/// Weight of an r-differential q(z) = sum c_k z^k: phi = (1/r) log|q|^2_{h_X}.
struct Differential {
  std::vector<std::complex<double>> coeffs;
};

struct Atom {
  std::complex<double> center;
  double mass = 1.0;
};

/// c * x^px * y^py
struct Monomial {
  int px = 0;
  int py = 0;
  double coeff = 0.0;
};

/// phi = sum_k mass_k log|z - a_k| + smooth(x, y).
struct LogAtoms {
  std::vector<Atom> atoms;
  std::vector<Monomial> smooth;
};

struct ZeroWeight {};

/// Pointwise phi samples on a fixed grid; -inf marks phi = -infinity.
struct Samples {
  ScalarField phi;
};

struct WeightModel {
  int rank = 2;
  std::variant<Differential, LogAtoms, ZeroWeight, Samples> kind;

  bool is_zero() const { return std::holds_alternative<ZeroWeight>(kind); }
};

inline void check_rank(int r) {
  if (r < 2) throw WeightError("rank r must be at least 2");
}

/// Differential weight; an all-zero coefficient list collapses to Zero.
inline WeightModel differential_weight(int r, std::vector<std::complex<double>> coeffs) {
  check_rank(r);
  while (!coeffs.empty() && coeffs.back() == std::complex<double>(0.0, 0.0)) coeffs.pop_back();
  if (coeffs.empty()) return WeightModel{r, ZeroWeight{}};
  return WeightModel{r, Differential{std::move(coeffs)}};
}

inline WeightModel atoms_weight(int r, std::vector<Atom> atoms, std::vector<Monomial> smooth = {}) {
  check_rank(r);
  for (const Atom& a : atoms) {
    if (std::abs(a.center) >= 1.0) throw WeightError("atom centre outside the open unit disc");
    if (!(a.mass > 0.0)) throw WeightError("atom mass must be positive");
  }
  return WeightModel{r, LogAtoms{std::move(atoms), std::move(smooth)}};
}

inline WeightModel zero_weight(int r) {
  check_rank(r);
  return WeightModel{r, ZeroWeight{}};
}

inline WeightModel samples_weight(int r, ScalarField phi) {
  check_rank(r);
  return WeightModel{r, Samples{std::move(phi)}};
}

// --- pointwise evaluation -------------------------------------------------

inline std::complex<double> eval_polynomial(const std::vector<std::complex<double>>& c,
                                            std::complex<double> z) {
  std::complex<double> acc(0.0, 0.0);
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
  return acc;
}

inline double eval_smooth(const std::vector<Monomial>& terms, double x, double y) {
  double s = 0.0;
  for (const Monomial& m : terms) s += m.coeff * std::pow(x, m.px) * std::pow(y, m.py);
  return s;
}

inline double laplacian_smooth(const std::vector<Monomial>& terms, double x, double y) {
  double s = 0.0;
  for (const Monomial& m : terms) {
    if (m.px >= 2) s += m.coeff * m.px * (m.px - 1) * std::pow(x, m.px - 2) * std::pow(y, m.py);
    if (m.py >= 2) s += m.coeff * m.py * (m.py - 1) * std::pow(x, m.px) * std::pow(y, m.py - 2);
  }
  return s;
}

/// Density E = e^{r phi} sigma_X^{-r} at an arbitrary point (analytic kinds).
inline double E_at(const WeightModel& w, std::complex<double> z) {
  if (const auto* d = std::get_if<Differential>(&w.kind)) return std::norm(eval_polynomial(d->coeffs, z));
  if (std::holds_alternative<ZeroWeight>(w.kind)) return 0.0;
  if (const auto* a = std::get_if<LogAtoms>(&w.kind)) {
    double log_e = 0.0;
    for (const Atom& at : a->atoms) {
      const double dist = std::abs(z - at.center);
      if (dist == 0.0) return 0.0;
      log_e += at.mass * std::log(dist);
    }
    log_e += eval_smooth(a->smooth, z.real(), z.imag());
    return std::exp(w.rank * (log_e - std::log(sigma_x(std::abs(z)))));
  }
  throw WeightError("sample weights cannot be evaluated off their grid");
}

/// Weight phi at an arbitrary point (analytic kinds); -inf where E = 0.
inline double phi_at(const WeightModel& w, std::complex<double> z) {
  const double log_sigma = std::log(sigma_x(std::abs(z)));
  if (const auto* d = std::get_if<Differential>(&w.kind)) {
    const double e = std::norm(eval_polynomial(d->coeffs, z));
    if (e == 0.0) return kMinusInfinity;
    return std::log(e) / w.rank + log_sigma;
  }
  if (std::holds_alternative<ZeroWeight>(w.kind)) return kMinusInfinity;
  if (const auto* a = std::get_if<LogAtoms>(&w.kind)) {
    double phi = eval_smooth(a->smooth, z.real(), z.imag());
    for (const Atom& at : a->atoms) {
      const double dist = std::abs(z - at.center);
      if (dist == 0.0) return kMinusInfinity;
      phi += at.mass * std::log(dist);
    }
    return phi;
  }
  throw WeightError("sample weights cannot be evaluated off their grid");
}

inline void check_samples_grid(const Samples& s, const PolarGrid& g) {
  if (!(s.phi.grid == g)) throw GridError("sample weight grid does not match the evaluation grid");
}

inline ScalarField eval_E(const WeightModel& w, const PolarGrid& g, const BackgroundGeometry& bg) {
  ScalarField out(g, 0.0, true);
  if (const auto* s = std::get_if<Samples>(&w.kind)) {
    check_samples_grid(*s, g);
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double phi = s->phi[n];
      out[n] = is_minus_infinity(phi) ? 0.0 : std::exp(w.rank * (phi - std::log(bg.sigma_field[n])));
    }
    return out;
  }
  for (std::size_t i = 0; i < g.n_r; ++i)
    for (std::size_t k = 0; k < g.n_theta; ++k) out(i, k) = E_at(w, g.point(i, k));
  return out;
}

/// E on the Dirichlet ring (analytic kinds only).
inline RingValues eval_E_boundary(const WeightModel& w, const PolarGrid& g) {
  RingValues out(g.n_theta);
  for (std::size_t k = 0; k < g.n_theta; ++k) out[k] = E_at(w, g.boundary_point(k));
  return out;
}

inline ScalarField eval_phi(const WeightModel& w, const PolarGrid& g, const BackgroundGeometry& bg) {
  (void)bg;
  if (const auto* s = std::get_if<Samples>(&w.kind)) {
    check_samples_grid(*s, g);
    return s->phi;
  }
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n_r; ++i)
    for (std::size_t k = 0; k < g.n_theta; ++k) out(i, k) = phi_at(w, g.point(i, k));
  return out;
}

// --- M_phi ----------------------------------------------------------------

struct SupBound {
  double value = 0.0;
  bool infinite = false;
};

/// sup of e^phi over the grid. Flagged infinite when the outermost ring's
/// maximum exceeds the next ring's by more than half (growth at the rim).
inline SupBound m_phi(const WeightModel& w, const PolarGrid& g, const BackgroundGeometry& bg) {
  const ScalarField phi = eval_phi(w, g, bg);
  SupBound out;
  double last = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < g.n_r; ++i)
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const double e = std::exp(phi(i, k));
      out.value = std::max(out.value, e);
      if (i + 1 == g.n_r) last = std::max(last, e);
      if (i + 2 == g.n_r) prev = std::max(prev, e);
    }
  out.infinite = prev > 0.0 && last > 1.5 * prev;
  return out;
}

// --- semipositivity ------------------------------------------------------

struct SemipositivityReport {
  bool passed = true;
  double tolerance = 0.0;
  double min_value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> violations;  // flat node indices
};

/// Checks Delta(phi)/4 + omega_X >= -tol, tol = 1e-8 * max omega density.
/// Analytic kinds use the exact Laplacian off the atoms and zeros (where the
/// curvature current is a positive point mass); samples use the discrete
/// Laplacian on rings that do not touch the boundary, with an added
/// truncation allowance, since flat weights sit exactly on the threshold:
/// dr^2 * omega^2 for the radial part (derivatives of log sigma_X scale with
/// omega) plus an angular error estimate from the doubled-step stencil.
inline SemipositivityReport validate_semipositivity(const WeightModel& w, const PolarGrid& g,
                                                    const BackgroundGeometry& bg) {
  SemipositivityReport rep;
  double max_omega = 0.0;
  for (double v : bg.omega_field.values) max_omega = std::max(max_omega, v);
  rep.tolerance = 1e-8 * max_omega;

  ScalarField curvature(g);
  std::size_t rings = g.n_r;
  bool discrete = false;
  if (const auto* a = std::get_if<LogAtoms>(&w.kind)) {
    for (std::size_t i = 0; i < g.n_r; ++i)
      for (std::size_t k = 0; k < g.n_theta; ++k) {
        const auto z = g.point(i, k);
        curvature(i, k) = laplacian_smooth(a->smooth, z.real(), z.imag()) / 4.0 + bg.omega_field(i, k);
      }
  } else if (std::holds_alternative<Differential>(w.kind)) {
    // (1/4r) Delta log|q|^2 vanishes off the zeros; the rest cancels exactly.
    for (std::size_t n = 0; n < g.size(); ++n) curvature[n] = 0.0;
  } else if (w.is_zero()) {
    // phi = -inf is the degenerate semipositive weight.
    for (std::size_t n = 0; n < g.size(); ++n) curvature[n] = 0.0;
  } else {
    const auto& s = std::get<Samples>(w.kind);
    check_samples_grid(s, g);
    for (double v : s.phi.values)
      if (!std::isfinite(v)) throw WeightError("semipositivity check needs finite phi; mollify first");
    const ScalarField lap = laplacian_interior(s.phi);
    for (std::size_t n = 0; n < g.size(); ++n) curvature[n] = lap[n] / 4.0 + bg.omega_field[n];
    rings = g.n_r - 1;
    discrete = true;
  }
  for (std::size_t i = 0; i < rings; ++i)
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const double c = curvature(i, k);
      rep.min_value = std::min(rep.min_value, c);
      double allowance = 0.0;
      if (discrete) {
        const auto& f = std::get<Samples>(w.kind).phi;
        const std::size_t n = g.n_theta;
        const double a1 = f(i, (k + 1) % n) - 2.0 * f(i, k) + f(i, (k + n - 1) % n);
        const double a2 = (f(i, (k + 2) % n) - 2.0 * f(i, k) + f(i, (k + n - 2) % n)) / 4.0;
        const double rho_dt = g.rho(i) * g.dtheta();
        allowance = g.dr() * g.dr() * bg.omega_field(i, k) * bg.omega_field(i, k) +
                    std::abs(a2 - a1) / (rho_dt * rho_dt) / 4.0;
      }
      if (c < -rep.tolerance - allowance) rep.violations.push_back(g.index(i, k));
    }
  rep.passed = rep.violations.empty();
  return rep;
}

// --- mollification -------------------------------------------------------

namespace detail {

inline double bump(double t) { return t < 1.0 ? std::exp(1.0 / (t * t - 1.0)) : 0.0; }

/// 2 pi integral_0^1 t bump(t) dt.
inline double bump_mass() {
  static const double mass = [] {
    auto f = [](double t) { return 2.0 * std::numbers::pi * t * bump(t); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 10, 1e-14);
  }();
  return mass;
}

/// Radial density of the unit-mass kernel.
inline double radial_density(double t) {
  return 2.0 * std::numbers::pi * t * bump(t) / bump_mass();
}

inline double integrate(auto f, double a, double b) {
  if (b <= a) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-13);
}

}  // namespace detail

/// Convolution of log|. - a| with the radius-delta kernel, evaluated at a
/// point at distance `dist` from a. Uses the circle means
/// max(log dist, log s), so only a radial integral remains.
inline double mollified_log_distance(double dist, double delta) {
  const double t_star = dist / delta;
  if (t_star >= 1.0) return std::log(dist);
  const double k_inner = detail::integrate(detail::radial_density, 0.0, t_star);
  const double log_tail = detail::integrate(
      [](double t) { return t > 0.0 ? detail::radial_density(t) * std::log(t) : 0.0; }, t_star, 1.0);
  const double log_dist_term = t_star > 0.0 ? std::log(dist) * k_inner : 0.0;
  return log_dist_term + std::log(delta) * (1.0 - k_inner) + log_tail;
}

class MollifierSchedule {
 public:
  explicit MollifierSchedule(std::vector<double> radii) : radii_(std::move(radii)) {
    if (radii_.empty()) throw WeightError("mollifier schedule is empty");
    for (std::size_t i = 0; i < radii_.size(); ++i) {
      if (!(radii_[i] > 0.0)) throw WeightError("mollifier radii must be positive");
      if (i > 0 && !(radii_[i] < radii_[i - 1]))
        throw WeightError("mollifier radii must be strictly decreasing");
    }
  }
  const std::vector<double>& radii() const { return radii_; }

 private:
  std::vector<double> radii_;
};

/// Zeros of a polynomial given by ascending coefficients (leading non-zero).
inline std::vector<std::complex<double>> polynomial_roots(const std::vector<std::complex<double>>& c) {
  const std::size_t deg = c.size() - 1;
  if (deg == 0) return {};
  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
  for (std::size_t i = 1; i < deg; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  for (std::size_t i = 0; i < deg; ++i)
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(deg - 1)) = -c[i] / c[deg];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  std::vector<std::complex<double>> roots;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) roots.push_back(solver.eigenvalues()(i));
  return roots;
}

/// Bilinear (rho, theta) interpolation of samples; radius clamped to the node range.
inline double interpolate_samples(const ScalarField& f, std::complex<double> z) {
  const PolarGrid& g = f.grid;
  double th = std::arg(z);
  if (th < 0.0) th += 2.0 * std::numbers::pi;
  const double x = std::clamp(std::abs(z) / g.dr() - 0.5, 0.0, static_cast<double>(g.n_r - 1));
  const auto i0 = std::min(static_cast<std::size_t>(x), g.n_r - 2);
  const double fx = x - static_cast<double>(i0);
  const double y = th / g.dtheta();
  const auto k0 = static_cast<std::size_t>(y) % g.n_theta;
  const std::size_t k1 = (k0 + 1) % g.n_theta;
  const double fy = y - std::floor(y);
  return (1 - fx) * ((1 - fy) * f(i0, k0) + fy * f(i0, k1)) + fx * ((1 - fy) * f(i0 + 1, k0) + fy * f(i0 + 1, k1));
}

/// Mollified weight on `g`, returned as samples. The logarithmic (subharmonic)
/// part of analytic weights is convolved exactly through circle means; their
/// smooth part (log sigma_X for differentials, the polynomial for atoms) is
/// carried over unchanged. Sample weights are convolved by tensor quadrature
/// of their bilinear interpolant.
inline WeightModel mollify(const WeightModel& w, double delta, const PolarGrid& g,
                           const BackgroundGeometry& bg) {
  if (!(delta > 0.0)) throw WeightError("mollifier radius must be positive");
  ScalarField phi(g);
  if (const auto* s = std::get_if<Samples>(&w.kind)) {
    if (g.outer_radius + delta > s->phi.grid.outer_radius - 0.5 * s->phi.grid.dr())
      throw WeightError("domain overflow: samples do not cover the mollification support");
    for (double v : s->phi.values)
      if (!std::isfinite(v)) throw WeightError("sample weights with -inf cannot be mollified by quadrature");
    constexpr int kAngles = 64;
    boost::math::quadrature::gauss<double, 30> rule;
    for (std::size_t i = 0; i < g.n_r; ++i)
      for (std::size_t k = 0; k < g.n_theta; ++k) {
        const auto z = g.point(i, k);
        auto radial = [&](double t) {
          double mean = 0.0;
          for (int l = 0; l < kAngles; ++l) {
            const double a = 2.0 * std::numbers::pi * (l + 0.5) / kAngles;
            mean += interpolate_samples(s->phi, z + std::polar(delta * t, a));
          }
          return detail::radial_density(t) * mean / kAngles;
        };
        phi(i, k) = rule.integrate(radial, 0.0, 1.0);
      }
    return samples_weight(w.rank, std::move(phi));
  }
  if (g.outer_radius + delta >= 1.0)
    throw WeightError("domain overflow: outer_radius + delta must stay below 1");
  if (w.is_zero()) {
    std::fill(phi.values.begin(), phi.values.end(), kMinusInfinity);
    return samples_weight(w.rank, std::move(phi));
  }
  if (const auto* d = std::get_if<Differential>(&w.kind)) {
    const auto roots = polynomial_roots(d->coeffs);
    const double log_lead = std::log(std::norm(d->coeffs.back()));
    for (std::size_t i = 0; i < g.n_r; ++i)
      for (std::size_t k = 0; k < g.n_theta; ++k) {
        const auto z = g.point(i, k);
        double acc = log_lead;
        for (const auto& a : roots) acc += 2.0 * mollified_log_distance(std::abs(z - a), delta);
        phi(i, k) = acc / w.rank + std::log(bg.sigma_field(i, k));
      }
    return samples_weight(w.rank, std::move(phi));
  }
  const auto& a = std::get<LogAtoms>(w.kind);
  for (std::size_t i = 0; i < g.n_r; ++i)
    for (std::size_t k = 0; k < g.n_theta; ++k) {
      const auto z = g.point(i, k);
      double acc = eval_smooth(a.smooth, z.real(), z.imag());
      for (const Atom& at : a.atoms) acc += at.mass * mollified_log_distance(std::abs(z - at.center), delta);
      phi(i, k) = acc;
    }
  return samples_weight(w.rank, std::move(phi));
}

}  // namespace toda

#endif  // TODA_WEIGHTS_HPP
