#ifndef TODA_LEMMA_LAB_HPP
#define TODA_LEMMA_LAB_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "toda/common.hpp"
#include "toda/parallel.hpp"

// Finite-dimensional checks of the pointwise linear-algebra inequalities
// behind the uniqueness argument. Everything here is a function of a tuple
// (H_1..H_{r-1}, phi, s); no grids involved.

namespace toda {

/// Pointwise data: H_1..H_{r-1} > 0, phi real or -inf, optional s with prod s = 1.
/// H_r = H_0 = e^{r phi} / prod H_j.
struct LemmaSample {
  int r = 2;
  std::vector<double> H;
  double phi = 0.0;
  std::vector<double> s;

  void validate() const {
    if (r < 2) throw std::invalid_argument("lemma sample: r must be >= 2");
    if (H.size() != static_cast<std::size_t>(r - 1))
      throw std::invalid_argument("lemma sample: need r-1 values of H");
    for (double h : H)
      if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("lemma sample: H_j must be positive");
    if (std::isnan(phi) || phi == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("lemma sample: phi must be real or -inf");
    if (!s.empty()) {
      if (s.size() != static_cast<std::size_t>(r)) throw std::invalid_argument("lemma sample: need r values of s");
      double logp = 0.0;
      for (double v : s) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("lemma sample: s_j must be positive");
        logp += std::log(v);
      }
      if (std::abs(std::expm1(logp)) > 1e-12) throw std::invalid_argument("lemma sample: prod s_j must be 1");
    }
  }

  double ephi() const { return std::exp(phi); }

  double top() const {
    if (phi == kMinusInfinity) return 0.0;
    double l = r * phi;
    for (double h : H) l -= std::log(h);
    return std::exp(l);
  }

  /// H_0, H_1, ..., H_r with H_0 = H_r.
  std::vector<double> cyclic() const {
    std::vector<double> c(static_cast<std::size_t>(r) + 1);
    c[0] = c[static_cast<std::size_t>(r)] = top();
    std::copy(H.begin(), H.end(), c.begin() + 1);
    return c;
  }
};

/// Sum_{j=1}^r (H_{j-1} - H_j)^2.
inline double chain_energy(const LemmaSample& x) {
  const auto c = x.cyclic();
  double e = 0.0;
  for (int j = 1; j <= x.r; ++j) e += (c[j - 1] - c[j]) * (c[j - 1] - c[j]);
  return e;
}

/// Sum_{j=1}^r H_j.
inline double total(const LemmaSample& x) {
  double t = x.top();
  for (double h : x.H) t += h;
  return t;
}

inline double lemma_constant(int r) { return 1.0 / (static_cast<double>(r) * r * (r - 1)); }

/// chain - C (sum H - r e^phi)^2, or for phi = -inf chain - 2C sum_{j<r} H_j^2.
inline double lemma1_margin(const LemmaSample& x) {
  x.validate();
  const double c = lemma_constant(x.r);
  const double lhs = chain_energy(x);
  if (x.phi == kMinusInfinity) {
    double sq = 0.0;
    for (double h : x.H) sq += h * h;
    return lhs - 2.0 * c * sq;
  }
  const double d = total(x) - x.r * x.ephi();
  return lhs - c * d * d;
}

inline bool lemma2_hypothesis(const LemmaSample& x, double Hbar) {
  return x.ephi() <= Hbar && total(x) >= 2.0 * x.r * Hbar;
}

/// True when the hypothesis fails (vacuous) or chain >= (C/4)(sum H)^2.
inline bool lemma2_check(const LemmaSample& x, double Hbar) {
  x.validate();
  if (!(Hbar > 0.0)) throw std::invalid_argument("lemma2: Hbar must be positive");
  if (!lemma2_hypothesis(x, Hbar)) return true;
  const double t = total(x);
  return chain_energy(x) >= 0.25 * lemma_constant(x.r) * t * t;
}

// ---------------------------------------------------------------------------
// epsilon-delta search

struct DeltaSearch {
  int r = 2;
  double epsilon = 0.5;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;
  std::vector<double> argmin;  // H_1..H_{r-1} at e^phi = 1
};

namespace detail {

// Ratio chain / total^2 at e^phi = 1, with the smallest log H_j clamped to
// log(eps) so every point satisfies the constraint.
inline double delta_objective(int r, double log_eps, std::vector<double>& x) {
  auto k = std::min_element(x.begin(), x.end());
  if (*k > log_eps) *k = log_eps;
  LemmaSample s{r, {}, 0.0, {}};
  s.H.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s.H[i] = std::exp(x[i]);
  const double t = total(s);
  return chain_energy(s) / (t * t);
}

// Compass search with step halving.
template <class F>
double compass_minimise(std::vector<double>& x, F&& f, double step = 1.0, double min_step = 1e-10) {
  double best = f(x);
  while (step > min_step) {
    bool moved = false;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (double dir : {1.0, -1.0}) {
        std::vector<double> y = x;
        y[i] += dir * step;
        const double v = f(y);
        if (v < best) {
          best = v;
          x = std::move(y);
          moved = true;
        }
      }
    if (!moved) step *= 0.5;
  }
  return best;
}

}  // namespace detail

/// Empirical infimum of chain / (sum H)^2 over tuples with some H_j <= eps e^phi
/// (j <= r-1). Scale invariance lets us fix e^phi = 1. Random search over log H
/// followed by compass refinement of the best candidates. An estimate only.
inline DeltaSearch lemma3_delta_search(int r, double epsilon, std::size_t budget, std::uint64_t seed = 1) {
  if (r < 2) throw std::invalid_argument("lemma3: r must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("lemma3: epsilon must lie in (0, 1)");
  if (budget == 0) throw std::invalid_argument("lemma3: budget must be positive");
  const double le = std::log(epsilon);
  const std::size_t dim = static_cast<std::size_t>(r - 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> wide(-8.0, 8.0);
  std::normal_distribution<double> near(0.0, 1.0);

  constexpr std::size_t kKeep = 8;
  std::vector<std::pair<double, std::vector<double>>> best;
  std::vector<double> x(dim);
  for (std::size_t n = 0; n < budget; ++n) {
    for (double& v : x) v = (n % 2 == 0) ? near(rng) : wide(rng);
    const double f = detail::delta_objective(r, le, x);
    if (best.size() < kKeep || f < best.back().first) {
      best.emplace_back(f, x);
      std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (best.size() > kKeep) best.pop_back();
    }
  }
  DeltaSearch out{r, epsilon, budget, seed, std::numeric_limits<double>::infinity(), {}};
  for (auto& [f0, y] : best) {
    const double f = detail::compass_minimise(y, [&](std::vector<double>& z) { return detail::delta_objective(r, le, z); });
    if (f < out.delta) {
      out.delta = f;
      out.argmin.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) out.argmin[i] = std::exp(y[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// s-perturbation probe

struct PerturbationProbe {
  double Q = 0.0;
  double deviation = 0.0;
};

/// Q = sum_{j=1}^r s_j^{-1} (s_{j+1} - s_j)^2 H_j (s_{r+1} = s_1) and
/// deviation = sum |s_j - 1|. Requires H_j <= B (j < r) and sum s <= Cbound.
inline PerturbationProbe lemma4_probe(const LemmaSample& x, double B, double Cbound) {
  x.validate();
  if (x.s.empty()) throw std::invalid_argument("lemma4: sample has no s vector");
  for (double h : x.H)
    if (h > B) throw std::invalid_argument("lemma4: H_j exceeds B");
  double ssum = 0.0;
  for (double v : x.s) ssum += v;
  if (ssum > Cbound) throw std::invalid_argument("lemma4: sum of s exceeds Cbound");
  const auto c = x.cyclic();
  const std::size_t r = static_cast<std::size_t>(x.r);
  PerturbationProbe p;
  for (std::size_t j = 0; j < r; ++j) {
    const double d = x.s[(j + 1) % r] - x.s[j];
    p.Q += d * d * c[j + 1] / x.s[j];
    p.deviation += std::abs(x.s[j] - 1.0);
  }
  return p;
}

/// Random s = exp(t v), sum v = 0, t log-uniform in [1e-4, 1].
struct ModulusFit {
  int r = 2;
  double B = 10.0;
  double Cbound = 10.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double eps1 = 1e-3;
  double C1_hat = 0.0;
  double linear_modulus = 0.0;  // polished small-amplitude supremum
  double sampled_max = 0.0;     // largest sampled deviation / sqrt(Q) with Q <= eps1^2
  double sqrt_exponent = 0.0;  // median local slope of log deviation vs log Q
};

// ---------------------------------------------------------------------------
// randomized suite

struct LemmaSuiteOptions {
  std::vector<int> ranks{2, 3, 4, 5, 6};
  std::size_t samples = 100000;
  std::uint64_t seed = 7;
  std::size_t zero_samples = 10000;
  std::vector<double> epsilons{0.25, 0.5, 0.75};
  std::size_t delta_budget = 20000;
  double B = 10.0;
  double Cbound = 10.0;
  std::size_t fit_samples = 20000;
  double infinity_probability = 0.2;
};

namespace detail {

inline constexpr std::size_t kBlock = 4096;

// Every block gets its own generator so results do not depend on scheduling.
inline std::mt19937_64 block_rng(std::uint64_t seed, int tag, int r, std::size_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(r),
                    static_cast<std::uint32_t>(block)};
  return std::mt19937_64(seq);
}

inline LemmaSample random_sample(int r, std::mt19937_64& rng, double log_lo, double log_hi, double p_inf) {
  std::uniform_real_distribution<double> lh(log_lo, log_hi);
  std::uniform_real_distribution<double> ph(-5.0, 5.0);
  std::bernoulli_distribution atom(p_inf);
  LemmaSample x{r, std::vector<double>(static_cast<std::size_t>(r - 1)), 0.0, {}};
  for (double& h : x.H) h = std::exp(lh(rng));
  x.phi = atom(rng) ? kMinusInfinity : ph(rng);
  return x;
}

// s = exp(t v) with v centred, so prod s = 1 up to rounding.
inline std::vector<double> random_s(int r, double t, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(r));
  double mean = 0.0;
  for (double& a : v) mean += (a = nd(rng));
  mean /= r;
  for (double& a : v) a = std::exp(t * (a - mean));
  return v;
}

inline std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

}  // namespace detail

/// Small-amplitude limit of deviation / sqrt(Q): with s = exp(t v), sum v = 0
/// and t -> 0 the ratio tends to sum|v| / sqrt(v^T L v), L the cycle Laplacian
/// with conductance H_j on the edge j -> j+1. The supremum over v is the max
/// over sign patterns sigma of sqrt(sigma~^T L^+ sigma~), sigma~ the centred
/// pattern. L^+ b is evaluated as a network flow: tree currents along the
/// path plus the circulation that makes the potential drops around the cycle
/// vanish. Working with resistances 1/H_j keeps huge H_r harmless.
inline double lemma4_linear_modulus(const LemmaSample& x) {
  x.validate();
  const std::size_t r = static_cast<std::size_t>(x.r);
  const auto c = x.cyclic();
  std::vector<double> res(r);  // edge j (0-based) joins j and j+1; edge r-1 closes the cycle
  for (std::size_t j = 0; j < r; ++j) res[j] = c[j + 1] > 0.0 ? 1.0 / c[j + 1] : std::numeric_limits<double>::infinity();
  double best = 0.0;
  std::vector<double> b(r), cur(r);
  for (unsigned mask = 0; mask < (1u << (r - 1)); ++mask) {  // sigma and -sigma agree
    double mean = 0.0;
    for (std::size_t j = 0; j < r; ++j) mean += (b[j] = (mask >> j) & 1u ? -1.0 : 1.0);
    mean /= static_cast<double>(r);
    double acc = 0.0, drop = 0.0, total_res = 0.0;
    for (std::size_t j = 0; j + 1 < r; ++j) {
      acc += b[j] - mean;
      cur[j] = acc;
      drop += acc * res[j];
      total_res += res[j];
    }
    cur[r - 1] = 0.0;
    double circ = 0.0;
    if (std::isfinite(res[r - 1])) circ = -drop / (total_res + res[r - 1]);
    double energy = 0.0;
    for (std::size_t j = 0; j < r; ++j)
      if (std::isfinite(res[j])) energy += (cur[j] + circ) * (cur[j] + circ) * res[j];
    best = std::max(best, energy);
  }
  return std::sqrt(best);
}

/// Empirical modulus deviation <= C1_hat sqrt(Q) for Q <= eps1^2 and H_j in
/// [1e-3, B]. C1_hat is the larger of the small-amplitude modulus over random
/// (H, phi), polished over H by compass search, and the largest sampled ratio
/// with Q <= eps1^2.
inline ModulusFit lemma4_fit(int r, double B, double Cbound, std::size_t samples, std::uint64_t seed,
                             double eps1 = 1e-3) {
  if (!(B > 1e-3)) throw std::invalid_argument("lemma4 fit: B must exceed the sampling floor 1e-3");
  ModulusFit fit{r, B, Cbound, samples, seed, eps1};
  struct Worst {
    double modulus = 0.0;
    LemmaSample x;
  };
  struct Partial {
    Worst worst;
    double ratio = 0.0;
    std::vector<double> slopes;
  };
  const std::size_t nb = detail::block_count(samples);
  std::vector<Partial> part(nb);
  parallel_for(nb, [&](std::size_t b) {
    auto rng = detail::block_rng(seed, 4, r, b);
    std::uniform_real_distribution<double> lt(std::log(1e-4), 0.0);
    Partial& P = part[b];
    const std::size_t end = std::min(samples, (b + 1) * detail::kBlock);
    for (std::size_t n = b * detail::kBlock; n < end; ++n) {
      LemmaSample x = detail::random_sample(r, rng, std::log(1e-3), std::log(B), 0.2);
      for (double& h : x.H) h = std::min(h, B);
      const double t = std::exp(lt(rng));
      x.s = detail::random_s(r, t, rng);
      double ssum = 0.0;
      for (double v : x.s) ssum += v;
      if (ssum > Cbound) continue;
      const double m = lemma4_linear_modulus(x);
      if (m > P.worst.modulus) P.worst = {m, x};
      const PerturbationProbe p = lemma4_probe(x, B, Cbound);
      if (p.Q > 0.0 && p.Q <= eps1 * eps1) P.ratio = std::max(P.ratio, p.deviation / std::sqrt(p.Q));
      // same direction, a tenth of the amplitude
      LemmaSample y = x;
      for (double& v : y.s) v = std::exp(0.1 * std::log(v));
      const PerturbationProbe q = lemma4_probe(y, B, Cbound);
      if (p.Q > 0.0 && q.Q > 0.0 && q.Q < p.Q && q.deviation > 0.0)
        P.slopes.push_back(std::log(p.deviation / q.deviation) / std::log(p.Q / q.Q));
    }
  });
  std::vector<Worst> top;
  for (const auto& P : part)
    if (P.worst.modulus > 0.0) top.push_back(P.worst);
  std::stable_sort(top.begin(), top.end(), [](const Worst& a, const Worst& b) { return a.modulus > b.modulus; });
  top.resize(std::min<std::size_t>(top.size(), 8));
  std::vector<double> polished(top.size(), 0.0);
  parallel_for(top.size(), [&](std::size_t k) {
    LemmaSample x = top[k].x;
    std::vector<double> z;
    for (double h : x.H) z.push_back(std::log(h));
    auto modulus = [&](std::vector<double>& y) {
      for (std::size_t i = 0; i < y.size(); ++i) x.H[i] = std::min(B, std::exp(std::clamp(y[i], std::log(1e-3), std::log(B))));
      return -lemma4_linear_modulus(x);
    };
    polished[k] = -detail::compass_minimise(z, modulus, 0.5, 1e-8);
  });
  for (std::size_t k = 0; k < top.size(); ++k)
    fit.linear_modulus = std::max({fit.linear_modulus, top[k].modulus, polished[k]});
  std::vector<double> all;
  for (const auto& P : part) {
    fit.sampled_max = std::max(fit.sampled_max, P.ratio);
    all.insert(all.end(), P.slopes.begin(), P.slopes.end());
  }
  fit.C1_hat = std::max(fit.linear_modulus, fit.sampled_max);
  if (!all.empty()) {
    std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
    fit.sqrt_exponent = all[all.size() / 2];
  }
  return fit;
}

struct LemmaRankSummary {
  int r = 2;
  std::size_t samples = 0;
  std::size_t finite = 0;
  std::size_t infinite = 0;
  double min_margin_finite = std::numeric_limits<double>::infinity();
  double min_margin_infinite = std::numeric_limits<double>::infinity();
  double min_normalized_ratio = std::numeric_limits<double>::infinity();  // chain / (sum H - r e^phi)^2
  std::size_t lemma2_conforming = 0;
  std::size_t lemma2_violations = 0;
  std::vector<DeltaSearch> deltas;
  std::size_t zero_samples = 0;
  std::size_t zero_failures = 0;
  double zero_max_deviation = 0.0;
  ModulusFit fit;
  bool passed = false;
};

struct LemmaSuiteReport {
  LemmaSuiteOptions options;
  std::vector<LemmaRankSummary> ranks;
  bool passed = false;
};

inline constexpr double kMarginTolerance = 1e-12;
inline constexpr double kZeroTolerance = 2e-12;

inline LemmaRankSummary run_lemma_rank(int r, const LemmaSuiteOptions& o) {
  LemmaRankSummary out;
  out.r = r;
  out.samples = o.samples;

  struct Partial {
    std::size_t finite = 0, infinite = 0, conforming = 0, violations = 0;
    double mf = std::numeric_limits<double>::infinity(), mi = mf, ratio = mf;
  };
  const std::size_t nb = detail::block_count(o.samples);
  std::vector<Partial> part(nb);
  parallel_for(nb, [&](std::size_t b) {
    auto rng = detail::block_rng(o.seed, 1, r, b);
    Partial& p = part[b];
    const std::size_t end = std::min(o.samples, (b + 1) * detail::kBlock);
    for (std::size_t n = b * detail::kBlock; n < end; ++n) {
      const LemmaSample x = detail::random_sample(r, rng, std::log(1e-3), std::log(1e3), o.infinity_probability);
      const double m = lemma1_margin(x);
      if (x.phi == kMinusInfinity) {
        ++p.infinite;
        p.mi = std::min(p.mi, m);
      } else {
        ++p.finite;
        p.mf = std::min(p.mf, m);
        const double d = total(x) - r * x.ephi();
        if (d != 0.0) p.ratio = std::min(p.ratio, chain_energy(x) / (d * d));
      }
      // weakest admissible bound: Hbar = sum H / (2r)
      const double Hbar = total(x) / (2.0 * r);
      if (Hbar > 0.0 && lemma2_hypothesis(x, Hbar)) {
        ++p.conforming;
        if (!lemma2_check(x, Hbar)) ++p.violations;
      }
    }
  });
  for (const Partial& p : part) {
    out.finite += p.finite;
    out.infinite += p.infinite;
    out.lemma2_conforming += p.conforming;
    out.lemma2_violations += p.violations;
    out.min_margin_finite = std::min(out.min_margin_finite, p.mf);
    out.min_margin_infinite = std::min(out.min_margin_infinite, p.mi);
    out.min_normalized_ratio = std::min(out.min_normalized_ratio, p.ratio);
  }

  out.deltas.resize(o.epsilons.size());
  parallel_for(o.epsilons.size(), [&](std::size_t k) {
    out.deltas[k] = lemma3_delta_search(r, o.epsilons[k], o.delta_budget, o.seed + 101 * static_cast<std::uint64_t>(r));
  });

  // Q = 0 forces s_1 = ... = s_r; normalising a constant vector by its
  // geometric mean must give s = 1.
  out.zero_samples = o.zero_samples;
  const std::size_t nz = detail::block_count(o.zero_samples);
  std::vector<std::size_t> zf(nz, 0);
  std::vector<double> zd(nz, 0.0);
  parallel_for(nz, [&](std::size_t b) {
    auto rng = detail::block_rng(o.seed, 3, r, b);
    std::uniform_real_distribution<double> lc(-3.0, 3.0);
    const std::size_t end = std::min(o.zero_samples, (b + 1) * detail::kBlock);
    for (std::size_t n = b * detail::kBlock; n < end; ++n) {
      LemmaSample x = detail::random_sample(r, rng, std::log(1e-3), std::log(o.B), o.infinity_probability);
      const double c = std::exp(lc(rng));
      x.s.assign(static_cast<std::size_t>(r), c);
      double lg = 0.0;
      for (double v : x.s) lg += std::log(v);
      const double g = std::exp(lg / r);
      for (double& v : x.s) v /= g;
      const PerturbationProbe p = lemma4_probe(x, o.B, o.Cbound);
      zd[b] = std::max(zd[b], p.deviation);
      if (p.Q == 0.0 && p.deviation > kZeroTolerance) ++zf[b];
      if (p.Q != 0.0) ++zf[b];
    }
  });
  for (std::size_t b = 0; b < nz; ++b) {
    out.zero_failures += zf[b];
    out.zero_max_deviation = std::max(out.zero_max_deviation, zd[b]);
  }

  out.fit = lemma4_fit(r, o.B, o.Cbound, o.fit_samples, o.seed + 17 * static_cast<std::uint64_t>(r));

  bool deltas_ok = true;
  for (const auto& d : out.deltas) deltas_ok = deltas_ok && d.delta > 0.0;
  out.passed = out.min_margin_finite >= -kMarginTolerance &&
               (out.infinite == 0 || out.min_margin_infinite >= -kMarginTolerance) && out.lemma2_violations == 0 &&
               deltas_ok && out.zero_failures == 0;
  return out;
}

inline LemmaSuiteReport run_lemma_suite(const LemmaSuiteOptions& o) {
  LemmaSuiteReport rep;
  rep.options = o;
  rep.passed = true;
  for (int r : o.ranks) {
    if (r < 2) throw std::invalid_argument("lemma suite: ranks must be >= 2");
    rep.ranks.push_back(run_lemma_rank(r, o));
    rep.passed = rep.passed && rep.ranks.back().passed;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json to_json(const DeltaSearch& d) {
  return {{"r", d.r}, {"epsilon", d.epsilon}, {"budget", d.budget}, {"seed", d.seed},
          {"delta_hat", d.delta}, {"argmin_H", d.argmin}};
}

inline nlohmann::json to_json(const ModulusFit& f) {
  return {{"r", f.r}, {"B", f.B}, {"Cbound", f.Cbound}, {"samples", f.samples}, {"seed", f.seed},
          {"eps1", f.eps1}, {"C1_hat", f.C1_hat}, {"linear_modulus", f.linear_modulus}, {"sampled_max_ratio", f.sampled_max},
          {"sqrt_exponent", f.sqrt_exponent}};
}

inline nlohmann::json to_json(const LemmaRankSummary& s) {
  nlohmann::json d = nlohmann::json::array();
  for (const auto& x : s.deltas) d.push_back(to_json(x));
  return {{"r", s.r},
          {"constant_C", lemma_constant(s.r)},
          {"samples", s.samples},
          {"finite_phi", s.finite},
          {"infinite_phi", s.infinite},
          {"lemma1_min_margin_finite", finite_or_null(s.min_margin_finite)},
          {"lemma1_min_margin_infinite", finite_or_null(s.min_margin_infinite)},
          {"lemma1_min_normalized_ratio", finite_or_null(s.min_normalized_ratio)},
          {"lemma2_conforming", s.lemma2_conforming},
          {"lemma2_violations", s.lemma2_violations},
          {"lemma3", d},
          {"lemma4_zero_samples", s.zero_samples},
          {"lemma4_zero_failures", s.zero_failures},
          {"lemma4_zero_max_deviation", s.zero_max_deviation},
          {"lemma4_fit", to_json(s.fit)},
          {"passed", s.passed}};
}

inline nlohmann::json to_json(const LemmaSuiteReport& r) {
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& s : r.ranks) ranks.push_back(to_json(s));
  return {{"seed", r.options.seed},
          {"samples_per_rank", r.options.samples},
          {"phi_minus_infinity_probability", r.options.infinity_probability},
          {"H_range", {1e-3, 1e3}},
          {"phi_range", {-5.0, 5.0}},
          {"ranks", ranks},
          {"passed", r.passed}};
}

}  // namespace toda

#endif
