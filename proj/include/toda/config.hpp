#ifndef TODA_CONFIG_HPP
#define TODA_CONFIG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "toda/drivers.hpp"
#include "toda/field_io.hpp"
#include "toda/lemma_lab.hpp"
#include "toda/solver.hpp"
#include "toda/weights.hpp"

namespace toda {

/// Config problem; `path` names the offending key, e.g. "solver.max_newton".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Command { Solve, Exhaust, Mollify, ProbeUniqueness, Verify, Lemmas, Export };

inline const std::vector<std::pair<Command, std::string>>& command_names() {
  static const std::vector<std::pair<Command, std::string>> names{
      {Command::Solve, "solve"},     {Command::Exhaust, "exhaust"}, {Command::Mollify, "mollify"},
      {Command::ProbeUniqueness, "probe-uniqueness"}, {Command::Verify, "verify"}, {Command::Lemmas, "lemmas"},
      {Command::Export, "export"}};
  return names;
}

inline std::string to_string(Command c) {
  for (const auto& [k, n] : command_names())
    if (k == c) return n;
  return "?";
}

/// Resolved run configuration. Every field has a default except `command`.
struct RunConfig {
  Command command = Command::Solve;
  int r = 2;
  nlohmann::json weight = {{"kind", "zero"}};
  // lattice: solve/mollify use n_r rings on D_radius; exhaust uses the master
  // lattice dr = 1/rings_per_unit
  std::size_t n_r = 128;
  std::size_t n_theta = 64;
  double radius = 0.8;
  std::size_t rings_per_unit = 420;
  std::string boundary = "lm";  // lm | exact
  int last_stage = 7;
  double inner_radius = 0.5;
  double slack = 1e-9;
  std::size_t extrapolation_points = 4;
  std::vector<double> schedule{0.16, 0.08, 0.04, 0.02};
  std::vector<double> factors{1.0, 1.5};
  SolveOptions solve;
  std::vector<double> betas{1.0};
  std::string reference = "omega_X";  // omega_X | H_1
  bool raster = false;
  std::size_t pixels = 256;
  std::string suite = "exact";  // exact | flat | all
  LemmaSuiteOptions lemmas;
  std::string state;  // export input directory
  std::string output = "toda_out";
  std::uint64_t seed = 7;

  PolarGrid grid() const { return make_grid(n_r, n_theta, radius); }

  ExhaustionOptions exhaustion() const {
    ExhaustionOptions o;
    o.last_stage = last_stage;
    o.rings_per_unit = rings_per_unit;
    o.n_theta = n_theta;
    o.inner_radius = inner_radius;
    o.slack = slack;
    o.solve = solve;
    return o;
  }
};

namespace config_detail {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline void check_keys(const nlohmann::json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(join(path, it.key()), "unknown key");
}

template <class T>
T read(const nlohmann::json& obj, const std::string& path, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const nlohmann::json& v = obj.at(key);
  const std::string p = join(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(p, "expected a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
    if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError(p, "expected a non-negative integer");
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(p, "expected a number");
    return v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(p, "expected a string");
    return v.get<std::string>();
  } else {
    if (!v.is_array()) throw ConfigError(p, "expected an array");
    T out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string pi = p + "[" + std::to_string(i) + "]";
      using E = typename T::value_type;
      if constexpr (std::is_integral_v<E>) {
        if (!v[i].is_number_integer()) throw ConfigError(pi, "expected an integer");
      } else {
        if (!v[i].is_number()) throw ConfigError(pi, "expected a number");
      }
      out.push_back(v[i].get<E>());
    }
    return out;
  }
}

inline std::complex<double> complex_at(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(path, "expected [re, im]");
  return {v[0].get<double>(), v[1].get<double>()};
}

// Checks the weight grammar; returns the spec with "r" removed.
inline nlohmann::json check_weight(const nlohmann::json& w, int r) {
  const std::string path = "weight";
  if (!w.is_object()) throw ConfigError(path, "expected an object");
  const std::string kind = read<std::string>(w, path, "kind", "");
  nlohmann::json out = w;
  out.erase("r");
  if (w.contains("r") && read<int>(w, path, "r", r) != r) throw ConfigError("weight.r", "does not match the top-level r");
  if (kind == "differential") {
    check_keys(w, path, {"kind", "r", "coeffs"});
    if (!w.contains("coeffs") || !w["coeffs"].is_array() || w["coeffs"].empty())
      throw ConfigError("weight.coeffs", "expected a non-empty array of [re, im]");
    bool nonzero = false;
    for (std::size_t i = 0; i < w["coeffs"].size(); ++i)
      nonzero = nonzero || std::abs(complex_at(w["coeffs"][i], "weight.coeffs[" + std::to_string(i) + "]")) > 0.0;
    if (!nonzero) throw ConfigError("weight.coeffs", "polynomial is identically zero; use kind \"zero\"");
  } else if (kind == "atoms") {
    check_keys(w, path, {"kind", "r", "atoms", "smooth"});
    if (w.contains("atoms")) {
      if (!w["atoms"].is_array()) throw ConfigError("weight.atoms", "expected an array");
      for (std::size_t i = 0; i < w["atoms"].size(); ++i) {
        const auto& a = w["atoms"][i];
        if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number())
          throw ConfigError("weight.atoms[" + std::to_string(i) + "]", "expected [re, im, mass]");
      }
    }
    if (w.contains("smooth")) {
      if (!w["smooth"].is_array()) throw ConfigError("weight.smooth", "expected an array");
      for (std::size_t i = 0; i < w["smooth"].size(); ++i) {
        const auto& m = w["smooth"][i];
        if (!m.is_array() || m.size() != 3 || !m[0].is_number_integer() || !m[1].is_number_integer() ||
            !m[2].is_number())
          throw ConfigError("weight.smooth[" + std::to_string(i) + "]", "expected [px, py, coeff]");
      }
    }
  } else if (kind == "zero") {
    check_keys(w, path, {"kind", "r"});
  } else if (kind == "samples") {
    check_keys(w, path, {"kind", "r", "file"});
    if (read<std::string>(w, path, "file", "").empty()) throw ConfigError("weight.file", "missing sample file");
  } else {
    throw ConfigError("weight.kind", "expected differential | atoms | zero | samples");
  }
  return out;
}

}  // namespace config_detail

/// Parses and validates JSON config text. Unknown keys, wrong types and
/// inconsistent lattice/stage pairings are reported with the key path.
inline RunConfig parse_config(const std::string& text) {
  using namespace config_detail;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  check_keys(j, "", {"command", "r", "weight", "lattice", "boundary", "stages", "schedule", "uniqueness", "solver",
                     "thermo", "raster", "verify", "lemmas", "export", "output", "seed"});
  RunConfig c;
  const std::string cmd = read<std::string>(j, "", "command", "");
  bool found = false;
  for (const auto& [k, n] : command_names())
    if (n == cmd) {
      c.command = k;
      found = true;
    }
  if (!found) throw ConfigError("command", cmd.empty() ? "missing" : "unknown command \"" + cmd + "\"");

  c.r = read<int>(j, "", "r", c.r);
  if (c.r < 2) throw ConfigError("r", "must be at least 2");
  if (j.contains("weight")) c.weight = check_weight(j["weight"], c.r);

  if (j.contains("lattice")) {
    const auto& l = j["lattice"];
    check_keys(l, "lattice", {"n_r", "n_theta", "radius", "rings_per_unit"});
    c.n_r = read<std::size_t>(l, "lattice", "n_r", c.n_r);
    c.n_theta = read<std::size_t>(l, "lattice", "n_theta", c.n_theta);
    c.radius = read<double>(l, "lattice", "radius", c.radius);
    c.rings_per_unit = read<std::size_t>(l, "lattice", "rings_per_unit", c.rings_per_unit);
  }
  if (c.n_r < 2) throw ConfigError("lattice.n_r", "need at least 2 rings");
  if (c.n_theta < 4) throw ConfigError("lattice.n_theta", "need at least 4 angles");
  if (!(c.radius > 0.0 && c.radius < 1.0)) throw ConfigError("lattice.radius", "must lie in (0, 1)");
  if (c.rings_per_unit < 2) throw ConfigError("lattice.rings_per_unit", "need at least 2");

  c.boundary = read<std::string>(j, "", "boundary", c.boundary);
  if (c.boundary != "lm" && c.boundary != "exact") throw ConfigError("boundary", "expected \"lm\" or \"exact\"");

  if (j.contains("stages")) {
    const auto& s = j["stages"];
    check_keys(s, "stages", {"last", "inner_radius", "slack", "extrapolation_points"});
    c.last_stage = read<int>(s, "stages", "last", c.last_stage);
    c.inner_radius = read<double>(s, "stages", "inner_radius", c.inner_radius);
    c.slack = read<double>(s, "stages", "slack", c.slack);
    c.extrapolation_points = read<std::size_t>(s, "stages", "extrapolation_points", c.extrapolation_points);
  }
  if (c.slack < 0.0) throw ConfigError("stages.slack", "must be non-negative");
  if (c.extrapolation_points < 1) throw ConfigError("stages.extrapolation_points", "must be at least 1");
  if (c.command == Command::Exhaust || c.command == Command::ProbeUniqueness) {
    if (c.last_stage < 2) throw ConfigError("stages.last", "need at least stage 2");
    if (!(c.inner_radius > 0.0 && c.inner_radius <= 0.5)) throw ConfigError("stages.inner_radius", "must lie in (0, 0.5]");
    try {
      c.exhaustion().validate();
    } catch (const GridError& e) {
      throw ConfigError("stages.last", std::string("stage radius not on a lattice ring: ") + e.what());
    }
  }

  c.schedule = read<std::vector<double>>(j, "", "schedule", c.schedule);
  try {
    MollifierSchedule check(c.schedule);
  } catch (const WeightError& e) {
    throw ConfigError("schedule", e.what());
  }
  if (c.command == Command::Mollify && !(c.radius + c.schedule.front() < 1.0))
    throw ConfigError("schedule", "radius + largest mollifier radius must stay below 1");

  if (j.contains("uniqueness")) {
    check_keys(j["uniqueness"], "uniqueness", {"factors"});
    c.factors = read<std::vector<double>>(j["uniqueness"], "uniqueness", "factors", c.factors);
  }
  if (c.factors.size() != 2 || !(c.factors[0] > 0.0) || !(c.factors[1] > 0.0))
    throw ConfigError("uniqueness.factors", "expected two positive seed factors");

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    check_keys(s, "solver", {"scheme", "newton_tol", "max_newton", "step_tol", "linear_tol", "monotone_tol",
                             "max_monotone"});
    const std::string scheme = read<std::string>(s, "solver", "scheme", to_string(c.solve.scheme));
    if (scheme == "newton")
      c.solve.scheme = Scheme::Newton;
    else if (scheme == "monotone")
      c.solve.scheme = Scheme::Monotone;
    else
      throw ConfigError("solver.scheme", "expected \"newton\" or \"monotone\"");
    c.solve.newton_tol = read<double>(s, "solver", "newton_tol", c.solve.newton_tol);
    c.solve.max_newton = read<int>(s, "solver", "max_newton", c.solve.max_newton);
    c.solve.step_tol = read<double>(s, "solver", "step_tol", c.solve.step_tol);
    c.solve.linear_tol = read<double>(s, "solver", "linear_tol", c.solve.linear_tol);
    c.solve.monotone_tol = read<double>(s, "solver", "monotone_tol", c.solve.monotone_tol);
    c.solve.max_monotone = read<int>(s, "solver", "max_monotone", c.solve.max_monotone);
  }
  try {
    c.solve.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("solver", e.what());
  }

  if (j.contains("thermo")) {
    const auto& t = j["thermo"];
    check_keys(t, "thermo", {"betas", "reference"});
    c.betas = read<std::vector<double>>(t, "thermo", "betas", c.betas);
    c.reference = read<std::string>(t, "thermo", "reference", c.reference);
  }
  for (std::size_t i = 0; i < c.betas.size(); ++i)
    if (c.betas[i] == 0.0 || !std::isfinite(c.betas[i]))
      throw ConfigError("thermo.betas[" + std::to_string(i) + "]", "beta must be a non-zero real number");
  if (c.reference != "omega_X" && c.reference != "H_1") throw ConfigError("thermo.reference", "expected omega_X or H_1");

  if (j.contains("raster")) {
    check_keys(j["raster"], "raster", {"enabled", "pixels"});
    c.raster = read<bool>(j["raster"], "raster", "enabled", c.raster);
    c.pixels = read<std::size_t>(j["raster"], "raster", "pixels", c.pixels);
  }
  if (c.pixels < 8) throw ConfigError("raster.pixels", "need at least 8 pixels");

  if (j.contains("verify")) {
    check_keys(j["verify"], "verify", {"suite"});
    c.suite = read<std::string>(j["verify"], "verify", "suite", c.suite);
  }
  if (c.suite != "exact" && c.suite != "flat" && c.suite != "all")
    throw ConfigError("verify.suite", "expected exact | flat | all");

  c.seed = read<std::uint64_t>(j, "", "seed", c.seed);
  c.lemmas.seed = c.seed;
  if (j.contains("lemmas")) {
    const auto& l = j["lemmas"];
    const std::string p = "lemmas";
    check_keys(l, p, {"samples", "zero_samples", "delta_budget", "fit_samples", "ranks", "epsilons", "B", "Cbound"});
    c.lemmas.samples = read<std::size_t>(l, p, "samples", c.lemmas.samples);
    c.lemmas.zero_samples = read<std::size_t>(l, p, "zero_samples", c.lemmas.zero_samples);
    c.lemmas.delta_budget = read<std::size_t>(l, p, "delta_budget", c.lemmas.delta_budget);
    c.lemmas.fit_samples = read<std::size_t>(l, p, "fit_samples", c.lemmas.fit_samples);
    c.lemmas.ranks = read<std::vector<int>>(l, p, "ranks", c.lemmas.ranks);
    c.lemmas.epsilons = read<std::vector<double>>(l, p, "epsilons", c.lemmas.epsilons);
    c.lemmas.B = read<double>(l, p, "B", c.lemmas.B);
    c.lemmas.Cbound = read<double>(l, p, "Cbound", c.lemmas.Cbound);
  }
  for (int r : c.lemmas.ranks)
    if (r < 2) throw ConfigError("lemmas.ranks", "ranks must be at least 2");
  for (double e : c.lemmas.epsilons)
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("lemmas.epsilons", "epsilon must lie in (0, 1)");
  if (c.lemmas.delta_budget == 0) throw ConfigError("lemmas.delta_budget", "must be positive");
  if (!(c.lemmas.B > 1e-3)) throw ConfigError("lemmas.B", "must exceed 1e-3");

  if (j.contains("export")) {
    check_keys(j["export"], "export", {"state"});
    c.state = read<std::string>(j["export"], "export", "state", c.state);
  }
  c.output = read<std::string>(j, "", "output", c.output);
  if (c.output.empty()) throw ConfigError("output", "must not be empty");
  return c;
}

/// Echo of the resolved configuration (parse_config(to_json(c).dump()) == c).
inline nlohmann::json to_json(const RunConfig& c) {
  return {{"command", to_string(c.command)},
          {"r", c.r},
          {"weight", c.weight},
          {"lattice", {{"n_r", c.n_r}, {"n_theta", c.n_theta}, {"radius", c.radius}, {"rings_per_unit", c.rings_per_unit}}},
          {"boundary", c.boundary},
          {"stages",
           {{"last", c.last_stage},
            {"inner_radius", c.inner_radius},
            {"slack", c.slack},
            {"extrapolation_points", c.extrapolation_points}}},
          {"schedule", c.schedule},
          {"uniqueness", {{"factors", c.factors}}},
          {"solver",
           {{"scheme", to_string(c.solve.scheme)},
            {"newton_tol", c.solve.newton_tol},
            {"max_newton", c.solve.max_newton},
            {"step_tol", c.solve.step_tol},
            {"linear_tol", c.solve.linear_tol},
            {"monotone_tol", c.solve.monotone_tol},
            {"max_monotone", c.solve.max_monotone}}},
          {"thermo", {{"betas", c.betas}, {"reference", c.reference}}},
          {"raster", {{"enabled", c.raster}, {"pixels", c.pixels}}},
          {"verify", {{"suite", c.suite}}},
          {"lemmas",
           {{"samples", c.lemmas.samples},
            {"zero_samples", c.lemmas.zero_samples},
            {"delta_budget", c.lemmas.delta_budget},
            {"fit_samples", c.lemmas.fit_samples},
            {"ranks", c.lemmas.ranks},
            {"epsilons", c.lemmas.epsilons},
            {"B", c.lemmas.B},
            {"Cbound", c.lemmas.Cbound}}},
          {"export", {{"state", c.state}}},
          {"output", c.output},
          {"seed", c.seed}};
}

/// Builds the weight model; sample files are resolved relative to `base`.
inline WeightModel make_weight(const RunConfig& c, const std::filesystem::path& base = {}) {
  const nlohmann::json& w = c.weight;
  const std::string kind = w.at("kind").get<std::string>();
  if (kind == "zero") return zero_weight(c.r);
  if (kind == "differential") {
    std::vector<std::complex<double>> coeffs;
    for (const auto& v : w.at("coeffs")) coeffs.emplace_back(v[0].get<double>(), v[1].get<double>());
    return differential_weight(c.r, std::move(coeffs));
  }
  if (kind == "atoms") {
    std::vector<Atom> atoms;
    std::vector<Monomial> smooth;
    for (const auto& a : w.value("atoms", nlohmann::json::array()))
      atoms.push_back({{a[0].get<double>(), a[1].get<double>()}, a[2].get<double>()});
    for (const auto& m : w.value("smooth", nlohmann::json::array()))
      smooth.push_back({m[0].get<int>(), m[1].get<int>(), m[2].get<double>()});
    return atoms_weight(c.r, std::move(atoms), std::move(smooth));
  }
  std::filesystem::path file = w.at("file").get<std::string>();
  if (file.is_relative() && !base.empty()) file = base / file;
  try {
    return samples_weight(c.r, load_toda1(file).field);
  } catch (const FormatError& e) {
    throw ConfigError("weight.file", e.what());
  }
}

}  // namespace toda

#endif
