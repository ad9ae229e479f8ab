// toda: command-line front end. Exit codes: 0 ok, 1 solver non-convergence
// (or any other run failure), 2 config error, 3 verification failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "toda/analysis.hpp"
#include "toda/config.hpp"
#include "toda/drivers.hpp"
#include "toda/field_io.hpp"
#include "toda/lemma_lab.hpp"
#include "toda/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace toda;

namespace {

constexpr int kOk = 0, kNonConvergence = 1, kConfigError = 2, kVerifyFailed = 3;

struct Flags {
  std::string config;
  std::optional<std::string> out;
  bool raster = false;
};

// Wall-clock entries are dropped so that identical configs give identical files.
void strip_timing(json& j) {
  if (j.is_object()) {
    j.erase("wall_time");
    for (auto& [k, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

void write_json(const fs::path& p, json j) {
  strip_timing(j);
  std::ofstream os(p);
  os << j.dump(2) << '\n';
  if (!os) throw FormatError("cannot write " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
  if (!os) throw FormatError("cannot write " + p.string());
}

int fail(const std::optional<fs::path>& out, int code, const std::string& kind, const std::string& what,
         const std::string& key = {}) {
  json e = {{"exit_code", code}, {"error", kind}, {"message", what}};
  if (!key.empty()) e["key"] = key;
  std::cerr << e.dump() << '\n';
  if (out) {
    std::error_code ec;
    fs::create_directories(*out, ec);
    if (!ec) write_json(*out / "error.json", e);
  }
  return code;
}

ReferenceMetric reference(const RunConfig& c) {
  ReferenceMetric ref;
  ref.kind = c.reference == "H_1" ? Reference::H1 : Reference::OmegaX;
  return ref;
}

void write_fields(const fs::path& dir, const TodaState& s, bool raster, std::size_t pixels) {
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    const std::string name = "u_" + std::to_string(j + 1);
    std::ofstream csv(dir / (name + ".csv"));
    write_csv(csv, s.u[j]);
    if (raster) {
      std::ofstream lin(dir / (name + ".ppm"), std::ios::binary);
      write_ppm(lin, s.u[j], pixels, ColorScale::Linear);
      ScalarField vol = s.u[j];
      for (double& v : vol.values) v = std::exp(v);
      std::ofstream lg(dir / ("vol_" + std::to_string(j + 1) + "_log.ppm"), std::ios::binary);
      write_ppm(lg, vol, pixels, ColorScale::Log);
    }
  }
  std::ofstream csv(dir / "E.csv");
  write_csv(csv, s.E);
  if (raster) {
    std::ofstream lg(dir / "E_log.ppm", std::ios::binary);
    write_ppm(lg, s.E, pixels, ColorScale::Log);
  }
}

json analyse(const RunConfig& c, const WeightModel& w, const TodaState& s) {
  json a;
  const SupBound M = m_phi(w, s.grid, background(s.grid));
  a["M_phi"] = M.infinite ? json() : json(M.value);
  if (!M.infinite && M.value > 0.0) a["volume_bounds"] = to_json(check_volume_bounds(s, M.value));
  a["domination"] = to_json(check_khn(s));
  a["reality_defect"] = reality_defect(s);
  a["thermo"] = json::array();
  for (double beta : c.betas) a["thermo"].push_back(to_json(thermo(s, beta, reference(c))));
  return a;
}

std::vector<RingValues> boundary_for(const RunConfig& c, const WeightModel& w, const PolarGrid& g) {
  if (c.boundary == "lm") return boundary_lm(g, c.r);
  try {
    const BackgroundGeometry bg = background(g);
    return w.is_zero() ? exact_hyperbolic(c.r, g, bg).boundary : exact_flat(w, g, bg).boundary;
  } catch (const std::exception& e) {
    throw ConfigError("boundary", std::string("exact data unavailable: ") + e.what());
  }
}

int run_solve(const RunConfig& c, const WeightModel& w, const fs::path& out) {
  const PolarGrid g = c.grid();
  json report = {{"command", "solve"}};
  try {
    const SolveResult res = solve_dirichlet(w, g, boundary_for(c, w, g), c.solve);
    report["status"] = "converged";
    report["solve"] = to_json(res.report);
    report["analysis"] = analyse(c, w, res.state);
    save_state(out / "state", res.state, {{"weight", c.weight}});
    write_fields(out, res.state, c.raster, c.pixels);
    if (c.raster) {
      const ThermoReport t = thermo(res.state, c.betas.front(), reference(c));
      std::ofstream S(out / "S.ppm", std::ios::binary), F(out / "F.ppm", std::ios::binary);
      write_ppm(S, t.S, c.pixels);
      write_ppm(F, t.F, c.pixels);
    }
    write_json(out / "report.json", report);
    return kOk;
  } catch (const NonConvergence& e) {
    report["status"] = "non-convergence";
    report["solve"] = to_json(e.partial().report);
    write_json(out / "report.json", report);
    return fail(out, kNonConvergence, "non-convergence", e.what());
  }
}

int run_exhaust(const RunConfig& c, const WeightModel& w, const fs::path& out) {
  const ExhaustionRun run = run_exhaustion(w, c.exhaustion());
  json report = {{"command", "exhaust"}, {"run", to_json(run)}};
  if (run.states.size() >= 2) {
    const StageLimit lim = richardson_limit(run, std::min(c.extrapolation_points, run.states.size()));
    report["extrapolation_points"] = lim.points;
    if (w.is_zero()) {
      const TodaState ex = exact_hyperbolic(c.r, lim.u[0].grid, background(lim.u[0].grid));
      double err = 0.0;
      for (std::size_t j = 0; j < lim.u.size(); ++j)
        for (std::size_t n = 0; n < lim.u[j].size(); ++n)
          err = std::max(err, std::abs(std::expm1(lim.u[j][n] - ex.u[j][n])));
      report["limit_density_error"] = err;
    }
  }
  std::ostringstream csv;
  csv << "stage,radius,discrepancy\n" << std::setprecision(17);
  for (std::size_t k = 0; k < run.states.size(); ++k) {
    save_state(out / ("stage_" + std::to_string(run.stages[k])), run.states[k], {{"weight", c.weight}});
    csv << run.stages[k] << ',' << run.radii[k] << ',';
    if (k > 0) csv << run.discrepancy[k - 1];
    csv << '\n';
  }
  write_text(out / "discrepancy.csv", csv.str());
  write_json(out / "report.json", report);
  if (run.truncated) return fail(out, kNonConvergence, "non-convergence", run.failure);
  return kOk;
}

int run_mollify(const RunConfig& c, const WeightModel& w, const fs::path& out) {
  const MollificationRun run =
      run_mollification(w, MollifierSchedule(c.schedule), c.grid(), c.solve, c.inner_radius, c.slack);
  std::ostringstream csv;
  csv << "delta,distance_to_direct\n" << std::setprecision(17);
  for (std::size_t k = 0; k < run.states.size(); ++k) {
    save_state(out / ("delta_" + std::to_string(k)), run.states[k], {{"weight", c.weight}, {"delta", run.radii[k]}});
    csv << run.radii[k] << ',' << (k < run.distance_to_direct.size() ? run.distance_to_direct[k] : 0.0) << '\n';
  }
  write_text(out / "distances.csv", csv.str());
  write_json(out / "report.json", {{"command", "mollify"}, {"run", to_json(run)}});
  return kOk;
}

int run_probe(const RunConfig& c, const WeightModel& w, const fs::path& out) {
  const UniquenessProbe p = run_uniqueness_probe(w, c.exhaustion(), c.factors[0], c.factors[1]);
  std::ostringstream csv;
  csv << "stage,difference\n" << std::setprecision(17);
  for (std::size_t k = 0; k < p.difference.size(); ++k) csv << p.first.stages[k] << ',' << p.difference[k] << '\n';
  write_text(out / "differences.csv", csv.str());
  write_json(out / "report.json", {{"command", "probe-uniqueness"}, {"probe", to_json(p)}});
  return kOk;
}

// Reproduction of closed-form solutions from their own Dirichlet data.
int run_verify(const RunConfig& c, const fs::path& out) {
  json cases = json::array();
  bool ok = true;
  const PolarGrid g = c.grid();
  const BackgroundGeometry bg = background(g);
  auto density_error = [](const TodaState& a, const TodaState& b) {
    double e = 0.0;
    for (std::size_t j = 0; j < a.u.size(); ++j)
      for (std::size_t n = 0; n < a.u[j].size(); ++n) e = std::max(e, std::abs(std::expm1(a.u[j][n] - b.u[j][n])));
    return e;
  };
  if (c.suite == "exact" || c.suite == "all") {
    for (int r : {2, 3, 4}) {
      const TodaState ex = exact_hyperbolic(r, g, bg);
      json entry = {{"case", "hyperbolic"}, {"r", r}, {"tolerance", 5e-3}};
      try {
        const SolveResult res = solve_dirichlet(zero_weight(r), g, ex.boundary, c.solve);
        const double err = density_error(res.state, ex);
        entry["density_error"] = err;
        entry["iterations"] = res.report.iterations;
        entry["passed"] = err <= 5e-3;
      } catch (const std::exception& e) {
        entry["error"] = e.what();
        entry["passed"] = false;
      }
      ok = ok && entry["passed"].get<bool>();
      cases.push_back(entry);
    }
  }
  if (c.suite == "flat" || c.suite == "all") {
    for (int r : {2, 3}) {
      const WeightModel w = differential_weight(r, {{1.0, 0.0}});
      const TodaState ex = exact_flat(w, g, bg);
      json entry = {{"case", "flat"}, {"r", r}, {"max_iterations", 3}, {"residual_tolerance", 1e-10}};
      try {
        const SolveResult res = solve_dirichlet(w, g, ex.boundary, c.solve);
        entry["iterations"] = res.report.iterations;
        entry["raw_residual"] = res.report.raw_residual;
        entry["density_error"] = density_error(res.state, ex);
        entry["passed"] = res.report.iterations <= 3 && res.report.raw_residual <= 1e-10;
      } catch (const std::exception& e) {
        entry["error"] = e.what();
        entry["passed"] = false;
      }
      ok = ok && entry["passed"].get<bool>();
      cases.push_back(entry);
    }
  }
  write_json(out / "report.json", {{"command", "verify"}, {"suite", c.suite}, {"cases", cases}, {"passed", ok}});
  return ok ? kOk : kVerifyFailed;
}

int run_lemmas(const RunConfig& c, const fs::path& out) {
  const LemmaSuiteReport rep = run_lemma_suite(c.lemmas);
  const json j = to_json(rep);
  write_json(out / "report.json", j);
  std::cout << j.dump(2) << '\n';
  return rep.passed ? kOk : kVerifyFailed;
}

int run_export(const RunConfig& c, const fs::path& out) {
  if (c.state.empty()) throw ConfigError("export.state", "no state directory given");
  const TodaState s = [&] {
    try {
      return load_state(c.state);
    } catch (const std::exception& e) {
      throw ConfigError("export.state", e.what());
    }
  }();
  write_fields(out, s, true, c.pixels);
  write_json(out / "report.json", {{"command", "export"},
                                   {"state", c.state},
                                   {"r", s.r},
                                   {"grid", {{"n_r", s.grid.n_r}, {"n_theta", s.grid.n_theta}, {"outer_radius", s.grid.outer_radius}}}});
  return kOk;
}

int execute(const RunConfig& c, const fs::path& base) {
  const fs::path out = c.output;
  fs::create_directories(out);
  write_json(out / "manifest.json", {{"config", to_json(c)}});
  switch (c.command) {
    case Command::Verify: return run_verify(c, out);
    case Command::Lemmas: return run_lemmas(c, out);
    case Command::Export: return run_export(c, out);
    default: break;
  }
  const WeightModel w = make_weight(c, base);
  switch (c.command) {
    case Command::Solve: return run_solve(c, w, out);
    case Command::Exhaust: return run_exhaust(c, w, out);
    case Command::Mollify: return run_mollify(c, w, out);
    case Command::ProbeUniqueness: return run_probe(c, w, out);
    default: return kOk;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyclic Toda solver, exhaustion drivers and verification suites"};
  app.require_subcommand(1);
  Flags f;
  std::string out_flag, suite_flag, state_flag;
  std::uint64_t seed_flag = 0;
  std::size_t samples_flag = 0;
  for (const auto& [cmd, name] : command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run " + name);
    sub->add_option("-c,--config", f.config, "JSON run config");
    sub->add_option("-o,--out", out_flag, "output directory (overrides \"output\")");
    sub->add_option("--seed", seed_flag, "random seed (overrides \"seed\")");
    if (cmd == Command::Lemmas) sub->add_option("--samples", samples_flag, "samples per rank");
    if (cmd == Command::Verify) sub->add_option("--suite", suite_flag, "exact | flat | all");
    if (cmd == Command::Export) sub->add_option("--state", state_flag, "state directory to export");
    if (cmd == Command::Solve) sub->add_flag("--raster", f.raster, "write PPM heatmaps");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  auto given = [sub](const std::string& name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (given("--out")) f.out = out_flag;
  std::optional<fs::path> out_hint = f.out ? std::optional<fs::path>(*f.out) : std::nullopt;

  RunConfig c;
  fs::path base;
  try {
    json j = json::object();
    if (!f.config.empty()) {
      std::ifstream is(f.config);
      if (!is) throw ConfigError("", "cannot read config file " + f.config);
      std::stringstream ss;
      ss << is.rdbuf();
      try {
        j = json::parse(ss.str());
      } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
      base = fs::path(f.config).parent_path();
    }
    if (j.contains("command") && j["command"] != command)
      throw ConfigError("command", "config is for \"" + j["command"].dump() + "\", not \"" + command + "\"");
    j["command"] = command;
    if (f.out) j["output"] = *f.out;
    if (given("--seed")) j["seed"] = seed_flag;
    if (given("--samples")) j["lemmas"]["samples"] = samples_flag;
    if (given("--suite")) j["verify"]["suite"] = suite_flag;
    if (given("--state")) j["export"]["state"] = state_flag;
    if (f.raster) j["raster"]["enabled"] = true;
    c = parse_config(j.dump());
    out_hint = fs::path(c.output);
  } catch (const ConfigError& e) {
    return fail(out_hint, kConfigError, "config", e.what(), e.path());
  }

  try {
    return execute(c, base);
  } catch (const ConfigError& e) {
    return fail(out_hint, kConfigError, "config", e.what(), e.path());
  } catch (const WeightError& e) {
    return fail(out_hint, kConfigError, "config", e.what(), "weight");
  } catch (const GridError& e) {
    return fail(out_hint, kConfigError, "config", e.what(), "lattice");
  } catch (const NonConvergence& e) {
    return fail(out_hint, kNonConvergence, "non-convergence", e.what());
  } catch (const LinearSolveFailure& e) {
    return fail(out_hint, kNonConvergence, "non-convergence", e.what());
  } catch (const std::exception& e) {
    return fail(out_hint, kNonConvergence, "runtime", e.what());
  }
}
