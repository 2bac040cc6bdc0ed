#pragma once

// Config-driven experiment runner behind the command-line tool.
//
// A run is described by one JSON object with a "mode" field; the runner
// computes the requested curve or ensemble, writes one CSV file plus a
// manifest JSON into the output directory, and returns the paths.  The
// manifest embeds the resolved config under "config", so a manifest file can
// itself be passed back as a config to reproduce the run byte-for-byte.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covdec/coherence.hpp"
#include "covdec/common.hpp"
#include "covdec/levy.hpp"
#include "covdec/posdec.hpp"
#include "covdec/qlbe.hpp"
#include "covdec/serialization.hpp"
#include "covdec/unravel.hpp"
#include "covdec/version.hpp"

namespace covdec::cli {

using io::json;

// ---------------------------------------------------------------------------
// Sweep specification: {"from": a, "to": b, "count": n} or a plain array
// ---------------------------------------------------------------------------

struct SweepSpec {
  double from = 0.0;
  double to = 0.0;
  long long count = 0;

  static SweepSpec parse(const json& j, const std::string& path) {
    SweepSpec s;
    s.from = io::jsondetail::number(j, "from", path);
    s.to = io::jsondetail::number(j, "to", path);
    const json& c = io::jsondetail::member(j, "count", path);
    if (!c.is_number_integer() || c.get<long long>() < 1)
      throw ConfigError(path + ".count: expected an integer >= 1");
    s.count = c.get<long long>();
    if (!std::isfinite(s.from) || !std::isfinite(s.to))
      throw ConfigError(path + ": 'from' and 'to' must be finite");
    if (s.count == 1 && s.to != s.from)
      throw ConfigError(path + ": count 1 requires to == from");
    return s;
  }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
      v.push_back(from);
      return v;
    }
    for (long long i = 0; i < count; ++i)
      v.push_back(from + (to - from) * static_cast<double>(i) / static_cast<double>(count - 1));
    return v;
  }
};

// Accepts either a sweep object or an explicit array of numbers.
inline std::vector<double> values_from_json(const json& j, const std::string& path) {
  if (j.is_array()) {
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number())
        throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
      v.push_back(j[i].get<double>());
    }
    if (v.empty()) throw ConfigError(path + ": expected a non-empty array");
    return v;
  }
  if (j.is_object()) return SweepSpec::parse(j, path).values();
  throw ConfigError(path + ": expected a sweep object {from,to,count} or an array of numbers");
}

// ---------------------------------------------------------------------------
// Run plumbing
// ---------------------------------------------------------------------------

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct RunResult {
  std::filesystem::path csv_path;
  std::filesystem::path manifest_path;
  std::size_t n_rows = 0;
  std::vector<std::string> warnings;
};

// Loads a config file; if it is a manifest from a previous run, unwraps the
// embedded config so runs can be replayed directly from their manifests.
inline json load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + file.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("library_version"))
    return j.at("config");
  return j;
}

namespace rundetail {

inline std::string default_output_name(const std::string& mode) {
  std::string name = mode;
  for (char& c : name)
    if (c == '-') c = '_';
  return name + ".csv";
}

inline std::string output_name(const json& config, const std::string& mode) {
  if (!config.contains("output")) return default_output_name(mode);
  if (!config.at("output").is_string()) throw ConfigError("output: expected a string");
  const std::string name = config.at("output").get<std::string>();
  if (name.empty() || name == "." || name == ".." ||
      name.find('/') != std::string::npos || name.find('\\') != std::string::npos)
    throw ConfigError("output: must be a bare file name");
  return name;
}

inline std::string manifest_name(const std::string& csv_name) {
  const auto dot = csv_name.rfind('.');
  const std::string stem = dot == std::string::npos ? csv_name : csv_name.substr(0, dot);
  return stem + ".manifest.json";
}

// Levy modes refuse measures that break (or cannot be shown to satisfy) the
// integrability condition before any curve is attempted.
inline void require_levy_condition(const levy::LevyTriplet& t) {
  const levy::LevyValidation v = levy::validate_levy_measure(t.jumps);
  if (v.verdict == levy::LevyValidation::Verdict::violation)
    throw ConfigError("triplet.jumps: " + v.note);
  if (v.verdict == levy::LevyValidation::Verdict::indeterminate)
    throw ConfigError("triplet.jumps: cannot certify the jump measure (" + v.note + ")");
}

inline json scales_json(const qlbe::GasModel& g) {
  const qlbe::DerivedScales sc = qlbe::DerivedScales::from(g);
  json out{{"m_star", sc.m_star}, {"v_mp", sc.v_mp}, {"lambda_th", sc.lambda_th}};
  out["lambda0"] = sc.lambda0 ? json(*sc.lambda0) : json(nullptr);
  return out;
}

struct ModeOutput {
  std::string csv;
  std::size_t n_rows = 0;
  json derived = nullptr;
  std::optional<std::uint64_t> seed_used;
  std::vector<std::string> warnings;
};

// --- mode: levy-cf ----------------------------------------------------------
// Characteristic function Phi(t, x * direction) over a sweep of separations.
inline ModeOutput run_levy_cf(const json& config) {
  const levy::LevyTriplet triplet =
      io::triplet_from_json(io::jsondetail::member(config, "triplet", "config"), "triplet");
  require_levy_condition(triplet);
  const double time = io::jsondetail::number(config, "time", "config");
  if (!(std::isfinite(time) && time >= 0.0))
    throw ConfigError("time: must be finite and nonnegative");
  const Vec3 direction = config.contains("direction")
                             ? io::vec3_from_json(config.at("direction"), "direction")
                             : Vec3{0.0, 0.0, 1.0};
  if (!(norm(direction) > 0.0)) throw ConfigError("direction: must be nonzero");
  const std::vector<double> seps =
      values_from_json(io::jsondetail::member(config, "separations", "config"), "separations");

  const Vec3 dir = normalized(direction);
  ModeOutput out;
  io::CsvBuilder csv;
  csv.header({"separation", "re_phi", "im_phi", "abs_phi"});
  for (double x : seps) {
    const Complex phi = levy::characteristic_function(triplet, time, x * dir);
    csv.row({x, phi.real(), phi.imag(), std::abs(phi)});
  }
  out.csv = csv.str();
  out.n_rows = seps.size();
  if (triplet.jumps.kind() == levy::JumpMeasure::Kind::structure_factor_kernel)
    out.derived = scales_json(triplet.jumps.gas());
  return out;
}

// --- mode: evolve -----------------------------------------------------------
// Applies the decoherence factor to a coherence matrix on a position grid.
inline ModeOutput run_evolve(const json& config) {
  const levy::LevyTriplet triplet =
      io::triplet_from_json(io::jsondetail::member(config, "triplet", "config"), "triplet");
  require_levy_condition(triplet);
  const coherence::CoherenceGrid grid =
      io::grid_from_json(io::jsondetail::member(config, "grid", "config"), "grid");
  const double time = io::jsondetail::number(config, "time", "config");
  if (!(std::isfinite(time) && time >= 0.0))
    throw ConfigError("time: must be finite and nonnegative");
  const Vec3 direction = config.contains("direction")
                             ? io::vec3_from_json(config.at("direction"), "direction")
                             : Vec3{0.0, 0.0, 1.0};
  if (!(norm(direction) > 0.0)) throw ConfigError("direction: must be nonzero");

  const coherence::CoherenceGrid evolved = coherence::evolve(grid, triplet, time, direction);
  ModeOutput out;
  out.csv = io::grid_to_csv(evolved);
  out.n_rows = evolved.size() * evolved.size();
  if (triplet.jumps.kind() == levy::JumpMeasure::Kind::structure_factor_kernel)
    out.derived = scales_json(triplet.jumps.gas());
  return out;
}

// --- mode: qlbe-rate --------------------------------------------------------
// Total collision rate versus momentum, in units of M * v_mp.
inline ModeOutput run_qlbe_rate(const json& config) {
  const qlbe::GasModel gas =
      io::gas_from_json(io::jsondetail::member(config, "gas", "config"), "gas");
  const std::vector<double> svals =
      values_from_json(io::jsondetail::member(config, "momenta", "config"), "momenta");
  const qlbe::DerivedScales sc = qlbe::DerivedScales::from(gas);
  const double pscale = gas.M * sc.v_mp;

  ModeOutput out;
  io::CsvBuilder csv;
  csv.header({"s", "momentum", "rate", "rate_over_lambda0"});
  for (double s : svals) {
    if (!(std::isfinite(s) && s >= 0.0))
      throw ConfigError("momenta: values must be finite and nonnegative");
    const double rate = qlbe::total_rate(gas, {0.0, 0.0, s * pscale});
    const double ratio =
        sc.lambda0 ? rate / *sc.lambda0 : std::numeric_limits<double>::quiet_NaN();
    csv.row({s, s * pscale, rate, ratio});
  }
  out.csv = csv.str();
  out.n_rows = svals.size();
  out.derived = scales_json(gas);
  return out;
}

// --- mode: unravel ----------------------------------------------------------
// Monte Carlo jump unraveling of a momentum superposition.
inline ModeOutput run_unravel(const json& config, const RunOverrides& ov, json& resolved) {
  const qlbe::GasModel gas =
      io::gas_from_json(io::jsondetail::member(config, "gas", "config"), "gas");
  const unravel::MomentumSuperposition psi0 = io::superposition_from_json(
      io::jsondetail::member(config, "initial_state", "config"), "initial_state");
  const double t_final = io::jsondetail::number(config, "t_final", "config");
  if (!(std::isfinite(t_final) && t_final >= 0.0))
    throw ConfigError("t_final: must be finite and nonnegative");
  std::vector<double> times =
      values_from_json(io::jsondetail::member(config, "sample_times", "config"), "sample_times");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(std::isfinite(times[i]) && times[i] >= 0.0 && times[i] <= t_final))
      throw ConfigError("sample_times: values must lie in [0, t_final]");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw ConfigError("sample_times: values must be strictly increasing");
  }

  const json& jn = io::jsondetail::member(config, "n_trajectories", "config");
  if (!jn.is_number_integer() || jn.get<long long>() < 1)
    throw ConfigError("n_trajectories: expected an integer >= 1");

  unravel::EnsembleOptions opt;
  opt.n_trajectories = jn.get<std::size_t>();
  opt.master_seed = ov.seed ? *ov.seed
                            : static_cast<std::uint64_t>(
                                  io::jsondetail::number_or(config, "master_seed", 1.0));
  opt.n_threads = ov.threads ? *ov.threads
                             : static_cast<int>(io::jsondetail::number_or(config, "threads", 0.0));
  opt.failure_tolerance = io::jsondetail::number_or(config, "failure_tolerance", 0.01);
  resolved["master_seed"] = opt.master_seed;

  const unravel::EnsembleStats stats =
      unravel::run_ensemble(gas, psi0, t_final, times, opt);

  ModeOutput out;
  out.csv = io::ensemble_to_csv(stats);
  out.n_rows = stats.times.size();
  out.derived = scales_json(gas);
  out.seed_used = opt.master_seed;
  return out;
}

// --- mode: posdec -----------------------------------------------------------
// Recoilless (position-basis) decoherence curves.
inline ModeOutput run_posdec(const json& config) {
  posdec::RecoillessModel model;
  model.gas = io::gas_from_json(io::jsondetail::member(config, "gas", "config"), "gas");
  model.p0 = config.contains("p0") ? io::vec3_from_json(config.at("p0"), "p0")
                                   : Vec3{0.0, 0.0, 0.0};
  try {
    model.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("posdec: ") + e.what());
  }
  const qlbe::DerivedScales sc = qlbe::DerivedScales::from(model.gas);
  const std::string curve = io::jsondetail::text(config, "curve", "config");
  const Vec3 xdir = config.contains("direction")
                        ? io::vec3_from_json(config.at("direction"), "direction")
                        : Vec3{0.0, 0.0, 1.0};
  if (!(norm(xdir) > 0.0)) throw ConfigError("direction: must be nonzero");
  const Vec3 dir = normalized(xdir);

  ModeOutput out;
  out.derived = scales_json(model.gas);
  if (!model.slow_particle_regime())
    out.warnings.push_back(
        "posdec: |P0| exceeds 0.1 M v_mp (s0 = " + io::format_double(model.s0()) +
        "); the slow-particle closed profile no longer applies");
  io::CsvBuilder csv;
  if (curve == "phi_s") {
    const std::vector<double> xs = values_from_json(
        io::jsondetail::member(config, "separations", "config"), "separations");
    csv.header({"x_over_lambda_th", "x", "re_phi_s", "im_phi_s", "slow_limit"});
    for (double u : xs) {
      const double x = u * sc.lambda_th;
      const Complex ph = posdec::phi_s(model, x * dir);
      csv.row({u, x, ph.real(), ph.imag(), posdec::slow_limit_phi_s(sc.lambda_th, x)});
    }
    out.n_rows = xs.size();
  } else if (curve == "decoherence") {
    const double u = io::jsondetail::number(config, "separation_lambda_th", "config");
    if (!(std::isfinite(u) && u >= 0.0))
      throw ConfigError("separation_lambda_th: must be finite and nonnegative");
    const std::vector<double> ts =
        values_from_json(io::jsondetail::member(config, "times", "config"), "times");
    if (!sc.lambda0)
      throw ConfigError("posdec decoherence curve requires a constant cross-section");
    const Vec3 x = (u * sc.lambda_th) * dir;
    csv.header({"lambda0_t", "t", "abs_D", "re_D", "im_D"});
    for (double tau : ts) {
      if (!(std::isfinite(tau) && tau >= 0.0))
        throw ConfigError("times: values must be finite and nonnegative");
      const double t = tau / *sc.lambda0;
      const Complex d = posdec::decoherence_factor(model, x, t);
      csv.row({tau, t, std::abs(d), d.real(), d.imag()});
    }
    out.n_rows = ts.size();
  } else {
    throw ConfigError("curve: expected 'phi_s' or 'decoherence'");
  }
  out.csv = csv.str();
  return out;
}

}  // namespace rundetail

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline RunResult run_experiment(const json& raw_config, const std::filesystem::path& out_dir,
                                const RunOverrides& ov = {}) {
  const auto t_start = std::chrono::steady_clock::now();

  json config = raw_config;
  if (config.is_object() && config.contains("config") && config.contains("library_version"))
    config = config.at("config");
  if (!config.is_object()) throw ConfigError("config: expected a JSON object");

  const std::string mode = io::jsondetail::text(config, "mode", "config");
  const std::string csv_name = rundetail::output_name(config, mode);

  json resolved = config;
  rundetail::ModeOutput mo;
  if (mode == "levy-cf") {
    mo = rundetail::run_levy_cf(config);
  } else if (mode == "evolve") {
    mo = rundetail::run_evolve(config);
  } else if (mode == "qlbe-rate") {
    mo = rundetail::run_qlbe_rate(config);
  } else if (mode == "unravel") {
    mo = rundetail::run_unravel(config, ov, resolved);
  } else if (mode == "posdec") {
    mo = rundetail::run_posdec(config);
  } else {
    throw ConfigError("mode: unknown mode '" + mode +
                      "' (expected levy-cf, evolve, qlbe-rate, unravel, or posdec)");
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  json manifest;
  manifest["config"] = resolved;
  manifest["library_version"] = kVersion;
  manifest["mode"] = mode;
  manifest["output"] = csv_name;
  manifest["n_rows"] = mo.n_rows;
  manifest["derived_scales"] = mo.derived;
  manifest["master_seed"] = mo.seed_used ? json(*mo.seed_used) : json(nullptr);
  manifest["wall_clock_seconds"] = wall;
  manifest["warnings"] = mo.warnings;

  std::filesystem::create_directories(out_dir);
  RunResult result;
  result.csv_path = out_dir / csv_name;
  result.manifest_path = out_dir / rundetail::manifest_name(csv_name);
  result.n_rows = mo.n_rows;
  result.warnings = mo.warnings;
  {
    std::ofstream f(result.csv_path, std::ios::binary);
    if (!f) throw ConfigError("cannot write output file: " + result.csv_path.string());
    f << mo.csv;
  }
  {
    std::ofstream f(result.manifest_path, std::ios::binary);
    if (!f) throw ConfigError("cannot write manifest: " + result.manifest_path.string());
    f << manifest.dump(2) << "\n";
  }
  return result;
}

}  // namespace covdec::cli
