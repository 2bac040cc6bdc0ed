#pragma once

// JSON (de)serialization for the model types and deterministic CSV output.
//
// CSV cells are rendered with std::to_chars at 17 significant digits, so a
// given sequence of doubles always produces the same bytes; rows end in CRLF.
// JSON round-trips exactly for the parametric model kinds; opaque callables
// (custom cross-sections / densities) cannot be serialized and throw.

#include <charconv>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "covdec/coherence.hpp"
#include "covdec/common.hpp"
#include "covdec/levy.hpp"
#include "covdec/qlbe.hpp"
#include "covdec/unravel.hpp"
#include "covdec/vec3.hpp"

namespace covdec::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Number / CSV formatting
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc())
    throw NumericError("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

class CsvBuilder {
 public:
  void header(std::initializer_list<std::string_view> names) {
    bool first = true;
    for (auto n : names) {
      if (!first) out_ += ',';
      out_ += n;
      first = false;
    }
    out_ += "\r\n";
  }

  void row(const std::vector<double>& values) {
    bool first = true;
    for (double v : values) {
      if (!first) out_ += ',';
      out_ += format_double(v);
      first = false;
    }
    out_ += "\r\n";
  }

  // Mixed row for integer-indexed tables.
  void row_indexed(std::initializer_list<long long> idx, const std::vector<double>& values) {
    bool first = true;
    for (long long i : idx) {
      if (!first) out_ += ',';
      out_ += std::to_string(i);
      first = false;
    }
    for (double v : values) {
      out_ += ',';
      out_ += format_double(v);
    }
    out_ += "\r\n";
  }

  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

// ---------------------------------------------------------------------------
// JSON helpers with path-carrying errors
// ---------------------------------------------------------------------------

namespace jsondetail {

inline const json& member(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(path + ": missing required field '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const char* key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline double number_or(const json& j, const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string(key) + ": expected a number");
  return j.at(key).get<double>();
}

inline std::string text(const json& j, const char* key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

}  // namespace jsondetail

// ---------------------------------------------------------------------------
// Vec3 / Mat3
// ---------------------------------------------------------------------------

inline json to_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number())
    throw ConfigError(path + ": expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const Mat3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return rows;
}

inline Mat3 mat3_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected 3 rows");
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != 3)
      throw ConfigError(path + ": each row must hold 3 numbers");
    for (int k = 0; k < 3; ++k) {
      if (!row[static_cast<std::size_t>(k)].is_number())
        throw ConfigError(path + ": matrix entries must be numbers");
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Cross-section / gas model
// ---------------------------------------------------------------------------

inline json to_json(const qlbe::CrossSection& s) {
  switch (s.kind()) {
    case qlbe::CrossSection::Kind::constant:
      return json{{"kind", "constant"}, {"value", s.constant_value()}};
    case qlbe::CrossSection::Kind::gaussian_radial:
      return json{{"kind", "gaussian_radial"}, {"amplitude", s.amplitude()}, {"scale", s.scale()}};
    case qlbe::CrossSection::Kind::opaque_radial:
      throw ConfigError("cannot serialize an opaque cross-section callable");
  }
  throw ConfigError("unknown cross-section kind");
}

inline qlbe::CrossSection cross_section_from_json(const json& j, const std::string& path) {
  const std::string kind = jsondetail::text(j, "kind", path);
  if (kind == "constant")
    return qlbe::CrossSection::constant(jsondetail::number(j, "value", path));
  if (kind == "gaussian_radial")
    return qlbe::CrossSection::gaussian_radial(jsondetail::number(j, "amplitude", path),
                                               jsondetail::number(j, "scale", path));
  throw ConfigError(path + ": unknown cross-section kind '" + kind + "'");
}

inline json to_json(const qlbe::GasModel& g) {
  return json{{"n_gas", g.n_gas}, {"m", g.m},       {"M", g.M},
              {"beta", g.beta},   {"hbar", g.hbar}, {"sigma", to_json(g.sigma)}};
}

inline qlbe::GasModel gas_from_json(const json& j, const std::string& path) {
  qlbe::GasModel g;
  g.n_gas = jsondetail::number(j, "n_gas", path);
  g.m = jsondetail::number(j, "m", path);
  g.M = jsondetail::number(j, "M", path);
  g.beta = jsondetail::number(j, "beta", path);
  g.hbar = jsondetail::number_or(j, "hbar", 1.0);
  g.sigma = cross_section_from_json(jsondetail::member(j, "sigma", path), path + ".sigma");
  try {
    g.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Jump measure / triplet
// ---------------------------------------------------------------------------

inline json to_json(const levy::JumpMeasure& m) {
  switch (m.kind()) {
    case levy::JumpMeasure::Kind::point_masses: {
      json masses = json::array();
      for (const auto& pm : m.masses())
        masses.push_back(json{{"weight", pm.weight}, {"transfer", to_json(pm.transfer)}});
      return json{{"kind", "point_masses"}, {"masses", masses}, {"q0", m.q0()}};
    }
    case levy::JumpMeasure::Kind::isotropic_density: {
      if (!m.gaussian_params())
        throw ConfigError("cannot serialize an opaque isotropic density");
      const auto& p = *m.gaussian_params();
      return json{{"kind", "isotropic_gaussian"}, {"amplitude", p[0]}, {"scale", p[1]},
                  {"q0", m.q0()}};
    }
    case levy::JumpMeasure::Kind::structure_factor_kernel:
      return json{{"kind", "structure_factor_kernel"},
                  {"gas", to_json(m.gas())},
                  {"p0", to_json(m.p0())},
                  {"q0", m.q0()}};
  }
  throw ConfigError("unknown jump-measure kind");
}

inline levy::JumpMeasure jump_measure_from_json(const json& j, const std::string& path) {
  const std::string kind = jsondetail::text(j, "kind", path);
  const double q0 = jsondetail::number_or(j, "q0", 1.0);
  if (kind == "point_masses") {
    const json& arr = jsondetail::member(j, "masses", path);
    if (!arr.is_array()) throw ConfigError(path + ".masses: expected an array");
    std::vector<levy::PointMass> masses;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ip = path + ".masses[" + std::to_string(i) + "]";
      levy::PointMass pm;
      pm.weight = jsondetail::number(arr[i], "weight", ip);
      pm.transfer = vec3_from_json(jsondetail::member(arr[i], "transfer", ip), ip + ".transfer");
      masses.push_back(pm);
    }
    return levy::JumpMeasure::point_masses(std::move(masses), q0);
  }
  if (kind == "isotropic_gaussian") {
    return levy::JumpMeasure::isotropic_gaussian(jsondetail::number(j, "amplitude", path),
                                                 jsondetail::number(j, "scale", path), q0);
  }
  if (kind == "structure_factor_kernel") {
    return levy::JumpMeasure::structure_factor_kernel(
        gas_from_json(jsondetail::member(j, "gas", path), path + ".gas"),
        vec3_from_json(jsondetail::member(j, "p0", path), path + ".p0"), q0);
  }
  throw ConfigError(path + ": unknown jump-measure kind '" + kind + "'");
}

inline json to_json(const levy::LevyTriplet& t) {
  return json{{"drift", to_json(t.drift)},
              {"diffusion", to_json(t.diffusion)},
              {"jumps", to_json(t.jumps)},
              {"hbar", t.hbar}};
}

inline levy::LevyTriplet triplet_from_json(const json& j, const std::string& path) {
  levy::LevyTriplet t;
  t.drift = vec3_from_json(jsondetail::member(j, "drift", path), path + ".drift");
  t.diffusion = mat3_from_json(jsondetail::member(j, "diffusion", path), path + ".diffusion");
  t.jumps = jump_measure_from_json(jsondetail::member(j, "jumps", path), path + ".jumps");
  t.hbar = jsondetail::number_or(j, "hbar", 1.0);
  try {
    t.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Superposition / coherence grid / ensemble stats
// ---------------------------------------------------------------------------

inline json to_json(const unravel::MomentumSuperposition& s) {
  json branches = json::array();
  for (const auto& b : s.branches)
    branches.push_back(json{{"amplitude", json::array({b.amplitude.real(), b.amplitude.imag()})},
                            {"momentum", to_json(b.momentum)}});
  return json{{"branches", branches}};
}

inline unravel::MomentumSuperposition superposition_from_json(const json& j,
                                                              const std::string& path) {
  const json& arr = jsondetail::member(j, "branches", path);
  if (!arr.is_array() || arr.empty())
    throw ConfigError(path + ".branches: expected a non-empty array");
  unravel::MomentumSuperposition s;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string ip = path + ".branches[" + std::to_string(i) + "]";
    const json& amp = jsondetail::member(arr[i], "amplitude", ip);
    if (!amp.is_array() || amp.size() != 2 || !amp[0].is_number() || !amp[1].is_number())
      throw ConfigError(ip + ".amplitude: expected [re, im]");
    unravel::Branch b;
    b.amplitude = {amp[0].get<double>(), amp[1].get<double>()};
    b.momentum = vec3_from_json(jsondetail::member(arr[i], "momentum", ip), ip + ".momentum");
    s.branches.push_back(b);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return s;
}

inline json to_json(const coherence::CoherenceGrid& g) {
  json axis = json::array();
  for (double v : g.axis()) axis.push_back(v);
  json rows = json::array();
  const Eigen::Index n = g.matrix().rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < n; ++k)
      row.push_back(json::array({g.matrix()(i, k).real(), g.matrix()(i, k).imag()}));
    rows.push_back(row);
  }
  return json{{"axis", axis}, {"matrix", rows}};
}

inline coherence::CoherenceGrid grid_from_json(const json& j, const std::string& path) {
  const json& jaxis = jsondetail::member(j, "axis", path);
  if (!jaxis.is_array() || jaxis.empty())
    throw ConfigError(path + ".axis: expected a non-empty array of numbers");
  std::vector<double> axis;
  for (const auto& v : jaxis) {
    if (!v.is_number()) throw ConfigError(path + ".axis: entries must be numbers");
    axis.push_back(v.get<double>());
  }
  const json& jm = jsondetail::member(j, "matrix", path);
  const std::size_t n = axis.size();
  if (!jm.is_array() || jm.size() != n)
    throw ConfigError(path + ".matrix: expected " + std::to_string(n) + " rows");
  Eigen::MatrixXcd rho(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = jm[i];
    if (!row.is_array() || row.size() != n)
      throw ConfigError(path + ".matrix: row " + std::to_string(i) + " must hold " +
                        std::to_string(n) + " entries");
    for (std::size_t k = 0; k < n; ++k) {
      const json& c = row[k];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
        throw ConfigError(path + ".matrix: entries must be [re, im] pairs");
      rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          std::complex<double>(c[0].get<double>(), c[1].get<double>());
    }
  }
  try {
    return coherence::CoherenceGrid::create(std::move(axis), std::move(rho));
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// CSV renderings --------------------------------------------------------------

inline std::string grid_to_csv(const coherence::CoherenceGrid& g) {
  CsvBuilder csv;
  csv.header({"row", "col", "re", "im"});
  const Eigen::Index n = g.matrix().rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      csv.row_indexed({static_cast<long long>(i), static_cast<long long>(k)},
                      {g.matrix()(i, k).real(), g.matrix()(i, k).imag()});
  return csv.str();
}

inline std::string ensemble_to_csv(const unravel::EnsembleStats& st) {
  CsvBuilder csv;
  csv.header({"time", "coherence", "coherence_stderr", "mean_kinetic", "kinetic_stderr",
              "mean_px", "mean_py", "mean_pz"});
  for (std::size_t t = 0; t < st.times.size(); ++t)
    csv.row({st.times[t], st.coherence[t], st.coherence_stderr[t], st.mean_kinetic[t],
             st.kinetic_stderr[t], st.mean_momentum[t].x, st.mean_momentum[t].y,
             st.mean_momentum[t].z});
  return csv.str();
}

}  // namespace covdec::io
