#pragma once

// Model configuration: a versioned JSON document describing the grid, medium,
// source, partition and outputs of one run.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "strata/cyclic.hpp"
#include "strata/maxwell.hpp"
#include "strata/oracle.hpp"

namespace strata {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ProblemKind { helmholtz, maxwell };
enum class SourceKind { zero, point, random, file };

inline constexpr int kConfigVersion = 1;

struct AxisSpec {
  double core_extent = 8.0;
  double core_step = 1.0;
  Index graded = 0;
  double ratio = 1.5;
  std::vector<cplx> pml;  // outermost last

  bool operator==(const AxisSpec&) const = default;
};

struct SourceSpec {
  SourceKind kind = SourceKind::zero;
  std::array<double, 3> location{};
  std::array<cplx, 3> moment{};  // Helmholtz uses moment[0]
  std::uint64_t seed = 0;
  std::string path;

  bool operator==(const SourceSpec&) const = default;
};

struct BenchSpec {
  std::vector<Index> sizes{16, 32, 64, 128};
  std::vector<std::string> regimes{"fft", "dense"};
  Index nz = 8;

  bool operator==(const BenchSpec&) const = default;
};

struct ModelConfig {
  int version = kConfigVersion;
  ProblemKind problem = ProblemKind::helmholtz;
  std::array<AxisSpec, 3> axes;
  std::vector<double> interfaces;              // layer interfaces in z
  std::vector<cplx> sigma{1.0};                // Helmholtz, one per layer
  cplx lambda{-1.0, 0.0};                      // Helmholtz
  std::vector<std::array<cplx, 3>> rho{{1.0, 1.0, 1.0}};  // Maxwell, one triple per layer
  double mu = 1.0, omega = 1.0;                // Maxwell
  SourceSpec source;
  std::string partition = "sqrt";              // three | sqrt | none
  std::string output_dir = "out";
  double residual_tol = 1e-9;
  double verify_tol = 1e-8;
  Index oracle_cap = kOracleDefaultCap;
  BenchSpec bench;

  bool operator==(const ModelConfig&) const = default;
};

namespace detail {

using json = nlohmann::json;

inline std::string where(const std::string& path) { return path.empty() ? "/" : path; }

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + where(path) + ": " + what);
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_fail(path, "expected an object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      config_fail(path + "/" + k, "unknown key");
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  return j.get<double>();
}

inline Index get_index(const json& j, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  return j.get<Index>();
}

inline cplx get_complex(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    config_fail(path, "expected a complex number as [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) config_fail(path, "expected a string");
  return j.get<std::string>();
}

inline const json& array_at(const json& j, const std::string& path) {
  if (!j.is_array()) config_fail(path, "expected an array");
  return j;
}

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline AxisSpec parse_axis(const json& j, const std::string& path) {
  allow_keys(j, path, {"core_extent", "core_step", "graded", "ratio", "pml"});
  AxisSpec a;
  if (j.contains("core_extent")) a.core_extent = get_number(j["core_extent"], path + "/core_extent");
  if (j.contains("core_step")) a.core_step = get_number(j["core_step"], path + "/core_step");
  if (j.contains("graded")) a.graded = get_index(j["graded"], path + "/graded");
  if (j.contains("ratio")) a.ratio = get_number(j["ratio"], path + "/ratio");
  if (j.contains("pml")) {
    const json& p = array_at(j["pml"], path + "/pml");
    for (std::size_t i = 0; i < p.size(); ++i) a.pml.push_back(get_complex(p[i], path + "/pml/" + std::to_string(i)));
  }
  return a;
}

inline json axis_json(const AxisSpec& a) {
  json p = json::array();
  for (const auto& z : a.pml) p.push_back(complex_json(z));
  return {{"core_extent", a.core_extent}, {"core_step", a.core_step}, {"graded", a.graded}, {"ratio", a.ratio}, {"pml", p}};
}

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline Grid1D build_axis(const AxisSpec& a) { return build_grid(a.core_extent, a.core_step, a.graded, a.ratio, a.pml); }

/// Parses and validates a configuration document. `name` prefixes syntax
/// errors, which carry line and column.
inline ModelConfig parse_config(const std::string& text, const std::string& name = "config") {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_of(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError(name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  detail::allow_keys(j, "", {"version", "problem", "grid", "medium", "source", "partition", "output", "tolerances",
                             "oracle_cap", "bench"});
  ModelConfig c;
  if (!j.contains("version")) detail::config_fail("/version", "missing");
  c.version = static_cast<int>(detail::get_index(j["version"], "/version"));
  if (c.version != kConfigVersion) detail::config_fail("/version", "unsupported version " + std::to_string(c.version));

  if (!j.contains("problem")) detail::config_fail("/problem", "missing");
  const std::string kind = detail::get_string(j["problem"], "/problem");
  if (kind == "helmholtz")
    c.problem = ProblemKind::helmholtz;
  else if (kind == "maxwell")
    c.problem = ProblemKind::maxwell;
  else
    detail::config_fail("/problem", "expected \"helmholtz\" or \"maxwell\"");

  if (!j.contains("grid")) detail::config_fail("/grid", "missing");
  detail::allow_keys(j["grid"], "/grid", {"x", "y", "z"});
  const char* names[] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    if (!j["grid"].contains(names[a])) detail::config_fail(std::string("/grid/") + names[a], "missing");
    c.axes[a] = detail::parse_axis(j["grid"][names[a]], std::string("/grid/") + names[a]);
  }

  if (j.contains("medium")) {
    const json& m = j["medium"];
    detail::allow_keys(m, "/medium", {"interfaces", "sigma", "lambda", "rho", "mu", "omega"});
    if (m.contains("interfaces")) {
      const json& v = detail::array_at(m["interfaces"], "/medium/interfaces");
      for (std::size_t i = 0; i < v.size(); ++i)
        c.interfaces.push_back(detail::get_number(v[i], "/medium/interfaces/" + std::to_string(i)));
    }
    if (c.problem == ProblemKind::helmholtz) {
      if (m.contains("rho") || m.contains("mu") || m.contains("omega"))
        detail::config_fail("/medium", "rho, mu and omega belong to maxwell problems");
      if (m.contains("sigma")) {
        c.sigma.clear();
        const json& v = detail::array_at(m["sigma"], "/medium/sigma");
        for (std::size_t i = 0; i < v.size(); ++i)
          c.sigma.push_back(detail::get_complex(v[i], "/medium/sigma/" + std::to_string(i)));
      }
      if (m.contains("lambda")) c.lambda = detail::get_complex(m["lambda"], "/medium/lambda");
    } else {
      if (m.contains("sigma") || m.contains("lambda"))
        detail::config_fail("/medium", "sigma and lambda belong to helmholtz problems");
      if (m.contains("rho")) {
        c.rho.clear();
        const json& v = detail::array_at(m["rho"], "/medium/rho");
        for (std::size_t i = 0; i < v.size(); ++i) {
          const std::string p = "/medium/rho/" + std::to_string(i);
          if (!v[i].is_array() || v[i].size() != 3) detail::config_fail(p, "expected three complex components");
          c.rho.push_back({detail::get_complex(v[i][0], p + "/0"), detail::get_complex(v[i][1], p + "/1"),
                           detail::get_complex(v[i][2], p + "/2")});
        }
      }
      if (m.contains("mu")) c.mu = detail::get_number(m["mu"], "/medium/mu");
      if (m.contains("omega")) c.omega = detail::get_number(m["omega"], "/medium/omega");
    }
  }

  if (!j.contains("source")) detail::config_fail("/source", "missing");
  {
    const json& s = j["source"];
    detail::allow_keys(s, "/source", {"zero", "point", "random", "file"});
    if (s.size() != 1) detail::config_fail("/source", "exactly one of zero, point, random, file is required");
    const auto& [key, v] = *s.items().begin();
    const std::string p = "/source/" + key;
    if (key == "zero") {
      detail::allow_keys(v, p, {});
      c.source.kind = SourceKind::zero;
    } else if (key == "point") {
      detail::allow_keys(v, p, {"location", "moment"});
      c.source.kind = SourceKind::point;
      if (!v.contains("location") || !v["location"].is_array() || v["location"].size() != 3)
        detail::config_fail(p + "/location", "expected [x, y, z]");
      for (int a = 0; a < 3; ++a) c.source.location[a] = detail::get_number(v["location"][a], p + "/location/" + std::to_string(a));
      if (!v.contains("moment")) detail::config_fail(p + "/moment", "missing");
      if (c.problem == ProblemKind::helmholtz) {
        c.source.moment[0] = detail::get_complex(v["moment"], p + "/moment");
      } else {
        if (!v["moment"].is_array() || v["moment"].size() != 3) detail::config_fail(p + "/moment", "expected three complex components");
        for (int a = 0; a < 3; ++a) c.source.moment[a] = detail::get_complex(v["moment"][a], p + "/moment/" + std::to_string(a));
      }
    } else if (key == "random") {
      detail::allow_keys(v, p, {"seed"});
      c.source.kind = SourceKind::random;
      if (v.contains("seed")) c.source.seed = static_cast<std::uint64_t>(detail::get_index(v["seed"], p + "/seed"));
    } else {
      c.source.kind = SourceKind::file;
      c.source.path = detail::get_string(v, p);
    }
  }

  if (j.contains("partition")) {
    c.partition = detail::get_string(j["partition"], "/partition");
    if (c.partition != "three" && c.partition != "sqrt" && c.partition != "none")
      detail::config_fail("/partition", "expected \"three\", \"sqrt\" or \"none\"");
  }
  if (j.contains("output")) {
    detail::allow_keys(j["output"], "/output", {"dir"});
    if (j["output"].contains("dir")) c.output_dir = detail::get_string(j["output"]["dir"], "/output/dir");
  }
  if (j.contains("tolerances")) {
    detail::allow_keys(j["tolerances"], "/tolerances", {"residual", "verify"});
    if (j["tolerances"].contains("residual")) c.residual_tol = detail::get_number(j["tolerances"]["residual"], "/tolerances/residual");
    if (j["tolerances"].contains("verify")) c.verify_tol = detail::get_number(j["tolerances"]["verify"], "/tolerances/verify");
  }
  if (j.contains("oracle_cap")) c.oracle_cap = detail::get_index(j["oracle_cap"], "/oracle_cap");
  if (j.contains("bench")) {
    const json& b = j["bench"];
    detail::allow_keys(b, "/bench", {"sizes", "regimes", "nz"});
    if (b.contains("sizes")) {
      c.bench.sizes.clear();
      const json& v = detail::array_at(b["sizes"], "/bench/sizes");
      for (std::size_t i = 0; i < v.size(); ++i) c.bench.sizes.push_back(detail::get_index(v[i], "/bench/sizes/" + std::to_string(i)));
    }
    if (b.contains("regimes")) {
      c.bench.regimes.clear();
      const json& v = detail::array_at(b["regimes"], "/bench/regimes");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string r = detail::get_string(v[i], "/bench/regimes/" + std::to_string(i));
        if (r != "fft" && r != "dense") detail::config_fail("/bench/regimes/" + std::to_string(i), "expected \"fft\" or \"dense\"");
        c.bench.regimes.push_back(r);
      }
    }
    if (b.contains("nz")) c.bench.nz = detail::get_index(b["nz"], "/bench/nz");
  }

  // cross-field invariants
  for (std::size_t i = 1; i < c.interfaces.size(); ++i)
    if (!(c.interfaces[i] > c.interfaces[i - 1])) detail::config_fail("/medium/interfaces", "must be strictly increasing");
  const std::size_t layers = c.interfaces.size() + 1;
  if (c.problem == ProblemKind::helmholtz && c.sigma.size() != layers)
    detail::config_fail("/medium/sigma", "need one value per layer (" + std::to_string(layers) + ")");
  if (c.problem == ProblemKind::maxwell && c.rho.size() != layers)
    detail::config_fail("/medium/rho", "need one triple per layer (" + std::to_string(layers) + ")");
  if (!(c.residual_tol > 0.0) || !(c.verify_tol > 0.0)) detail::config_fail("/tolerances", "must be positive");
  if (c.oracle_cap < 1) detail::config_fail("/oracle_cap", "must be positive");
  if (c.bench.nz < 1) detail::config_fail("/bench/nz", "must be positive");
  try {
    for (int a = 0; a < 3; ++a) build_axis(c.axes[a]);
  } catch (const GridError& e) {
    detail::config_fail("/grid", e.what());
  }
  const double depth = build_axis(c.axes[2]).real_extent();
  for (double z : c.interfaces)
    if (!(z > 0.0 && z < depth)) detail::config_fail("/medium/interfaces", "interface outside the z extent");
  return c;
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// Fully explicit configuration, defaults filled in.
inline nlohmann::json config_to_json(const ModelConfig& c) {
  using detail::complex_json;
  using detail::json;
  json medium{{"interfaces", c.interfaces}};
  if (c.problem == ProblemKind::helmholtz) {
    json s = json::array();
    for (const auto& v : c.sigma) s.push_back(complex_json(v));
    medium["sigma"] = s;
    medium["lambda"] = complex_json(c.lambda);
  } else {
    json r = json::array();
    for (const auto& t : c.rho) r.push_back(json::array({complex_json(t[0]), complex_json(t[1]), complex_json(t[2])}));
    medium["rho"] = r;
    medium["mu"] = c.mu;
    medium["omega"] = c.omega;
  }
  json source;
  switch (c.source.kind) {
    case SourceKind::zero: source = {{"zero", json::object()}}; break;
    case SourceKind::point: {
      json moment = c.problem == ProblemKind::helmholtz
                        ? complex_json(c.source.moment[0])
                        : json::array({complex_json(c.source.moment[0]), complex_json(c.source.moment[1]),
                                       complex_json(c.source.moment[2])});
      source = {{"point", {{"location", c.source.location}, {"moment", moment}}}};
      break;
    }
    case SourceKind::random: source = {{"random", {{"seed", c.source.seed}}}}; break;
    case SourceKind::file: source = {{"file", c.source.path}}; break;
  }
  return {{"version", c.version},
          {"problem", c.problem == ProblemKind::helmholtz ? "helmholtz" : "maxwell"},
          {"grid", {{"x", detail::axis_json(c.axes[0])}, {"y", detail::axis_json(c.axes[1])}, {"z", detail::axis_json(c.axes[2])}}},
          {"medium", medium},
          {"source", source},
          {"partition", c.partition},
          {"output", {{"dir", c.output_dir}}},
          {"tolerances", {{"residual", c.residual_tol}, {"verify", c.verify_tol}}},
          {"oracle_cap", c.oracle_cap},
          {"bench", {{"sizes", c.bench.sizes}, {"regimes", c.bench.regimes}, {"nz", c.bench.nz}}}};
}

/// Portable uniform doubles in [-1, 1) from a seeded 64-bit Mersenne twister.
class SourceRng {
 public:
  explicit SourceRng(std::uint64_t seed) : gen_(seed) {}
  double next() { return static_cast<double>(gen_() >> 11) * 0x1.0p-52 - 1.0; }
  cplx complex() {
    const double re = next();
    return {re, next()};
  }

 private:
  std::mt19937_64 gen_;
};

inline Index nearest_node(const std::vector<cplx>& coords, double x, Index first, Index last) {
  Index best = first;
  for (Index i = first; i <= last; ++i)
    if (std::abs(coords[i].real() - x) < std::abs(coords[best].real() - x)) best = i;
  return best;
}

}  // namespace strata
