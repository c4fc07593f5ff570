#pragma once

// Run configuration: a JSON document, validated into RunConfig. See
// README.md for the full key list and defaults.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fermi/cli/expr.hpp"
#include "fermi/error.hpp"
#include "fermi/geometry.hpp"
#include "fermi/sampling.hpp"

namespace fermi::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class CurveMode { curvature, parametric };

/// An expression or an array of uniform samples over [0, L].
struct Profile {
  std::string text;  // empty when given as samples
  std::vector<double> samples;
  bool is_expression() const noexcept { return !text.empty(); }
};

struct CurveConfig {
  CurveMode mode = CurveMode::curvature;
  double length = 0.0;  // curvature mode
  Profile k;
  std::string x, y;  // parametric mode
  double t0 = 0.0, t1 = 1.0;
};

struct MeshConfig {
  std::size_t ns = 256;
  std::size_t nt = 32;
  std::size_t n1d = 512;  // grid of the 1-D discretised oracle
};

struct Tolerances {
  double concavity = 1e-9;
  double symmetry = 1e-7;
  double shooting = 1e-12;
  double descent = 1e-10;
};

struct OutputConfig {
  std::string dir;  // empty: report to stdout only
  std::string report = "report.txt";
};

struct RunConfig {
  std::string command;
  CurveConfig curve;
  Profile width;
  double p = 2.0;
  std::size_t samples = geometry::kDefaultSamples;
  MeshConfig mesh;
  std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05};
  std::size_t figure2_points = 500;
  Tolerances tol;
  OutputConfig output;
  bool has_curve = false;
  bool has_width = false;
  json canonical;  // the validated document, used for hashing
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& key, const std::string& msg) {
  throw Error(ErrorCode::SchemaError, key + ": " + msg);
}

inline double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) schema_error(key, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(key, "must be finite");
  return v;
}

inline std::size_t get_count(const json& j, const std::string& key, std::size_t min) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) schema_error(key, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < static_cast<std::int64_t>(min)) schema_error(key, "must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

inline std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) schema_error(key, "expected a string");
  return j.get<std::string>();
}

/// Re-raise a parse failure with the key path in front of it.
inline void check_expression(const std::string& text, const std::string& key, const std::set<std::string>& vars,
                             bool bind_length = true) {
  try {
    std::map<std::string, double> constants;
    if (bind_length) constants["L"] = 1.0;
    parse_expression(text, vars, constants);
  } catch (const ParseError& e) {
    throw ParseError(e.offset(), key + ": " + e.detail());
  }
}

inline Profile get_profile(const json& j, const std::string& key, const std::set<std::string>& vars) {
  Profile pr;
  if (j.is_string()) {
    pr.text = j.get<std::string>();
    if (pr.text.empty()) schema_error(key, "expression is empty");
    check_expression(pr.text, key, vars);
  } else if (j.is_number()) {
    pr.text = format_number(get_number(j, key));
  } else if (j.is_array()) {
    if (j.size() < 2) schema_error(key, "need at least 2 samples");
    for (std::size_t i = 0; i < j.size(); ++i) pr.samples.push_back(get_number(j[i], key + "[" + std::to_string(i) + "]"));
  } else {
    schema_error(key, "expected an expression string, a number or an array of samples");
  }
  return pr;
}

inline void reject_unknown(const json& j, const std::string& where, const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) schema_error(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

inline void parse_curve(const json& curve, RunConfig& c) {
  if (!curve.is_object()) schema_error("curve", "expected an object");
  reject_unknown(curve, "curve", {"curvature", "parametric"});
  const bool has_k = curve.contains("curvature"), has_xy = curve.contains("parametric");
  if (has_k && has_xy) schema_error("curve", "give exactly one of curvature or parametric, not both");
  if (!has_k && !has_xy) schema_error("curve", "give exactly one of curvature or parametric");
  if (has_k) {
    const json& k = curve["curvature"];
    if (!k.is_object()) schema_error("curve.curvature", "expected an object");
    reject_unknown(k, "curve.curvature", {"L", "k"});
    c.curve.mode = CurveMode::curvature;
    if (!k.contains("L")) schema_error("curve.curvature.L", "missing");
    c.curve.length = get_number(k["L"], "curve.curvature.L");
    if (!(c.curve.length > 0.0)) schema_error("curve.curvature.L", "must be positive");
    if (!k.contains("k")) schema_error("curve.curvature.k", "missing");
    c.curve.k = get_profile(k["k"], "curve.curvature.k", {"s"});
  } else {
    const json& xy = curve["parametric"];
    if (!xy.is_object()) schema_error("curve.parametric", "expected an object");
    reject_unknown(xy, "curve.parametric", {"x", "y", "t_range"});
    c.curve.mode = CurveMode::parametric;
    for (const char* key : {"x", "y", "t_range"})
      if (!xy.contains(key)) schema_error(std::string("curve.parametric.") + key, "missing");
    c.curve.x = get_string(xy["x"], "curve.parametric.x");
    c.curve.y = get_string(xy["y"], "curve.parametric.y");
    check_expression(c.curve.x, "curve.parametric.x", {"t"}, false);
    check_expression(c.curve.y, "curve.parametric.y", {"t"}, false);
    const json& tr = xy["t_range"];
    if (!tr.is_array() || tr.size() != 2) schema_error("curve.parametric.t_range", "expected [t0, t1]");
    c.curve.t0 = get_number(tr[0], "curve.parametric.t_range[0]");
    c.curve.t1 = get_number(tr[1], "curve.parametric.t_range[1]");
    if (!(c.curve.t1 > c.curve.t0)) schema_error("curve.parametric.t_range", "t1 must exceed t0");
  }
  c.has_curve = true;
}

}  // namespace detail

/// Validates a parsed document. Every failure names the offending key.
inline RunConfig parse_config(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) schema_error("<root>", "expected an object");
  reject_unknown(doc, "",
                 {"schema", "command", "curve", "width", "p", "samples", "mesh", "epsilons", "figure2", "tolerances",
                  "output"});
  RunConfig c;
  if (doc.contains("schema") && get_number(doc["schema"], "schema") != kSchemaVersion)
    schema_error("schema", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  if (doc.contains("command")) c.command = get_string(doc["command"], "command");

  if (doc.contains("curve")) parse_curve(doc["curve"], c);
  if (doc.contains("width")) {
    c.width = get_profile(doc["width"], "width", {"s"});
    c.has_width = true;
  }

  if (doc.contains("p")) c.p = get_number(doc["p"], "p");
  if (!(c.p > 1.0)) schema_error("p", "p must exceed 1");

  if (doc.contains("samples")) c.samples = get_count(doc["samples"], "samples", 33);
  if (c.samples % 2 == 0) schema_error("samples", "must be odd so that L/2 is a sample");

  if (doc.contains("mesh")) {
    const json& m = doc["mesh"];
    if (!m.is_object()) schema_error("mesh", "expected an object");
    reject_unknown(m, "mesh", {"ns", "nt", "n1d"});
    if (m.contains("ns")) c.mesh.ns = get_count(m["ns"], "mesh.ns", 8);
    if (m.contains("nt")) c.mesh.nt = get_count(m["nt"], "mesh.nt", 8);
    if (m.contains("n1d")) c.mesh.n1d = get_count(m["n1d"], "mesh.n1d", 32);
  }
  if (c.mesh.ns % 2 != 0) schema_error("mesh.ns", "must be even (the odd mode uses half the cells)");

  if (doc.contains("epsilons")) {
    const json& e = doc["epsilons"];
    if (!e.is_array() || e.empty()) schema_error("epsilons", "expected a nonempty array");
    c.epsilons.clear();
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string key = "epsilons[" + std::to_string(i) + "]";
      const double v = get_number(e[i], key);
      if (!(v > 0.0)) schema_error(key, "must be positive");
      if (!c.epsilons.empty() && !(v < c.epsilons.back())) schema_error(key, "epsilons must strictly decrease");
      c.epsilons.push_back(v);
    }
  }

  if (doc.contains("figure2")) {
    const json& f = doc["figure2"];
    if (!f.is_object()) schema_error("figure2", "expected an object");
    reject_unknown(f, "figure2", {"points"});
    if (f.contains("points")) c.figure2_points = get_count(f["points"], "figure2.points", 1);
  }

  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    if (!t.is_object()) schema_error("tolerances", "expected an object");
    reject_unknown(t, "tolerances", {"concavity", "symmetry", "shooting", "descent"});
    auto positive = [&](const char* key, double& out) {
      if (!t.contains(key)) return;
      const std::string path = std::string("tolerances.") + key;
      out = get_number(t[key], path);
      if (!(out > 0.0)) schema_error(path, "must be positive");
    };
    positive("concavity", c.tol.concavity);
    positive("symmetry", c.tol.symmetry);
    positive("shooting", c.tol.shooting);
    positive("descent", c.tol.descent);
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    if (!o.is_object()) schema_error("output", "expected an object");
    reject_unknown(o, "output", {"dir", "report"});
    if (o.contains("dir")) c.output.dir = get_string(o["dir"], "output.dir");
    if (o.contains("report")) c.output.report = get_string(o["report"], "output.report");
    if (c.output.report.empty()) schema_error("output.report", "must not be empty");
  }
  c.canonical = doc;
  return c;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("<document>: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_json(path)); }

namespace detail {

inline geometry::ScalarFunction bind(const Expr& e) {
  return [e](double x) { return e(x); };
}

inline geometry::ScalarFunction profile_function(const Profile& pr, double length, const std::string& key) {
  if (pr.is_expression()) {
    try {
      return bind(parse_expression(pr.text, {"s"}, {{"L", length}}));
    } catch (const ParseError& e) {
      throw ParseError(e.offset(), key + ": " + e.detail());
    }
  }
  SampledFunction f(length, pr.samples);
  return [f](double s) { return f(s); };
}

inline void require_finite(const SampledFunction& f, const std::string& key) {
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!std::isfinite(f[i]))
      schema_error(key, "not finite at s = " + format_number(f.node(i)));
}

}  // namespace detail

/// Builds and validates the Fermi domain described by the configuration.
inline geometry::FermiDomain build_domain(const RunConfig& c) {
  if (!c.has_curve) detail::schema_error("curve", "missing");
  if (!c.has_width) detail::schema_error("width", "missing");
  geometry::CurveSpec curve;
  if (c.curve.mode == CurveMode::curvature) {
    const auto k = detail::profile_function(c.curve.k, c.curve.length, "curve.curvature.k");
    detail::require_finite(SampledFunction::from(c.curve.length, c.samples, k), "curve.curvature.k");
    curve = geometry::reconstruct_from_curvature(c.curve.length, k, c.samples, c.tol.symmetry);
  } else {
    const auto x = detail::bind(parse_expression(c.curve.x, {"t"}));
    const auto y = detail::bind(parse_expression(c.curve.y, {"t"}));
    curve = geometry::curvature_from_parametric(x, y, c.curve.t0, c.curve.t1, c.samples, c.tol.symmetry);
  }
  const auto delta = detail::profile_function(c.width, curve.length, "width");
  const auto w = SampledFunction::from(curve.length, curve.size(), delta);
  detail::require_finite(w, "width");
  return geometry::make_domain(std::move(curve), geometry::make_width(w, c.tol.symmetry));
}

}  // namespace fermi::cli
