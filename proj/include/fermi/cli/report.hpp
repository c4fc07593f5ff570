#pragma once

// Command dispatch and report output. A report is an ordered list of
// key=value lines plus CSV tables; nothing in it depends on time or host.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fermi/analysis.hpp"
#include "fermi/asymptotics.hpp"
#include "fermi/cli/config.hpp"
#include "fermi/cli/expr.hpp"
#include "fermi/eig1d.hpp"
#include "fermi/eig2d.hpp"
#include "fermi/error.hpp"
#include "fermi/geometry.hpp"

namespace fermi::cli {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"bounds", "certify", "solve1d", "solve2d", "sweep", "figure2"};
  return names;
}

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<CsvTable> tables;

  void add(const std::string& key, const std::string& v) { fields.emplace_back(key, v); }
  void add(const std::string& key, const char* v) { fields.emplace_back(key, v); }
  void add(const std::string& key, double v) { fields.emplace_back(key, format_number(v)); }
  void add(const std::string& key, bool v) { fields.emplace_back(key, v ? "true" : "false"); }
  void add(const std::string& key, int v) { fields.emplace_back(key, std::to_string(v)); }
  void add(const std::string& key, std::size_t v) { fields.emplace_back(key, std::to_string(v)); }

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return &v;
    return nullptr;
  }
};

/// FNV-1a (64 bit) of the validated document without its output section.
inline std::string config_hash(const json& canonical) {
  json doc = canonical;
  if (doc.is_object()) doc.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

inline void add_header(Report& r, const RunConfig& c, const std::string& command) {
  r.add("schema", kSchemaVersion);
  r.add("command", command);
  r.add("config_hash", config_hash(c.canonical));
  r.add("p", c.p);
  r.add("grid.samples", c.samples);
  r.add("grid.mesh_ns", c.mesh.ns);
  r.add("grid.mesh_nt", c.mesh.nt);
  r.add("grid.n1d", c.mesh.n1d);
  r.add("tolerance.concavity", c.tol.concavity);
  r.add("tolerance.symmetry", c.tol.symmetry);
  r.add("tolerance.shooting", c.tol.shooting);
  r.add("tolerance.descent", c.tol.descent);
}

inline void add_domain(Report& r, const geometry::FermiDomain& d, const RunConfig& c) {
  r.add("curve.mode", c.curve.mode == CurveMode::curvature ? "curvature" : "parametric");
  r.add("curve.length", d.length());
  if (c.curve.mode == CurveMode::curvature && c.curve.k.is_expression()) r.add("curve.k", c.curve.k.text);
  if (c.curve.mode == CurveMode::parametric) {
    r.add("curve.x", c.curve.x);
    r.add("curve.y", c.curve.y);
  }
  if (c.width.is_expression()) r.add("width", c.width.text);
  r.add("domain.valid", d.valid);
  r.add("domain.jacobian_min", d.jacobian_min);
  r.add("domain.injective", d.report.injective);
  r.add("domain.symmetric", d.report.symmetric);
  r.add("domain.validation_grid", std::to_string(d.report.grid.ns) + "x" + std::to_string(d.report.grid.nr));
  for (std::size_t i = 0; i < d.report.failures.size(); ++i)
    r.add("domain.failure." + std::to_string(i), one_line(d.report.failures[i]));
}

inline CsvTable profile_table(const geometry::FermiDomain& d) {
  CsvTable t{"profile.csv", {"s", "k", "delta", "delta_prime", "fermi_factor_at_width"}, {}};
  for (std::size_t i = 0; i < d.samples(); ++i) {
    const double k = d.curve.curvature[i], w = d.width.width[i];
    t.rows.push_back({format_number(d.curve.curvature.node(i)), format_number(k), format_number(w),
                      format_number(d.width.slope[i]), format_number(1.0 + w * k)});
  }
  return t;
}

inline void add_bound(Report& r, const analysis::BoundReport& b) {
  const std::string base = "bound." + b.theorem_id;
  r.add(base + ".value", b.value);
  r.add(base + ".applicable", b.applicable);
  r.add(base + ".grid_size", b.grid_size);
  r.add(base + ".tolerance", b.tolerance);
  for (const auto& [name, v] : b.constants) r.add(base + ".constant." + name, v);
  for (const auto& h : b.hypotheses) {
    r.add(base + ".hypothesis." + h.name + ".pass", h.pass);
    r.add(base + ".hypothesis." + h.name + ".residual", h.residual);
  }
}

inline void add_certificate(Report& r, const analysis::Certificate& c, const analysis::Threshold& t) {
  r.add("certificate.p", 2.0);
  r.add("certificate.case", analysis::case_label(c.sign));
  r.add("certificate.threshold", c.threshold);
  r.add("certificate.mu1_upper", c.mu1_upper);
  r.add("certificate.upper_bound_source", c.upper_bound_source);
  r.add("certificate.certified", c.certified);
  r.add("certificate.max_nonnegative_denominator", t.max_nonnegative_denominator);
  r.add("certificate.max_negative_denominator", t.max_negative_denominator);
  r.add("certificate.grid_size", t.grid_size);
}

inline void run_bounds(Report& r, const RunConfig& c, const geometry::FermiDomain& d) {
  const double p = c.p;
  r.add("constant.pi_p", analysis::pi_p(p));
  r.add("constant.L", d.length());
  if (d.jacobian_min > 0.0) {
    r.add("constant.A_p", analysis::a_p(d, p));
    r.add("constant.B_p", analysis::b_p(d, p));
  } else {
    r.add("constant.A_p", "undefined");
    r.add("constant.B_p", "undefined");
  }
  r.add("constant.C_p", analysis::c_p(p));
  add_bound(r, analysis::lower_bound_constant_width(d, p, c.tol.concavity));
  add_bound(r, analysis::lower_bound_variable_width(d, p, c.tol.concavity));
  add_bound(r, analysis::lyapunov_report(d, p));
  if (d.valid) {
    r.add("upper.test_function.value", analysis::test_function_upper_bound(d, p));
    r.add("upper.test_function.label", p == 2.0 ? "rigorous" : "extension");
    r.add("upper.test_function.panels", analysis::kUpperBoundPanels);
  }
  if (p == 2.0 && d.valid) {
    add_bound(r, analysis::full_spectrum_lower_bound_constant_width(d));
    add_bound(r, analysis::full_spectrum_lower_bound_variable_width(d));
  }
  r.tables.push_back(profile_table(d));
}

inline void run_certify(Report& r, const geometry::FermiDomain& d) {
  const auto t = analysis::thm11_threshold(d);
  add_certificate(r, analysis::certify_odd(d), t);
  r.tables.push_back(profile_table(d));
}

inline void run_solve1d(Report& r, const RunConfig& c, const geometry::FermiDomain& d) {
  const auto pr = eig1d::make_problem(d, c.p);
  eig1d::ShootingOptions so;
  so.tol = c.tol.shooting;
  const auto sh = eig1d::solve_shooting(pr, so);
  eig1d::DiscretizedOptions dopt;
  dopt.descent.stall_tol = c.tol.descent;
  const auto ds = eig1d::solve_discretized(pr, c.mesh.n1d, dopt);
  r.add("solve1d.shooting.mu", sh.mu);
  r.add("solve1d.shooting.residual", sh.residual);
  r.add("solve1d.shooting.bisections", sh.iterations);
  r.add("solve1d.shooting.steps", sh.u.size() - 1);
  r.add("solve1d.shooting.converged", sh.converged);
  r.add("solve1d.shooting.sign_changes", eig1d::sign_changes(sh.u.values()));
  r.add("solve1d.shooting.oddness_residual", eig1d::oddness_residual(sh.u.values()));
  r.add("solve1d.discretized.mu", ds.mu);
  r.add("solve1d.discretized.kind", c.p == 2.0 ? "eigenvalue" : "estimate");
  r.add("solve1d.discretized.n", c.mesh.n1d);
  r.add("solve1d.discretized.residual", ds.residual);
  r.add("solve1d.discretized.iterations", ds.iterations);
  r.add("solve1d.discretized.converged", ds.converged);
  if (ds.second_mu) r.add("solve1d.discretized.second_mu", *ds.second_mu);
  r.add("solve1d.relative_difference", std::abs(sh.mu - ds.mu) / ds.mu);
  r.add("solve1d.lyapunov_bound", analysis::lyapunov_bound(d.width.width.values(), d.length(), c.p));
  r.add("solve1d.cosine_quotient", eig1d::cosine_quotient(pr));
  CsvTable t{"eigenfunction.csv", {"s", "u", "du"}, {}};
  for (std::size_t i = 0; i < sh.u.size(); ++i)
    t.rows.push_back({format_number(sh.u.node(i)), format_number(sh.u[i]), format_number(sh.du[i])});
  r.tables.push_back(std::move(t));
}

inline void add_2d(Report& r, const std::string& base, const eig2d::Eigen2DResult& e) {
  r.add(base + ".mu", e.mu);
  r.add(base + ".kind", e.estimate ? "estimate" : "eigenvalue");
  r.add(base + ".dofs", e.dofs);
  r.add(base + ".mesh", std::to_string(e.ns) + "x" + std::to_string(e.nt));
  r.add(base + ".residual", e.residual);
  r.add(base + ".iterations", e.iterations);
  r.add(base + ".converged", e.converged);
}

inline void run_solve2d(Report& r, const RunConfig& c, const geometry::FermiDomain& d) {
  analysis::require_valid(d);
  const auto full_mesh = eig2d::build_mesh(d, c.mesh.ns, c.mesh.nt, eig2d::Extent::full);
  const auto half_mesh = eig2d::build_mesh(d, c.mesh.ns, c.mesh.nt, eig2d::Extent::half);
  eig2d::Eigen2DResult full, odd;
  if (c.p == 2.0) {
    full = eig2d::solve_mu1_linear(full_mesh);
    odd = eig2d::solve_mu1_odd_linear(half_mesh);
  } else {
    fermi::detail::DescentOptions opt;
    opt.stall_tol = c.tol.descent;
    full = eig2d::solve_mu1_nonlinear(full_mesh, c.p, eig2d::Mode::full, opt);
    odd = eig2d::solve_mu1_nonlinear(half_mesh, c.p, eig2d::Mode::odd, opt);
  }
  r.add("solve2d.mesh_mass", full_mesh.total_mass());
  r.add("solve2d.det_min", full_mesh.det_min);
  add_2d(r, "solve2d.full", full);
  add_2d(r, "solve2d.odd", odd);
  r.add("solve2d.odd_minus_full", odd.mu - full.mu);
  CsvTable t{"solve2d_full.csv", {"s", "t", "x", "y", "u"}, {}};
  for (std::size_t i = 0; i < full_mesh.node_count(); ++i)
    t.rows.push_back({format_number(full_mesh.node_s[i]), format_number(full_mesh.node_t[i]),
                      format_number(full_mesh.nodes[i].x()), format_number(full_mesh.nodes[i].y()),
                      format_number(full.u[static_cast<Eigen::Index>(i)])});
  r.tables.push_back(std::move(t));
}

inline void run_sweep(Report& r, const RunConfig& c, const geometry::FermiDomain& d) {
  asymptotics::MeshPolicy policy;
  policy.ns = c.mesh.ns;
  policy.nt = std::max<std::size_t>(c.mesh.nt, 16);
  const auto s = asymptotics::epsilon_sweep(d, c.p, c.epsilons, policy);
  r.add("sweep.policy.ns", policy.ns);
  r.add("sweep.policy.nt", policy.nt);
  r.add("sweep.policy.refine", policy.refine);
  r.add("sweep.mu_star", s.mu_star);
  r.add("sweep.mu_star_method", "shooting");
  if (s.fitted_rate) r.add("sweep.fitted_rate", *s.fitted_rate);
  else r.add("sweep.fitted_rate", "none");
  CsvTable t{"sweep.csv", {"epsilon", "mu", "mu_star", "rel_err"}, {}};
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& pt = s.points[i];
    const std::string base = "sweep.point." + std::to_string(i);
    r.add(base + ".epsilon", pt.epsilon);
    r.add(base + ".ok", pt.ok);
    if (!pt.ok) {
      r.add(base + ".error", one_line(pt.error));
      t.rows.push_back({format_number(pt.epsilon), "", format_number(s.mu_star), ""});
      continue;
    }
    r.add(base + ".mu", pt.mu);
    r.add(base + ".kind", c.p == 2.0 ? "eigenvalue" : "estimate");
    r.add(base + ".mesh", std::to_string(pt.ns) + "x" + std::to_string(pt.nt));
    r.add(base + ".mu_coarse", pt.mu_coarse);
    r.add(base + ".discretization_error", pt.discretization_error);
    r.add(base + ".rel_err", pt.rel_error);
    r.add(base + ".upper_bound", pt.upper_bound);
    r.add(base + ".converged", pt.converged);
    if (pt.certificate) {
      r.add(base + ".threshold", pt.certificate->threshold);
      r.add(base + ".certified", pt.certificate->certified);
    }
    t.rows.push_back({format_number(pt.epsilon), format_number(pt.mu), format_number(s.mu_star),
                      format_number(pt.rel_error)});
  }
  r.tables.push_back(std::move(t));
}

inline void run_figure2(Report& r, const RunConfig& c) {
  const std::size_t n = c.figure2_points;
  std::vector<double> p_grid(n);
  for (std::size_t i = 0; i < n; ++i) p_grid[i] = static_cast<double>(n + 1) / static_cast<double>(i + 1);
  const auto rows = analysis::figure2_data(p_grid);
  CsvTable all{"figure2.csv", {"x", "r", "b", "b_minus_r"}, {}};
  CsvTable rc{"figure2_r.csv", {"x", "r"}, {}};
  CsvTable bc{"figure2_b.csv", {"x", "b"}, {}};
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    min_gap = std::min(min_gap, row.b_minus_r);
    all.rows.push_back({format_number(row.x), format_number(row.r), format_number(row.b), format_number(row.b_minus_r)});
    rc.rows.push_back({format_number(row.x), format_number(row.r)});
    bc.rows.push_back({format_number(row.x), format_number(row.b)});
  }
  r.add("figure2.points", n);
  r.add("figure2.min_b_minus_r", min_gap);
  r.add("figure2.all_positive", min_gap > 0.0);
  r.tables.push_back(std::move(all));
  r.tables.push_back(std::move(rc));
  r.tables.push_back(std::move(bc));
}

}  // namespace detail

inline Report run_command(const RunConfig& c, std::string command = {}) {
  if (command.empty()) command = c.command;
  if (std::find(commands().begin(), commands().end(), command) == commands().end())
    throw Error(ErrorCode::SchemaError, "command: unknown command '" + command + "'");
  Report r;
  detail::add_header(r, c, command);
  if (command == "figure2") {
    detail::run_figure2(r, c);
    return r;
  }
  const auto d = build_domain(c);
  detail::add_domain(r, d, c);
  if (command == "bounds") detail::run_bounds(r, c, d);
  else if (command == "certify") detail::run_certify(r, d);
  else if (command == "solve1d") detail::run_solve1d(r, c, d);
  else if (command == "solve2d") detail::run_solve2d(r, c, d);
  else detail::run_sweep(r, c, d);
  return r;
}

inline std::string render_report(const Report& r) {
  std::string out;
  for (const auto& [k, v] : r.fields) out += k + "=" + v + "\n";
  return out;
}

inline std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
  std::string q = "\"";
  for (char c : v) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string render_csv(const CsvTable& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
    out += "\n";
  };
  line(t.header);
  for (const auto& row : t.rows) line(row);
  return out;
}

/// Writes the report and every table into `dir`; returns the paths written.
inline std::vector<std::string> emit_report(const Report& r, const std::string& dir,
                                            const std::string& report_name = "report.txt") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& body) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << body;
    out.close();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
    written.push_back(path.string());
  };
  write(report_name, render_report(r));
  for (const auto& t : r.tables) write(t.file, render_csv(t));
  return written;
}

/// Command-line overrides are written into the document before validation,
/// so they are part of the config hash.
inline void apply_overrides(json& doc, std::optional<std::size_t> ns, std::optional<std::size_t> nt,
                            std::optional<double> p, std::optional<std::string> out) {
  if (!doc.is_object()) return;
  if (ns || nt) {
    if (!doc.contains("mesh") || !doc["mesh"].is_object()) doc["mesh"] = json::object();
    if (ns) doc["mesh"]["ns"] = *ns;
    if (nt) doc["mesh"]["nt"] = *nt;
  }
  if (p) doc["p"] = *p;
  if (out) {
    if (!doc.contains("output") || !doc["output"].is_object()) doc["output"] = json::object();
    doc["output"]["dir"] = *out;
  }
}

}  // namespace fermi::cli
