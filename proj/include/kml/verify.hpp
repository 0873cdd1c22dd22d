#pragma once

// Re-checks a stored output directory: manifest hashes, then the invariants
// of the recorded run recomputed from the stored fields and series.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "kml/artifacts.hpp"
#include "kml/bst_extension.hpp"
#include "kml/field_io.hpp"
#include "kml/hm_geon.hpp"
#include "kml/kottler_geometry.hpp"
#include "kml/mass.hpp"
#include "kml/pipeline.hpp"
#include "kml/radial_harmonic.hpp"

namespace kml {

struct VerifyResult {
  std::vector<std::string> passed;
  std::vector<std::string> failed;

  void check(bool ok, const std::string& what) { (ok ? passed : failed).push_back(what); }
  bool ok() const { return failed.empty(); }
};

namespace detail {

inline json parse_json_file(const std::filesystem::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

/// Numeric table with a header row; empty cells become NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv_table(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("cannot open " + p.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(p.string() + ": empty");
  t.header = split_csv_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) throw FormatError(p.string() + ":" + std::to_string(row) + ": wrong column count");
    std::vector<double> r;
    for (const auto& c : cells)
      r.push_back(c.empty() ? std::nan("") : parse_double(c, p.string() + ":" + std::to_string(row)));
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline bool close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= abs + rel * std::max(std::abs(a), std::abs(b));
}

inline void verify_run(const std::filesystem::path& dir, const json& report, VerifyResult& out) {
  const CheckTolerances tol;
  const PipelineConfig cfg = PipelineConfig::from_json(report.at("config"), dir);
  const Grid grid = cfg.grid();
  const PeriodicField v0 = read_field_csv(dir / "fields/v0.csv", grid);
  const PeriodicField H_phys = read_field_csv(dir / "fields/H_phys.csv", grid);
  const PeriodicField w0 = read_field_csv(dir / "fields/w0.csv", grid);
  const PeriodicField w_inf = read_field_csv(dir / "fields/w_inf.csv", grid);

  const SurfaceGeometry geom = surface_geometry({v0});
  const double gauss = geom.gauss_residual().max_abs();
  out.check(gauss <= tol.gauss, "gauss identity residual " + format_double(gauss));
  out.check(admissibility_check(geom).admissible, "boundary data admissible");
  out.check(sup_distance(geom.H, read_field_csv(dir / "fields/H0.csv", grid)) <= 1e-12, "stored H0 reproduced");

  const json& mass = report.at("mass");
  const double m_total = total_mass_from_w_infinity(w_inf);
  out.check(close(m_total, mass.at("m_total").get<double>(), 1e-12, 1e-14), "total mass reproduced from w_inf");
  try {
    const InequalityReport ineq = shi_tam_inequality_report(geom, H_phys, w0, m_total);
    out.check(ineq.gap >= -tol.gap, "inequality gap " + format_double(ineq.gap));
    out.check(close(ineq.gap, mass.at("gap").get<double>(), 1e-10, 1e-12), "stored gap reproduced");
  } catch (const Error& e) {
    out.check(false, std::string("inequality report: ") + e.what());
  }

  const CsvTable series = read_csv_table(dir / "series.csv");
  const std::size_t cm = series.column("m"), clo = series.column("barrier_lower"), chi = series.column("barrier_upper");
  const std::size_t cwl = series.column("w_min"), cwh = series.column("w_max");
  out.check(!series.rows.empty(), "series present");
  if (series.rows.empty()) return;
  double viol = 0.0, barrier = 0.0;
  for (std::size_t k = 0; k < series.rows.size(); ++k) {
    const auto& r = series.rows[k];
    if (k > 0) viol = std::max(viol, r[cm] - series.rows[k - 1][cm]);
    barrier = std::max({barrier, r[clo] - r[cwl], r[cwh] - r[chi]});
  }
  const double m0 = series.rows.front()[cm];
  out.check(viol <= tol.monotonicity * (1.0 + std::abs(m0)), "series monotone (max increase " + format_double(viol) + ")");
  out.check(barrier <= tol.barrier, "barriers bracket w (max excess " + format_double(barrier) + ")");
  const double m_err = mass.at("m_total_error").get<double>();
  out.check(std::abs(series.rows.back()[cm] - m_total) <= tol.convergence_factor * m_err + tol.convergence_floor,
            "series converges to the total mass");

  const json& window = report.at("extension").at("window_times");
  if (!window.is_null()) {
    std::vector<double> times = window.get<std::vector<double>>();
    std::vector<PeriodicField> u, z;
    for (std::size_t k = 0; k < times.size(); ++k) {
      u.push_back(read_field_csv(dir / window_name("u", k), grid));
      z.push_back(read_field_csv(dir / window_name("z", k), grid));
    }
    const double R = scalar_curvature_residual(assemble_g_plus(times, u, z)).max_residual;
    out.check(R <= tol.curvature, "scalar curvature residual " + format_double(R));
  }
}

inline void verify_geon(const std::filesystem::path& dir, const json& report, VerifyResult& out) {
  const json& c = report.at("config");
  GeonConfig cfg;
  cfg.r_h = c.at("r_h").get<double>();
  cfg.r_0 = c.at("r_0").get<double>();
  cfg.P_xi = c.at("P_xi").get<double>();
  cfg.P_theta = c.at("P_theta").get<double>();
  const GeonMass m = geon_static_mass(cfg);
  const GeonBoundary b = geon_boundary_geometry(cfg);
  const CounterexampleReport cr = counterexample_report(cfg);
  out.check(close(m.m_exact, report.at("mass").at("m_exact").get<double>(), 1e-14), "geon mass reproduced");
  out.check(close(b.H_outer, report.at("boundary").at("H_outer").get<double>(), 1e-14), "outer mean curvature reproduced");
  out.check(b.H_outer > 2.0, "outer mean curvature exceeds 2");
  out.check(report.at("mass_negative").get<bool>() == cr.mass_negative &&
                report.at("trapping_violated").get<bool>() == cr.trapping_violated &&
                report.at("homotopy_case").get<bool>() == cr.homotopy_case,
            "counterexample flags reproduced");
  // The same mass through the generic static functional on a Kottler level set.
  const Grid grid(8, 8, geon_reference_torus(cfg));
  const double by = static_brown_york(surface_geometry({PeriodicField(grid, std::log(cfg.r_0))}),
                                      PeriodicField(grid, geon_mean_curvature(cfg.r_0)));
  out.check(std::abs(by - m.m_exact) <= 1e-10, "static Brown-York quadrature matches the closed form");

  if (!report.at("sweep").is_null()) {
    const CsvTable t = read_csv_table(dir / "sweep.csv");
    const std::size_t cr0 = t.column("r_0"), ch = t.column("H_outer"), cm = t.column("m_exact"), crem = t.column("remainder");
    bool ok = !t.rows.empty(), above = true;
    std::vector<double> radii;
    for (const auto& r : t.rows) {
      GeonConfig ci = cfg;
      ci.r_0 = r[cr0];
      const GeonMass mi = geon_static_mass(ci);
      ok = ok && close(mi.m_exact, r[cm], 1e-14) && close(mi.remainder, r[crem], 1e-12);
      above = above && r[ch] > 2.0;
      radii.push_back(r[cr0]);
    }
    out.check(ok, "sweep rows reproduced");
    out.check(above, "outer mean curvature exceeds 2 on the sweep");
    if (radii.size() >= 2) {
      const double slope = geon_sweep(cfg, radii).slope;
      out.check(close(slope, report.at("sweep").at("slope").get<double>(), 1e-12), "sweep slope reproduced");
    }
  }
}

inline void verify_radial(const std::filesystem::path& dir, const json& report, VerifyResult& out) {
  const RadialConfig cfg = RadialConfig::from_json(report.at("config"));
  const RadialSolution sol = solve_radial(cfg.make_warp(), cfg.s0, cfg.s1, cfg.intervals, cfg.bc);
  const CsvTable t = read_csv_table(dir / "radial.csv");
  const std::size_t cs = t.column("s"), cu = t.column("u"), cd = t.column("du"), ci = t.column("integrand");
  bool ok = t.rows.size() == sol.s.size(), nonneg = true;
  const auto integrand = mass_integrand_diagnostic(sol);
  for (std::size_t k = 0; ok && k < sol.s.size(); ++k) {
    const auto& r = t.rows[k];
    ok = close(r[cs], sol.s[k], 1e-14, 1e-14) && close(r[cu], sol.u[k], 1e-12) && close(r[cd], sol.du[k], 1e-12) &&
         close(r[ci], integrand[k], 1e-10, 1e-14);
    nonneg = nonneg && r[ci] >= 0.0;
  }
  out.check(ok, "radial solution reproduced");
  out.check(nonneg, "mass integrand nonnegative");
  out.check(close(penrose_constant(sol), report.at("penrose_constant").get<double>(), 1e-12), "Penrose constant reproduced");
}

}  // namespace detail

/// Throws UsageError when the directory or its manifest is missing.
inline VerifyResult verify_artifacts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("verify: not a directory: " + dir.string());
  if (!std::filesystem::exists(dir / "manifest.json")) throw UsageError("verify: missing manifest.json in " + dir.string());
  VerifyResult out;
  const json manifest = detail::parse_json_file(dir / "manifest.json");
  bool hashes = true;
  for (const auto& f : manifest.at("files")) {
    const std::string path = f.at("path").get<std::string>();
    if (!std::filesystem::exists(dir / path)) {
      out.check(false, "listed file exists: " + path);
      hashes = false;
      continue;
    }
    const std::string content = read_text(dir / path);
    const bool same = hex64(fnv1a64(content)) == f.at("fnv1a64").get<std::string>() &&
                      content.size() == f.at("bytes").get<std::size_t>();
    if (!same) out.check(false, "hash matches: " + path);
    hashes = hashes && same;
  }
  out.check(hashes, "manifest hashes");
  if (!out.ok()) return out;

  const json report = detail::parse_json_file(dir / "report.json");
  if (report.value("schema_version", -1) != kSchemaVersion) {
    out.check(false, "report schema_version " + std::to_string(kSchemaVersion));
    return out;
  }
  try {
    const std::string kind = report.at("kind").get<std::string>();
    if (kind == "run")
      detail::verify_run(dir, report, out);
    else if (kind == "geon")
      detail::verify_geon(dir, report, out);
    else if (kind == "radial")
      detail::verify_radial(dir, report, out);
    else
      out.check(false, "known report kind: " + kind);
  } catch (const json::exception& e) {
    out.check(false, std::string("report structure: ") + e.what());
  } catch (const UsageError& e) {
    out.check(false, std::string("stored data: ") + e.what());
  }
  return out;
}

}  // namespace kml
