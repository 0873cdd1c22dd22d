#pragma once

// End-to-end run: admissibility of the boundary data, unit normal flow,
// lapse extension with w0 = H0 / H_phys, masses and the inequality report.

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kml/bst_extension.hpp"
#include "kml/error.hpp"
#include "kml/field_io.hpp"
#include "kml/kottler_geometry.hpp"
#include "kml/mass.hpp"
#include "kml/normal_flow.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError("config: " + where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw UsageError("config: unknown key \"" + key + "\" in " + where);
}

template <class T>
T get_or(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config: ") + where + "." + key + " has the wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw UsageError(std::string("config: missing ") + where + "." + key);
  return get_or<T>(j, key, where, T{});
}

}  // namespace detail

/// constant + sum of a cos(k.theta) + b sin(k.theta), or samples read from a
/// field CSV.
struct FieldSpec {
  struct Mode {
    int k1 = 0, k2 = 0;
    double cos = 0.0, sin = 0.0;
  };
  double constant = 0.0;
  std::vector<Mode> modes;
  std::optional<std::filesystem::path> file;

  static FieldSpec from_json(const json& j, const std::string& where, const std::filesystem::path& base) {
    FieldSpec f;
    if (j.is_number()) {
      f.constant = j.get<double>();
      return f;
    }
    detail::reject_unknown_keys(j, where, {"constant", "modes", "file"});
    if (j.contains("file")) {
      if (j.contains("constant") || j.contains("modes"))
        throw UsageError("config: " + where + " mixes \"file\" with coefficients");
      std::filesystem::path p = detail::require<std::string>(j, "file", where);
      f.file = p.is_absolute() ? p : base / p;
      if (!std::filesystem::exists(*f.file)) throw UsageError("config: " + where + ".file not found: " + f.file->string());
      return f;
    }
    f.constant = detail::get_or<double>(j, "constant", where, 0.0);
    if (j.contains("modes")) {
      if (!j.at("modes").is_array()) throw UsageError("config: " + where + ".modes must be an array");
      int idx = 0;
      for (const auto& m : j.at("modes")) {
        const std::string w = where + ".modes[" + std::to_string(idx++) + "]";
        detail::reject_unknown_keys(m, w, {"k", "cos", "sin"});
        const auto k = detail::require<std::vector<int>>(m, "k", w);
        if (k.size() != 2) throw UsageError("config: " + w + ".k must have two entries");
        f.modes.push_back({k[0], k[1], detail::get_or<double>(m, "cos", w, 0.0), detail::get_or<double>(m, "sin", w, 0.0)});
      }
    }
    return f;
  }

  json to_json() const {
    if (file) return {{"file", file->string()}};
    json arr = json::array();
    for (const auto& m : modes) arr.push_back({{"k", {m.k1, m.k2}}, {"cos", m.cos}, {"sin", m.sin}});
    return {{"constant", constant}, {"modes", arr}};
  }

  /// Samples on the grid. Modes must lie strictly below the Nyquist index.
  PeriodicField sample(const Grid& grid, const std::string& where) const {
    if (file) return read_field_csv(*file, grid);
    for (const auto& m : modes)
      if (2 * std::abs(m.k1) >= grid.n1() || 2 * std::abs(m.k2) >= grid.n2())
        throw UsageError("config: " + where + " mode (" + std::to_string(m.k1) + "," + std::to_string(m.k2) +
                         ") is not below the grid Nyquist frequency");
    return PeriodicField::sample(grid, [this](double x, double y) {
      double s = constant;
      for (const auto& m : modes) {
        const double a = m.k1 * x + m.k2 * y;
        s += m.cos * std::cos(a) + m.sin * std::sin(a);
      }
      return s;
    });
  }
};

struct PipelineConfig {
  enum class HPhysKind { Reference, Field, ScaleH0 };

  FlatTorus torus;
  int n1 = 32, n2 = 32;
  FieldSpec v;
  HPhysKind h_kind = HPhysKind::Reference;
  FieldSpec H_phys;
  double H_scale = 1.0;  // H_phys = H_scale * H0
  FlowParams flow;
  ExtensionParams extension;

  Grid grid() const { return Grid(n1, n2, torus); }

  static PipelineConfig from_json(const json& j, const std::filesystem::path& base = ".") {
    using detail::get_or;
    using detail::require;
    detail::reject_unknown_keys(j, "config", {"torus", "grid", "v", "H_phys", "flow", "extension"});
    PipelineConfig c;
    if (j.contains("torus")) {
      const json& t = j.at("torus");
      detail::reject_unknown_keys(t, "torus", {"sigma", "periods"});
      try {
        if (t.contains("sigma") == t.contains("periods"))
          throw UsageError("config: torus needs exactly one of \"sigma\" or \"periods\"");
        if (t.contains("sigma")) {
          const auto s = require<std::vector<double>>(t, "sigma", "torus");
          if (s.size() != 3) throw UsageError("config: torus.sigma must be [s11, s12, s22]");
          c.torus = FlatTorus(s[0], s[1], s[2]);
        } else {
          const auto p = require<std::vector<double>>(t, "periods", "torus");
          if (p.size() != 2) throw UsageError("config: torus.periods must be [p1, p2]");
          c.torus = FlatTorus::from_periods(p[0], p[1]);
        }
      } catch (const UsageError&) {
        throw;
      } catch (const Error& e) {
        throw UsageError(std::string("config: torus: ") + e.what());
      }
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      detail::reject_unknown_keys(g, "grid", {"n", "n1", "n2"});
      const int n = get_or<int>(g, "n", "grid", 32);
      c.n1 = get_or<int>(g, "n1", "grid", n);
      c.n2 = get_or<int>(g, "n2", "grid", n);
      if (c.n1 < 4 || c.n2 < 4 || c.n1 % 2 || c.n2 % 2) throw UsageError("config: grid sizes must be even and at least 4");
    }
    if (!j.contains("v")) throw UsageError("config: missing v");
    c.v = FieldSpec::from_json(j.at("v"), "v", base);
    if (j.contains("H_phys")) {
      const json& h = j.at("H_phys");
      if (h.is_string()) {
        if (h.get<std::string>() != "reference") throw UsageError("config: H_phys string must be \"reference\"");
        c.h_kind = HPhysKind::Reference;
      } else if (h.is_object() && h.contains("scale_H0")) {
        detail::reject_unknown_keys(h, "H_phys", {"scale_H0"});
        c.h_kind = HPhysKind::ScaleH0;
        c.H_scale = require<double>(h, "scale_H0", "H_phys");
      } else {
        c.h_kind = HPhysKind::Field;
        c.H_phys = FieldSpec::from_json(h, "H_phys", base);
      }
    }
    if (j.contains("flow")) {
      const json& f = j.at("flow");
      detail::reject_unknown_keys(f, "flow", {"t_max", "dt", "snapshot_stride"});
      c.flow.t_max = get_or<double>(f, "t_max", "flow", c.flow.t_max);
      c.flow.dt = get_or<double>(f, "dt", "flow", c.flow.dt);
      c.flow.snapshot_stride = get_or<int>(f, "snapshot_stride", "flow", c.flow.snapshot_stride);
    }
    c.extension.dt = c.flow.dt;
    c.extension.snapshot_stride = c.flow.snapshot_stride;
    if (j.contains("extension")) {
      const json& e = j.at("extension");
      detail::reject_unknown_keys(e, "extension", {"dt", "snapshot_stride", "stability_factor", "barrier_slack", "window"});
      c.extension.dt = get_or<double>(e, "dt", "extension", c.extension.dt);
      c.extension.snapshot_stride = get_or<int>(e, "snapshot_stride", "extension", c.extension.snapshot_stride);
      c.extension.stability_factor = get_or<double>(e, "stability_factor", "extension", c.extension.stability_factor);
      c.extension.barrier_slack = get_or<double>(e, "barrier_slack", "extension", c.extension.barrier_slack);
      if (e.contains("window")) {
        const json& w = e.at("window");
        detail::reject_unknown_keys(w, "extension.window", {"start", "spacing", "slices"});
        SliceWindow win;
        win.start = get_or<double>(w, "start", "extension.window", win.start);
        win.spacing = get_or<double>(w, "spacing", "extension.window", win.spacing);
        win.slices = get_or<int>(w, "slices", "extension.window", win.slices);
        c.extension.window = win;
      }
    }
    c.flow.validate();
    if (c.flow.t_max < 6.0) throw UsageError("config: flow.t_max must be at least 6 for the limit extraction");
    if (!(c.extension.stability_factor > 0.0 && c.extension.stability_factor <= 1.0))
      throw UsageError("config: extension.stability_factor must lie in (0, 1]");
    if (!(c.extension.barrier_slack >= 0.0)) throw UsageError("config: extension.barrier_slack must be nonnegative");
    return c;
  }

  static PipelineConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("config: " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
  }

  /// Canonical form with every default filled in.
  json to_json() const {
    json j;
    j["torus"] = {{"sigma", {torus.s11(), torus.s12(), torus.s22()}}};
    j["grid"] = {{"n1", n1}, {"n2", n2}};
    j["v"] = v.to_json();
    switch (h_kind) {
      case HPhysKind::Reference: j["H_phys"] = "reference"; break;
      case HPhysKind::ScaleH0: j["H_phys"] = {{"scale_H0", H_scale}}; break;
      case HPhysKind::Field: j["H_phys"] = H_phys.to_json(); break;
    }
    j["flow"] = {{"t_max", flow.t_max}, {"dt", flow.dt}, {"snapshot_stride", flow.snapshot_stride}};
    json e = {{"dt", extension.dt},
              {"snapshot_stride", extension.snapshot_stride},
              {"stability_factor", extension.stability_factor},
              {"barrier_slack", extension.barrier_slack}};
    if (extension.window)
      e["window"] = {{"start", extension.window->start}, {"spacing", extension.window->spacing},
                     {"slices", extension.window->slices}};
    j["extension"] = e;
    return j;
  }
};

/// Tolerances of the run checks.
struct CheckTolerances {
  double monotonicity = 1e-8;   // relative to 1 + |m(0)|
  double gap = 1e-6;
  double barrier = 1e-8;
  double convergence_factor = 5.0;  // times the w_inf estimate
  double convergence_floor = 1e-10;
  double gauss = 1e-6;
  double curvature = 1e-2;
};

struct MassReport {
  double m_by_static = 0.0;       // (1/8 pi) int V (H0 - H_phys) dA
  double m_total = 0.0;           // (1/4 pi) int w_inf dA_sigma
  double m_total_error = 0.0;     // w_inf extrapolation estimate in mass units
  double m_series_final = 0.0;
  double gap = 0.0;
  double monotonicity_violation = 0.0;
  double sigma_area = 0.0;
};

struct RunChecks {
  bool monotonicity = false;
  bool gap = false;
  bool barriers = false;
  bool convergence = false;
  bool gauss = false;
  std::optional<bool> curvature;

  bool all() const { return monotonicity && gap && barriers && convergence && gauss && curvature.value_or(true); }
};

struct PipelineResult {
  PipelineConfig config;
  SurfaceGeometry geom;
  AdmissibilityReport admissibility;
  double gauss_residual = 0.0;
  PeriodicField H_phys, w0;
  FlowTrajectory flow;
  ExtensionTrajectory ext;
  FLimit f;
  DecayReport decay;
  WInfinity w_inf;
  std::vector<SeriesPoint> series;
  std::optional<CurvatureResidual> curvature;
  MassReport mass;
  RunChecks checks;
};

inline RunChecks evaluate_checks(const MassReport& m, double barrier_violation, double gauss, std::optional<double> curvature,
                                 const CheckTolerances& tol = {}) {
  RunChecks c;
  c.monotonicity = m.monotonicity_violation <= tol.monotonicity * (1.0 + std::abs(m.m_by_static));
  c.gap = m.gap >= -tol.gap;
  c.barriers = barrier_violation <= tol.barrier;
  c.convergence = std::abs(m.m_series_final - m.m_total) <= tol.convergence_factor * m.m_total_error + tol.convergence_floor;
  c.gauss = gauss <= tol.gauss;
  if (curvature) c.curvature = *curvature <= tol.curvature;
  return c;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const Grid grid = cfg.grid();
  GraphSurface surface{cfg.v.sample(grid, "v")};
  SurfaceGeometry geom = surface_geometry(surface);
  AdmissibilityReport adm = admissibility_check(geom);
  if (!adm.admissible) throw HypothesisError(adm.violation);

  PeriodicField H_phys = geom.H;
  switch (cfg.h_kind) {
    case PipelineConfig::HPhysKind::Reference: break;
    case PipelineConfig::HPhysKind::ScaleH0: H_phys *= cfg.H_scale; break;
    case PipelineConfig::HPhysKind::Field: H_phys = cfg.H_phys.sample(grid, "H_phys"); break;
  }
  for (int i = 0; i < grid.n1(); ++i)
    for (int j = 0; j < grid.n2(); ++j)
      if (!(H_phys(i, j) > 0.0))
        throw HypothesisError("H_phys > 0 fails at grid point (" + std::to_string(i) + "," + std::to_string(j) + ")");
  PeriodicField w0 = geom.H;
  for (std::size_t k = 0; k < w0.size(); ++k) w0[k] = geom.H[k] / H_phys[k];
  const double gauss = geom.gauss_residual().max_abs();

  FlowTrajectory flow = run_flow(surface, cfg.flow);
  ExtensionTrajectory ext = solve_w(flow, w0, cfg.extension);
  FLimit f = extract_f(flow);
  DecayReport decay = decay_report(flow);
  WInfinity wi = extract_w_infinity(ext);
  std::vector<SeriesPoint> series = quasilocal_series(ext);
  std::optional<CurvatureResidual> curv;
  if (cfg.extension.window) curv = scalar_curvature_residual(assemble_g_plus(ext));

  MassReport m;
  m.sigma_area = kTwoPi * kTwoPi * std::sqrt(grid.torus().det());
  m.m_total = total_mass_from_w_infinity(wi);
  m.m_total_error = wi.error_estimate * m.sigma_area / (4.0 * kPi);
  const InequalityReport ineq = shi_tam_inequality_report(geom, H_phys, w0, m.m_total);
  m.m_by_static = ineq.lhs;
  m.gap = ineq.gap;
  m.m_series_final = series.back().m;
  m.monotonicity_violation = monotonicity_violation(series);

  const RunChecks checks = evaluate_checks(m, ext.max_barrier_violation, gauss,
                                           curv ? std::optional<double>(curv->max_residual) : std::nullopt);
  return {cfg,          std::move(geom), std::move(adm),    gauss, std::move(H_phys), std::move(w0),
          std::move(flow), std::move(ext), std::move(f),   decay, std::move(wi),     std::move(series),
          std::move(curv), m,            checks};
}

}  // namespace kml
