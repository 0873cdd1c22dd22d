#pragma once

// Reports and artifact sets for the run, geon and radial commands, and the
// manifest written next to them.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kml/field_io.hpp"
#include "kml/hm_geon.hpp"
#include "kml/pipeline.hpp"
#include "kml/radial_harmonic.hpp"

#ifndef KML_VERSION
#define KML_VERSION "0.0.0"
#endif

namespace kml {

inline constexpr int kSchemaVersion = 1;

/// Relative path and content of every file of one command's output.
struct ArtifactSet {
  std::vector<std::pair<std::string, std::string>> files;

  void add(std::string path, std::string content) { files.emplace_back(std::move(path), std::move(content)); }
  const std::string* find(const std::string& path) const {
    for (const auto& [p, c] : files)
      if (p == path) return &c;
    return nullptr;
  }
};

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

namespace detail {

inline json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }
inline json optional_string(const std::optional<std::string>& x) { return x ? json(*x) : json(nullptr); }

inline std::string window_name(const char* what, std::size_t k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "window/%s_%02zu.csv", what, k);
  return buf;
}

}  // namespace detail

/// Topological hypotheses that cannot be checked from boundary data.
inline json user_obligations() {
  return json::array({"the homotopy condition on the fill-in",
                      "vanishing of the second homology relative to the boundary",
                      "H <= 2 on the inner boundary with respect to the inner normal"});
}

inline json run_report(const PipelineResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "run";
  j["tool_version"] = KML_VERSION;
  j["config"] = r.config.to_json();
  j["user_obligations"] = user_obligations();
  j["admissibility"] = {{"K_min", r.admissibility.K_min},
                        {"H_min", r.admissibility.H_min},
                        {"min_principal_curvature", r.admissibility.min_principal_curvature},
                        {"admissible", r.admissibility.admissible}};
  j["gauss_residual"] = r.gauss_residual;
  const FlowDiagnostics& last = r.flow.diagnostics.back();
  j["flow"] = {{"t_max", r.flow.times.back()},
               {"f_error_estimate", r.f.error_estimate},
               {"f_richardson_error", r.f.richardson_error},
               {"f_warning", detail::optional_string(r.f.warning)},
               {"rho_decay_slope", detail::optional_number(r.decay.rho.slope)},
               {"umbilic_decay_slope", detail::optional_number(r.decay.umbilic.slope)},
               {"final_rho2_minus_1", last.rho2_minus_1},
               {"final_umbilic", last.umbilic}};
  json window = nullptr;
  if (!r.ext.window_times.empty()) window = r.ext.window_times;
  j["extension"] = {{"c0", r.ext.c0},
                    {"max_barrier_violation", r.ext.max_barrier_violation},
                    {"max_substeps", r.ext.max_substeps},
                    {"w_inf_error_estimate", r.w_inf.error_estimate},
                    {"w_inf_warning", detail::optional_string(r.w_inf.warning)},
                    {"window_times", window},
                    {"curvature_residual", r.curvature ? json(r.curvature->max_residual) : json(nullptr)}};
  j["mass"] = {{"m_by_static", r.mass.m_by_static},
               {"m_total", r.mass.m_total},
               {"m_total_error", r.mass.m_total_error},
               {"m_series_final", r.mass.m_series_final},
               {"gap", r.mass.gap},
               {"monotonicity_violation", r.mass.monotonicity_violation},
               {"sigma_area", r.mass.sigma_area}};
  j["checks"] = {{"monotonicity", r.checks.monotonicity},
                 {"gap", r.checks.gap},
                 {"barriers", r.checks.barriers},
                 {"convergence", r.checks.convergence},
                 {"gauss", r.checks.gauss},
                 {"curvature", r.checks.curvature ? json(*r.checks.curvature) : json(nullptr)},
                 {"all", r.checks.all()}};
  return j;
}

/// Series columns: t, m, w_min, w_max, barrier_lower, barrier_upper.
inline std::string series_csv(const PipelineResult& r) {
  std::string out = "t,m,w_min,w_max,barrier_lower,barrier_upper\n";
  for (std::size_t k = 0; k < r.series.size(); ++k)
    out += format_double(r.series[k].t) + "," + format_double(r.series[k].m) + "," +
           format_double(r.ext.w_snapshots[k].min()) + "," + format_double(r.ext.w_snapshots[k].max()) + "," +
           format_double(r.ext.barriers[k][0]) + "," + format_double(r.ext.barriers[k][1]) + "\n";
  return out;
}

/// Flow diagnostics per snapshot with the fitted slopes repeated on every
/// row (empty when the diagnostic sits at the round-off floor).
inline std::string decay_csv(const PipelineResult& r) {
  auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
  std::string out = "t,rho2_minus_1,umbilic,rho_slope,rho_intercept,umbilic_slope,umbilic_intercept\n";
  for (std::size_t k = 0; k < r.flow.size(); ++k)
    out += format_double(r.flow.times[k]) + "," + format_double(r.flow.diagnostics[k].rho2_minus_1) + "," +
           format_double(r.flow.diagnostics[k].umbilic) + "," + opt(r.decay.rho.slope) + "," +
           (r.decay.rho.slope ? format_double(r.decay.rho.intercept) : "") + "," + opt(r.decay.umbilic.slope) + "," +
           (r.decay.umbilic.slope ? format_double(r.decay.umbilic.intercept) : "") + "\n";
  return out;
}

inline ArtifactSet run_artifacts(const PipelineResult& r) {
  ArtifactSet a;
  a.add("report.json", dump_json(run_report(r)));
  a.add("series.csv", series_csv(r));
  a.add("decay.csv", decay_csv(r));
  a.add("fields/v0.csv", field_csv(r.flow.initial.v));
  a.add("fields/H0.csv", field_csv(r.geom.H));
  a.add("fields/H_phys.csv", field_csv(r.H_phys));
  a.add("fields/w0.csv", field_csv(r.w0));
  a.add("fields/f.csv", field_csv(r.f.f));
  a.add("fields/w_inf.csv", field_csv(r.w_inf.w_inf));
  for (std::size_t k = 0; k < r.ext.window_times.size(); ++k) {
    a.add(detail::window_name("u", k), field_csv(r.ext.window_u[k]));
    a.add(detail::window_name("z", k), field_csv(r.ext.window_z[k]));
  }
  return a;
}

inline json geon_config_json(const GeonConfig& c) {
  return {{"r_h", c.r_h}, {"r_0", c.r_0}, {"P_xi", c.P_xi}, {"P_theta", c.P_theta}};
}

inline json geon_report(const GeonConfig& cfg, const std::optional<GeonSweep>& sweep = std::nullopt) {
  const GeonBoundary b = geon_boundary_geometry(cfg);
  const GeonMass m = geon_static_mass(cfg);
  const CounterexampleReport c = counterexample_report(cfg);
  auto opt = [](const std::optional<double>& x) { return detail::optional_number(x); };
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "geon";
  j["tool_version"] = KML_VERSION;
  j["config"] = geon_config_json(cfg);
  j["smooth_closure"] = cfg.smooth_closure();
  j["boundary"] = {{"V_outer", b.V_outer},
                   {"H_outer", b.H_outer},
                   {"area_outer", b.area_outer},
                   {"H_inner_increasing_r", opt(b.H_inner_increasing_r)},
                   {"H_inner_decreasing_r", opt(b.H_inner_decreasing_r)},
                   {"area_inner", opt(b.area_inner)},
                   {"inner_degenerate", b.inner_degenerate}};
  j["mass"] = {{"m_exact", m.m_exact}, {"m_leading", m.m_leading}, {"remainder", m.remainder}};
  j["mass_negative"] = c.mass_negative;
  j["trapping_violated"] = c.trapping_violated;
  j["homotopy_case"] = c.homotopy_case;
  j["sweep"] = sweep ? json{{"slope", sweep->slope}, {"rows", sweep->rows.size()}} : json(nullptr);
  return j;
}

inline std::string geon_sweep_csv(const GeonSweep& s) {
  std::string out = "r_0,H_outer,m_exact,remainder,slope\n";
  for (const auto& r : s.rows)
    out += format_double(r.r_0) + "," + format_double(r.H_outer) + "," + format_double(r.m_exact) + "," +
           format_double(r.remainder) + "," + format_double(s.slope) + "\n";
  return out;
}

/// Radii 10^a for a log-uniform from lo to hi, inclusive.
inline std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> r;
  for (int k = 0; k < count; ++k)
    r.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * k / (count - 1)));
  return r;
}

inline ArtifactSet geon_artifacts(const GeonConfig& cfg, const std::optional<GeonSweep>& sweep) {
  ArtifactSet a;
  a.add("report.json", dump_json(geon_report(cfg, sweep)));
  if (sweep) a.add("sweep.csv", geon_sweep_csv(*sweep));
  return a;
}

struct RadialConfig {
  std::string warp = "kottler";  // kottler | linear | perturbed
  double eps = 0.1;              // perturbed warp amplitude
  double s0 = 0.0, s1 = 6.0;
  int intervals = 600;
  RadialBoundaryData bc{1.0, std::exp(6.0)};

  Warp make_warp() const {
    if (warp == "kottler") return Warp::kottler();
    if (warp == "linear") return Warp::linear();
    if (warp == "perturbed") return Warp::perturbed(eps);
    throw UsageError("radial: unknown warp \"" + warp + "\" (kottler, linear, perturbed)");
  }

  json to_json() const {
    return {{"warp", warp}, {"eps", eps}, {"s0", s0}, {"s1", s1}, {"intervals", intervals},
            {"u0", bc.u0},  {"slope1", bc.slope1}};
  }

  static RadialConfig from_json(const json& j) {
    detail::reject_unknown_keys(j, "radial config", {"warp", "eps", "s0", "s1", "intervals", "u0", "slope1"});
    RadialConfig c;
    c.warp = detail::require<std::string>(j, "warp", "radial");
    c.eps = detail::require<double>(j, "eps", "radial");
    c.s0 = detail::require<double>(j, "s0", "radial");
    c.s1 = detail::require<double>(j, "s1", "radial");
    c.intervals = detail::require<int>(j, "intervals", "radial");
    c.bc.u0 = detail::require<double>(j, "u0", "radial");
    c.bc.slope1 = detail::require<double>(j, "slope1", "radial");
    return c;
  }
};

inline json radial_report(const RadialConfig& cfg, const RadialSolution& sol) {
  const auto integrand = mass_integrand_diagnostic(sol);
  double imax = 0.0;
  for (double x : integrand) imax = std::max(imax, std::abs(x));
  bool linear = true;
  for (double d : sol.du) linear = linear && std::abs(d - sol.du.front()) <= 1e-12 * std::abs(sol.du.front());
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "radial";
  j["tool_version"] = KML_VERSION;
  j["config"] = cfg.to_json();
  j["du_s0"] = sol.du.front();
  j["penrose_constant"] = penrose_constant(sol);
  j["integrand_max"] = imax;
  j["u_linear"] = linear;
  j["asymptotic_ratio"] = sol.u.back() * std::exp(-sol.s.back());  // e^{-s1} u(s1)
  return j;
}

inline std::string radial_csv(const RadialSolution& sol) {
  const auto integrand = mass_integrand_diagnostic(sol);
  std::string out = "s,u,du,integrand\n";
  for (std::size_t k = 0; k < sol.s.size(); ++k)
    out += format_double(sol.s[k]) + "," + format_double(sol.u[k]) + "," + format_double(sol.du[k]) + "," +
           format_double(integrand[k]) + "\n";
  return out;
}

inline ArtifactSet radial_artifacts(const RadialConfig& cfg, const RadialSolution& sol) {
  ArtifactSet a;
  a.add("report.json", dump_json(radial_report(cfg, sol)));
  a.add("radial.csv", radial_csv(sol));
  return a;
}

/// Writes every file of the set under dir, then manifest.json listing them
/// with sizes and FNV-1a hashes.
inline void write_artifacts(const std::filesystem::path& dir, const ArtifactSet& set, const std::string& command,
                            const json& config, double wall_time) {
  json files = json::array();
  for (const auto& [path, content] : set.files) {
    write_text(dir / path, content);
    files.push_back({{"path", path}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a64(content))}});
  }
  json m;
  m["schema_version"] = kSchemaVersion;
  m["tool"] = "kml";
  m["tool_version"] = KML_VERSION;
  m["command"] = command;
  m["config_hash"] = hex64(fnv1a64(config.dump()));
  m["files"] = files;
  m["wall_time_s"] = wall_time;
  write_text(dir / "manifest.json", dump_json(m));
}

}  // namespace kml
