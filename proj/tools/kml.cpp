// kml: command-line front end.
//
//   kml run <config.json> [--out DIR]
//   kml geon [--rh R] [--r0 R] [--pxi P] [--ptheta P] [--sweep] [--out DIR]
//   kml radial [--warp kottler|linear|perturbed] [--eps E] [--s0 S] [--s1 S]
//              [--intervals N] [--u0 U] [--slope1 D] [--out DIR]
//   kml verify <dir>
//
// Exit codes: 0 success, 1 solver failure or failed check, 2 violated
// hypothesis, 64 usage error. KML_OUT overrides the output directory.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "kml/artifacts.hpp"
#include "kml/error.hpp"
#include "kml/pipeline.hpp"
#include "kml/verify.hpp"

namespace {

enum Exit { kOk = 0, kSolver = 1, kHypothesis = 2, kUsage = 64 };

std::optional<std::filesystem::path> out_dir(const std::string& flag) {
  if (const char* env = std::getenv("KML_OUT"); env && *env) return std::filesystem::path(env);
  if (!flag.empty()) return std::filesystem::path(flag);
  return std::nullopt;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = out_dir(out_flag);
  if (!dir) throw kml::UsageError("run: no output directory (use --out or KML_OUT)");
  const kml::PipelineConfig cfg = kml::PipelineConfig::from_file(config_path);
  const kml::PipelineResult result = kml::run_pipeline(cfg);
  kml::write_artifacts(*dir, kml::run_artifacts(result), "run", cfg.to_json(), seconds_since(t0));
  const auto& m = result.mass;
  std::cout << "m_by_static " << kml::format_double(m.m_by_static) << "\n"
            << "m_total " << kml::format_double(m.m_total) << " +- " << kml::format_double(m.m_total_error) << "\n"
            << "gap " << kml::format_double(m.gap) << "\n"
            << "artifacts " << dir->string() << "\n";
  if (!result.checks.all()) {
    std::cerr << "kml: run checks failed; see checks in report.json\n";
    return kSolver;
  }
  return kOk;
}

int cmd_geon(const kml::GeonConfig& cfg, bool sweep, const std::string& out_flag) {
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<kml::GeonSweep> s;
  if (sweep) s = kml::geon_sweep(cfg, kml::log_spaced(std::max(2.0, 2.0 * cfg.r_h), 1e4, 25));
  const kml::json report = kml::geon_report(cfg, s);
  std::cout << kml::dump_json(report);
  if (s) std::cout << kml::geon_sweep_csv(*s);
  if (const auto dir = out_dir(out_flag))
    kml::write_artifacts(*dir, kml::geon_artifacts(cfg, s), "geon", report.at("config"), seconds_since(t0));
  return kOk;
}

int cmd_radial(const kml::RadialConfig& cfg, const std::string& out_flag) {
  const auto t0 = std::chrono::steady_clock::now();
  const kml::RadialSolution sol = kml::solve_radial(cfg.make_warp(), cfg.s0, cfg.s1, cfg.intervals, cfg.bc);
  const kml::json report = kml::radial_report(cfg, sol);
  std::cout << kml::dump_json(report);
  if (const auto dir = out_dir(out_flag))
    kml::write_artifacts(*dir, kml::radial_artifacts(cfg, sol), "radial", cfg.to_json(), seconds_since(t0));
  return kOk;
}

int cmd_verify(const std::string& dir) {
  const kml::VerifyResult r = kml::verify_artifacts(dir);
  for (const auto& p : r.passed) std::cout << "ok    " << p << "\n";
  for (const auto& f : r.failed) std::cout << "FAIL  " << f << "\n";
  return r.ok() ? kOk : kSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kottler extension mass tools"};
  app.require_subcommand(1);
  std::string out_flag;

  std::string config_path;
  auto* run = app.add_subcommand("run", "Flow, extension and mass report for a boundary configuration");
  run->add_option("config", config_path, "JSON configuration")->required();
  run->add_option("--out", out_flag, "Output directory");

  kml::GeonConfig geon_cfg;
  bool sweep = false;
  auto* geon = app.add_subcommand("geon", "Closed-form Horowitz-Myers geon report");
  geon->add_option("--rh", geon_cfg.r_h, "Inner radius (>= 1)");
  geon->add_option("--r0", geon_cfg.r_0, "Outer radius");
  geon->add_option("--pxi", geon_cfg.P_xi, "Period of xi");
  geon->add_option("--ptheta", geon_cfg.P_theta, "Period of theta");
  geon->add_flag("--sweep", sweep, "Sweep r0 over log-spaced radii");
  geon->add_option("--out", out_flag, "Output directory");

  kml::RadialConfig radial_cfg;
  auto* radial = app.add_subcommand("radial", "Radial solution of Delta u = 3|grad u| on a warped product");
  radial->add_option("--warp", radial_cfg.warp, "kottler, linear or perturbed");
  radial->add_option("--eps", radial_cfg.eps, "Amplitude of the perturbed warp");
  radial->add_option("--s0", radial_cfg.s0, "Inner end");
  radial->add_option("--s1", radial_cfg.s1, "Outer end");
  radial->add_option("--intervals", radial_cfg.intervals, "Grid intervals");
  radial->add_option("--u0", radial_cfg.bc.u0, "u(s0)");
  radial->add_option("--slope1", radial_cfg.bc.slope1, "u'(s1)");
  radial->add_option("--out", out_flag, "Output directory");

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Re-check stored artifacts");
  verify->add_option("dir", verify_dir, "Output directory of an earlier command")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(config_path, out_flag);
    if (*geon) return cmd_geon(geon_cfg, sweep, out_flag);
    if (*radial) return cmd_radial(radial_cfg, out_flag);
    if (*verify) return cmd_verify(verify_dir);
  } catch (const kml::UsageError& e) {
    std::cerr << "kml: usage: " << e.what() << "\n";
    return kUsage;
  } catch (const kml::HypothesisError& e) {
    std::cerr << "kml: hypothesis violated: " << e.what() << "\n";
    return kHypothesis;
  } catch (const kml::Error& e) {
    std::cerr << "kml: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "kml: " << e.what() << "\n";
    return kSolver;
  }
  return kUsage;
}
