#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "kml/artifacts.hpp"
#include "kml/field_io.hpp"
#include "kml/pipeline.hpp"
#include "kml/verify.hpp"

namespace kml {
namespace {

namespace fs = std::filesystem;

const fs::path kData = KML_TEST_DATA;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kml_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_config() {
  return json::parse(R"({
    "grid": {"n": 16},
    "v": {"modes": [{"k": [1, 0], "sin": 0.2}, {"k": [0, 1], "cos": 0.1}]},
    "H_phys": {"scale_H0": 0.95},
    "flow": {"t_max": 6.0, "dt": 0.01, "snapshot_stride": 50}
  })");
}

template <class E>
std::string error_of(const json& j) {
  try {
    PipelineConfig::from_json(j);
  } catch (const E& e) {
    return e.what();
  }
  return "<no error>";
}

TEST(PipelineConfig, DefaultsAndCanonicalForm) {
  const PipelineConfig c = PipelineConfig::from_json(small_config());
  EXPECT_EQ(c.n1, 16);
  EXPECT_EQ(c.n2, 16);
  EXPECT_EQ(c.extension.dt, c.flow.dt);
  EXPECT_EQ(c.extension.snapshot_stride, 50);
  EXPECT_FALSE(c.extension.window);
  EXPECT_EQ(c.h_kind, PipelineConfig::HPhysKind::ScaleH0);
  // The canonical form parses back to itself.
  const json canon = c.to_json();
  EXPECT_EQ(PipelineConfig::from_json(canon).to_json(), canon);
}

TEST(PipelineConfig, RejectsUnknownKeysWithTheirName) {
  json j = small_config();
  j["flow"]["tmax"] = 3.0;
  EXPECT_NE(error_of<UsageError>(j).find("\"tmax\" in flow"), std::string::npos);
  j = small_config();
  j["extra"] = 1;
  EXPECT_NE(error_of<UsageError>(j).find("\"extra\""), std::string::npos);
  j = small_config();
  j["v"]["modes"][0]["phase"] = 0.0;
  EXPECT_NE(error_of<UsageError>(j).find("v.modes[0]"), std::string::npos);
}

TEST(PipelineConfig, RejectsInvalidValues) {
  json j = small_config();
  j.erase("v");
  EXPECT_NE(error_of<UsageError>(j).find("missing v"), std::string::npos);
  j = small_config();
  j["flow"]["t_max"] = 4.0;
  EXPECT_NE(error_of<UsageError>(j).find("at least 6"), std::string::npos);
  j = small_config();
  j["torus"] = {{"sigma", {1.0, 2.0, 1.0}}};
  EXPECT_NE(error_of<UsageError>(j).find("positive definite"), std::string::npos);
  j = small_config();
  j["grid"]["n"] = "big";
  EXPECT_NE(error_of<UsageError>(j).find("wrong type"), std::string::npos);
  j = small_config();
  j["H_phys"] = "physical";
  EXPECT_NE(error_of<UsageError>(j).find("reference"), std::string::npos);
  j = small_config();
  j["v"] = {{"file", "does_not_exist.csv"}};
  EXPECT_NE(error_of<UsageError>(j).find("not found"), std::string::npos);
}

TEST(PipelineConfig, ModesMustBeBelowNyquist) {
  json j = small_config();
  j["v"]["modes"].push_back({{"k", {8, 0}}, {"cos", 0.01}});
  const PipelineConfig c = PipelineConfig::from_json(j);
  EXPECT_THROW(run_pipeline(c), UsageError);
}

TEST(PipelineConfig, FileFieldMatchesModes) {
  const fs::path dir = scratch_dir("file_field");
  const PipelineConfig c = PipelineConfig::from_json(small_config());
  const PeriodicField v = c.v.sample(c.grid(), "v");
  write_field_csv(dir / "v.csv", v);
  json j = small_config();
  j["v"] = {{"file", "v.csv"}};
  const PipelineConfig cf = PipelineConfig::from_json(j, dir);
  EXPECT_EQ(sup_distance(cf.v.sample(cf.grid(), "v"), v), 0.0);
}

TEST(FieldIo, RoundTripIsExact) {
  const Grid g(6, 4, FlatTorus(1.0, 0.1, 2.0));
  const PeriodicField f = PeriodicField::sample(g, [](double x, double y) { return std::exp(std::sin(x)) / 3.0 + y * 1e-17; });
  const fs::path p = scratch_dir("roundtrip") / "f.csv";
  write_field_csv(p, f);
  const PeriodicField r = read_field_csv(p, g);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(r[k], f[k]);
  const std::string text = read_text(p);
  EXPECT_EQ(text.substr(0, 20), "theta1,theta2,value\n");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 25);
  // Row-major: the second row advances theta2.
  EXPECT_NE(text.find("\n0,1.5707963267948966,"), std::string::npos);
}

TEST(FieldIo, RejectsMalformedFiles) {
  const Grid g(4, 4);
  const fs::path dir = scratch_dir("malformed");
  std::string good = field_csv(PeriodicField(g, 1.0));
  auto bad = [&](const std::string& text) {
    write_text(dir / "x.csv", text);
    return dir / "x.csv";
  };
  EXPECT_THROW(read_field_csv(bad("theta,value\n"), g), FormatError);
  EXPECT_THROW(read_field_csv(bad(good.substr(0, good.size() - 10)), g), FormatError);
  std::string swapped = good;
  swapped.replace(swapped.find(",1\n"), 3, ",x\n");
  EXPECT_THROW(read_field_csv(bad(swapped), g), FormatError);
  EXPECT_THROW(read_field_csv(bad(good + "0,0,1\n"), g), FormatError);
  EXPECT_THROW(read_field_csv(bad(good), Grid(4, 8)), FormatError);
  EXPECT_THROW(read_field_csv(dir / "missing.csv", g), UsageError);
}

TEST(FieldIo, Fnv1aReferenceValues) {
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
  EXPECT_EQ(hex64(fnv1a64("foobar")), "85944171f73967e8");
}

TEST(RunPipeline, ReferenceDataHasZeroMass) {
  const PipelineResult r = run_pipeline(PipelineConfig::from_file(kData / "configs/reference.json"));
  EXPECT_LE(std::abs(r.mass.m_by_static), 1e-8);
  EXPECT_LE(std::abs(r.mass.m_total), 1e-8);
  EXPECT_LE(std::abs(r.mass.gap), 1e-8);
  EXPECT_TRUE(r.checks.all());
}

TEST(RunPipeline, FlatClosedForms) {
  const PipelineResult r = run_pipeline(PipelineConfig::from_file(kData / "configs/flat.json"));
  const double w0 = 1.5, area = kTwoPi * kTwoPi;
  EXPECT_NEAR(r.mass.m_by_static, (1.0 - 1.0 / w0) * area / (4.0 * kPi), 1e-6);
  EXPECT_NEAR(r.mass.m_total, (1.0 - 1.0 / (w0 * w0)) * area / (8.0 * kPi), 1e-6);
  EXPECT_NEAR(r.mass.gap, (1.0 - 1.0 / w0) * (1.0 - 1.0 / w0) * area / (8.0 * kPi), 1e-6);
  EXPECT_NEAR(r.mass.m_series_final, r.mass.m_total, 1e-6);
  EXPECT_LE(r.w_inf.w_inf.max_abs() - 0.5 * (1.0 - 1.0 / (w0 * w0)), 1e-6);
  EXPECT_LE(r.f.f.max_abs(), 1e-12);
  EXPECT_LE(sup_distance(r.w0, PeriodicField(r.w0.grid(), w0)), 1e-12);
  EXPECT_TRUE(r.checks.all());
}

TEST(RunPipeline, GenericChecks) {
  const PipelineResult r = run_pipeline(PipelineConfig::from_file(kData / "configs/generic.json"));
  EXPECT_GE(r.mass.gap, -1e-6);
  EXPECT_LE(r.mass.monotonicity_violation, 1e-8);
  EXPECT_GT(r.mass.m_by_static, r.mass.m_total);
  ASSERT_TRUE(r.curvature);
  EXPECT_LE(r.curvature->max_residual, 1e-2);
  EXPECT_TRUE(r.checks.all());
}

TEST(RunPipeline, FailuresNameTheHypothesis) {
  try {
    run_pipeline(PipelineConfig::from_file(kData / "configs/inadmissible.json"));
    FAIL() << "expected a hypothesis error";
  } catch (const HypothesisError& e) {
    EXPECT_NE(std::string(e.what()).find("K > -1 fails at grid point"), std::string::npos) << e.what();
  }
  json j = small_config();
  j["H_phys"] = {{"constant", 1.0}, {"modes", {{{"k", {1, 0}}, {"cos", 2.0}}}}};
  try {
    run_pipeline(PipelineConfig::from_json(j));
    FAIL() << "expected a hypothesis error";
  } catch (const HypothesisError& e) {
    EXPECT_NE(std::string(e.what()).find("H_phys > 0 fails"), std::string::npos) << e.what();
  }
}

TEST(RunPipeline, ArtifactsAreDeterministic) {
  const PipelineConfig c = PipelineConfig::from_json(small_config());
  const ArtifactSet a = run_artifacts(run_pipeline(c));
  const ArtifactSet b = run_artifacts(run_pipeline(c));
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t k = 0; k < a.files.size(); ++k) {
    EXPECT_EQ(a.files[k].first, b.files[k].first);
    EXPECT_EQ(a.files[k].second, b.files[k].second) << a.files[k].first;
  }
  const json report = json::parse(*a.find("report.json"));
  EXPECT_EQ(report.at("schema_version"), kSchemaVersion);
  EXPECT_EQ(report.at("kind"), "run");
  EXPECT_EQ(report.at("config"), c.to_json());
}

TEST(Verify, AcceptsFreshArtifactsAndDetectsCorruption) {
  const fs::path dir = scratch_dir("verify");
  const PipelineConfig c = PipelineConfig::from_json(small_config());
  write_artifacts(dir, run_artifacts(run_pipeline(c)), "run", c.to_json(), 0.0);
  const VerifyResult ok = verify_artifacts(dir);
  EXPECT_TRUE(ok.ok()) << (ok.failed.empty() ? "" : ok.failed.front());
  EXPECT_GE(ok.passed.size(), 8u);

  std::string text = read_text(dir / "fields/w_inf.csv");
  text[text.size() - 3] = text[text.size() - 3] == '1' ? '2' : '1';
  write_text(dir / "fields/w_inf.csv", text);
  EXPECT_FALSE(verify_artifacts(dir).ok());

  fs::remove(dir / "manifest.json");
  EXPECT_THROW(verify_artifacts(dir), UsageError);
}

TEST(Verify, ChecksInvariantsNotJustHashes) {
  // A consistent manifest over a series that increases must still fail.
  const fs::path dir = scratch_dir("verify_series");
  const PipelineConfig c = PipelineConfig::from_json(small_config());
  ArtifactSet a = run_artifacts(run_pipeline(c));
  for (auto& [path, content] : a.files)
    if (path == "series.csv") {
      const auto pos = content.find('\n', content.find('\n') + 1);  // end of first data row
      content.insert(pos + 1, "0.001,1000,1,1,0,2\n");
    }
  write_artifacts(dir, a, "run", c.to_json(), 0.0);
  const VerifyResult r = verify_artifacts(dir);
  EXPECT_FALSE(r.ok());
}

TEST(Verify, GoldenRuns) {
  for (const char* name : {"flat", "generic", "geon", "radial"}) {
    const VerifyResult r = verify_artifacts(kData / "golden" / name);
    EXPECT_TRUE(r.ok()) << name << ": " << (r.failed.empty() ? "" : r.failed.front());
  }
}

}  // namespace
}  // namespace kml
