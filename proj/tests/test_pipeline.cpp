#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "photodeg/errors.hpp"
#include "photodeg/pipeline.hpp"

using namespace photodeg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("photodeg_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineRequest request(const std::string& command, const fs::path& data, const fs::path& out) {
  PipelineRequest r;
  r.config.command = command;
  r.config.data_dir = data;
  r.config.out_dir = out;
  r.config.draws = 1000;
  r.config.seed = 17;
  return r;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST(Pipeline, SimulateFitPredictIntervalAdjustCompare) {
  const fs::path root = scratch("e2e");

  auto sim = request("simulate", ".", root / "sim");
  sim.outdoor_specimens = 4;
  sim.outdoor_days = 60;
  const auto simulated = run_pipeline(sim);
  for (const auto& p : simulated.artifacts) EXPECT_TRUE(fs::exists(p)) << p;
  EXPECT_TRUE(fs::exists(root / "sim" / "truth.json"));
  EXPECT_EQ(first_line(root / "sim" / "accel" / "specimens.csv").rfind("# format=photodeg-1 command=simulate", 0), 0u);

  auto fit = request("fit", root / "sim" / "accel", root / "fit");
  fit.config.model = "A";
  const auto fitted = run_pipeline(fit);
  const fs::path fit_json = root / "fit" / "fit_A.json";
  ASSERT_TRUE(fs::exists(fit_json));
  EXPECT_TRUE(fs::exists(root / "fit" / "categorical_report.txt"));
  EXPECT_NE(fitted.summary.find("model A"), std::string::npos);

  const fs::path outdoor = root / "sim" / "outdoor";
  auto predict = request("predict", outdoor, root / "predict");
  predict.fits = {fit_json};
  run_pipeline(predict);
  EXPECT_TRUE(fs::exists(root / "predict" / "failures.csv"));
  EXPECT_TRUE(fs::exists(root / "predict" / "overlay.csv"));
  EXPECT_TRUE(fs::exists(root / "predict" / "predictions"));

  auto interval = request("interval", outdoor, root / "interval");
  interval.fits = {fit_json};
  const auto bands = run_pipeline(interval);
  EXPECT_FALSE(bands.artifacts.empty());

  auto adjust = request("adjust", outdoor, root / "adjust");
  adjust.fits = {fit_json};
  run_pipeline(adjust);
  EXPECT_TRUE(fs::exists(root / "adjust" / "random_effects.csv"));

  auto compare = request("compare", outdoor, root / "compare");
  compare.fits = {fit_json};
  compare.manual_rows = {{"B", 30201.98, 13, "", std::nullopt}, {"C", 30414.43, 14, "", std::nullopt}};
  const auto table = run_pipeline(compare);
  EXPECT_NE(table.summary.find("-60377.96"), std::string::npos) << table.summary;
  EXPECT_NE(table.summary.find("-60800.86"), std::string::npos);
  EXPECT_NE(table.summary.find("A1"), std::string::npos);
  EXPECT_NE(table.summary.find("A2"), std::string::npos);

  // Same seed, same bytes.
  auto again = request("simulate", ".", root / "sim2");
  again.outdoor_specimens = 4;
  again.outdoor_days = 60;
  run_pipeline(again);
  for (const char* f : {"accel/measurements.csv", "outdoor/outdoor_measurements.csv", "outdoor/weather_W1.csv"}) {
    std::ifstream a(root / "sim" / f), b(root / "sim2" / f);
    std::string la, lb;
    std::getline(a, la);  // header lines name the output directory
    std::getline(b, lb);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {})) << f;
  }
  fs::remove_all(root);
}

TEST(Pipeline, EmptyDatasetFitFails) {
  const fs::path root = scratch("empty");
  std::ofstream(root / "specimens.csv") << "specimen_id,group_id,bp,nd,temp_c,rh_pct\n";
  std::ofstream(root / "measurements.csv") << "specimen_id,time_h,damage\n";
  std::ofstream(root / "dosage.csv") << "specimen_id,time_h,cum_dosage\n";
  const auto r = request("fit", root, root / "out");
  try {
    run_pipeline(r);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(exit_code_for(e), 2);
    const auto doc = error_report(e, "fit");
    EXPECT_EQ(doc.at("status"), "error");
    EXPECT_EQ(doc.at("type"), "ValidationError");
    EXPECT_EQ(doc.at("exit_code"), 2);
  }
  fs::remove_all(root);
}

TEST(Pipeline, ErrorClassesMapToExitCodes) {
  auto r = request("fit", "/nonexistent/photodeg", "/tmp/photodeg_pipeline_none");
  try {
    run_pipeline(r);
    FAIL() << "expected an error";
  } catch (const IoError& e) {
    EXPECT_EQ(exit_code_for(e), 3);
  }
  r.config.level = 1.5;
  EXPECT_THROW(run_pipeline(r), ConfigurationError);
  EXPECT_EQ(exit_code_for(ConfigurationError("x")), 2);
  EXPECT_EQ(exit_code_for(ConvergenceError("x", {})), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
  r = request("compare", ".", "/tmp/photodeg_pipeline_none");
  EXPECT_THROW(run_pipeline(r), ConfigurationError);
  r.config.command = "explode";
  EXPECT_THROW(run_pipeline(r), ConfigurationError);
}
