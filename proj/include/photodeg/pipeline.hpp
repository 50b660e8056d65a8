#pragma once

// Command orchestration shared by the CLI and the Python module. Each
// command reads its inputs, writes its artifacts under config.out_dir and
// returns what it wrote.

#include <filesystem>
#include <string>
#include <vector>

#include "photodeg/io.hpp"

namespace photodeg {

struct PipelineRequest {
  RunConfig config;
  std::vector<std::filesystem::path> fits;  // predict/interval/adjust use the first, compare uses all
  // simulate
  int outdoor_specimens = 6;
  int outdoor_days = 150;
  double sigma_v = 0.1;
  double sigma_eps = 0.01;
  // fit: keep the 55 C / 75% RH specimens in the combined fit
  bool keep_all_conditions = false;
  // compare: rows given directly as name, loglik, n_params
  std::vector<ComparisonRow> manual_rows;
};

struct PipelineResult {
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::string> warnings;
  std::string summary;
};

PipelineResult run_simulate(const PipelineRequest& request);
PipelineResult run_fit(const PipelineRequest& request);
PipelineResult run_predict(const PipelineRequest& request);
PipelineResult run_interval(const PipelineRequest& request);
PipelineResult run_adjust(const PipelineRequest& request);
PipelineResult run_compare(const PipelineRequest& request);
PipelineResult run_validate(const PipelineRequest& request);

// Dispatches on request.config.command.
PipelineResult run_pipeline(const PipelineRequest& request);

// Machine-readable description of an exception: type, message, exit code.
nlohmann::ordered_json error_report(const std::exception& error, const std::string& command);
int exit_code_for(const std::exception& error);

}  // namespace photodeg
