#pragma once

// File formats: CSV ingestion/emission for accelerated and outdoor data,
// ISO-8601 timestamps, fit reports and the run configuration.
//
// Every emitted artifact starts with one '#' line carrying the format
// version, the seed and the configuration; readers skip '#' lines.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "photodeg/covariates.hpp"
#include "photodeg/dataset.hpp"
#include "photodeg/fit.hpp"
#include "photodeg/prediction.hpp"
#include "photodeg/simulate.hpp"

namespace photodeg {

inline constexpr const char* kFormatVersion = "photodeg-1";

// "2010-06-01T10:12:00Z" <-> seconds since the Unix epoch. A missing "Z"
// is accepted (UTC assumed); fractional seconds and offsets are rejected.
long long parse_iso8601(const std::string& text);
std::string format_iso8601(long long epoch_s);

// 12 significant digits, shortest form.
std::string format_number(double x);

struct RunConfig {
  std::string command;
  std::filesystem::path data_dir = ".";
  std::filesystem::path out_dir = "out";
  std::string model = "B";
  int quad_order = 15;
  int bin_min = 60;
  int draws = 50000;
  double level = 0.95;
  std::uint64_t seed = 20170401;
  double threshold = kFailureThreshold;
  double floor = kDamageFloor;
  std::filesystem::path exclude_file;
  unsigned threads = 1;

  void validate() const;
  // key=value pairs in sorted key order
  std::map<std::string, std::string> to_map() const;
  void set(const std::string& key, const std::string& value);
  std::string header_line() const;
};

// key=value lines; '#' starts a comment. Unknown keys are errors.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// ---------------------------------------------------------------------------
// Accelerated data: specimens.csv, measurements.csv, dosage.csv and
// splits.csv inside one directory.

struct IngestReport {
  std::map<std::string, std::size_t> measurement_rows;
  std::map<std::string, std::size_t> dosage_rows;
  std::vector<std::string> warnings;
};

AccelDataset ingest_accel(const std::filesystem::path& dir, IngestReport* report = nullptr);
void emit_accel(const AccelDataset& dataset, const std::filesystem::path& dir, const std::string& header);

std::vector<std::string> read_id_list(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Outdoor data

CovariateHistory read_weather_csv(const std::filesystem::path& path, const std::string& id);
void write_weather_csv(const CovariateHistory& history, const std::filesystem::path& path, const std::string& header);

struct OutdoorRecord {
  std::string id;
  std::string weather;  // weather file name, relative to the directory
  std::string group_id;
  std::vector<double> times_h;
  std::vector<double> damage;
};

// outdoor_specimens.csv (specimen_id, weather_file, group_id) and
// outdoor_measurements.csv (specimen_id, time_h, damage).
std::vector<OutdoorRecord> ingest_outdoor(const std::filesystem::path& dir);
void emit_outdoor(const std::vector<OutdoorRecord>& records, const std::filesystem::path& dir,
                  const std::string& header);

// ---------------------------------------------------------------------------
// Reports

nlohmann::ordered_json fit_to_json(const CombinedFit& fit, const RunConfig& config);
nlohmann::ordered_json fit_to_json(const CategoricalFit& fit, const RunConfig& config);
CombinedFit combined_fit_from_json(const nlohmann::json& doc);

// Parameter / estimate / SE / p-value table.
std::string fit_report(const std::vector<ParameterEstimate>& estimates, double loglik, double aic, int n_params,
                       const std::string& title, const RunConfig& config);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::string prediction_csv(const PredictionBand& band, const std::string& header);

struct FailureRow {
  std::string specimen_id;
  std::optional<FailureCrossing> crossing;
  long long origin_s = 0;
};
std::string failure_csv(const std::vector<FailureRow>& rows, double threshold, const std::string& header);

struct OverlayRow {
  std::string specimen_id;
  std::string series;  // measured, predicted, adjusted
  double time_h = 0.0;
  double damage = 0.0;
};
std::string overlay_csv(const std::vector<OverlayRow>& rows, const std::string& header);

struct ComparisonRow {
  std::string model;
  double loglik = 0.0;
  int n_params = 0;
  std::string prediction;  // e.g. B1, B2
  std::optional<double> mse;
};
std::string comparison_table(const std::vector<ComparisonRow>& rows, const std::string& header);

}  // namespace photodeg
