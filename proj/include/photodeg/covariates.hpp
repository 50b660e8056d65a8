#pragma once

// Outdoor covariate histories: 12-minute records of temperature, RH and
// per-cell UV dosage, imputation of gaps, and aggregation to coarser bins.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace photodeg {

inline constexpr int kCellCount = 117;  // 2 nm cells centred on 300..532 nm
inline constexpr double kFirstCellNm = 300.0;
inline constexpr long long kRawIntervalSeconds = 12 * 60;
inline constexpr long long kSecondsPerDay = 24 * 3600;

constexpr double cell_center(int cell) { return kFirstCellNm + 2.0 * cell; }

using CellArray = std::array<double, kCellCount>;

// Missing values are NaN.
struct CovariateRecord {
  long long time_s = 0;  // seconds since the Unix epoch (UTC), start of interval
  double temp_c = 0.0;
  double rh_pct = 0.0;
  CellArray dosage{};
};

struct CovariateHistory {
  std::string specimen_id;
  std::vector<CovariateRecord> records;
  long long raw_interval_s = kRawIntervalSeconds;

  void validate() const;
  bool has_missing() const;
  // Fraction of records carrying at least one missing value.
  double missing_fraction() const;
};

struct ImputeOptions {
  long long max_window_s = 14 * kSecondsPerDay;
  double max_missing_fraction = 0.05;
};

// Same-time-of-day donor mean within +-max_window. UV cells inside a dark
// stretch (nearest observed neighbours on both sides are zero) are set to 0.
CovariateHistory impute_covariates(const CovariateHistory& history, const ImputeOptions& options = {});

// One aggregation bin: raw dosage summed per cell, temperature and RH
// averaged over the records in the bin.
struct CovariateBin {
  long long start_s = 0;
  long long end_s = 0;
  double mean_temp_c = 0.0;
  double mean_rh_pct = 0.0;
  int record_count = 0;
  CellArray dosage{};
};

struct BinnedCovariates {
  std::string specimen_id;
  long long origin_s = 0;  // start of the first bin; elapsed time is measured from here
  long long bin_s = 3600;
  std::vector<CovariateBin> bins;
};

// Bins are aligned to multiples of bin_s since the epoch. Bins without
// records are omitted. Throws ConfigurationError if bin_s is not a multiple
// of the raw interval, MissingDataError on NaN values or a record gap longer
// than max_gap_s.
BinnedCovariates bin_covariates(const CovariateHistory& history, long long bin_s,
                                long long max_gap_s = 14 * kSecondsPerDay);

// Per-bin, per-cell effective dosage increments
// raw_sum * exp(beta_lambda * cell_center).
struct EffectiveDosageBins {
  BinnedCovariates binned;
  std::vector<CellArray> increments;
};

EffectiveDosageBins incremental_effective_dosage(const CovariateHistory& history, double beta_lambda,
                                                 long long bin_s);

// exp(beta_lambda * cell_center) for every cell.
CellArray cell_weights(double beta_lambda);

}  // namespace photodeg
