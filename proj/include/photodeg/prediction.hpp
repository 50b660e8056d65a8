#pragma once

// Cumulative-damage prediction for outdoor specimens under dynamic
// covariates, calibrated prediction bands, and random-effect adjustment
// from early measurements.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "photodeg/covariates.hpp"
#include "photodeg/fit.hpp"
#include "photodeg/path_model.hpp"

namespace photodeg {

// How the slope g' is integrated across one bin.
//   kExact: covariates are constant inside a bin, so the integral of g' over
//           S* is the change of the logistic between the bin's end points.
//   kMidpoint: g' evaluated at S* before the bin plus half its increment.
enum class SlopeRule { kExact, kMidpoint };

struct PredictOptions {
  long long bin_s = 3600;
  SlopeRule rule = SlopeRule::kExact;
  long long max_gap_s = 14 * kSecondsPerDay;
};

struct PredictionBand {
  std::string specimen_id;
  long long origin_s = 0;
  std::vector<double> times_h;            // elapsed hours since origin, at bin ends
  std::vector<long long> timestamps_s;    // absolute bin ends
  std::vector<double> s_star_cum;         // total effective dosage at bin ends
  std::vector<double> point;              // v = 0
  std::vector<double> lower;              // empty unless a band was computed
  std::vector<double> upper;
  double level = 0.0;
  long long redraws = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return times_h.size(); }
  bool has_band() const { return !lower.empty(); }
};

// Point path on pre-binned covariates; exp(v) scales the whole path.
PredictionBand predict_path(const BinnedCovariates& binned, const CombinedParams& params, double v = 0.0,
                            SlopeRule rule = SlopeRule::kExact);

// Bins the history (which must be complete, see impute_covariates) first.
PredictionBand predict_path(const CovariateHistory& history, const CombinedParams& params, double v = 0.0,
                            const PredictOptions& options = {});

// Linear interpolation of `values` over the band's times with value 0 at
// time 0. Throws ExtrapolationError outside [0, last time].
double interpolate_band(const PredictionBand& band, const std::vector<double>& values, double time_h);
inline double damage_at(const PredictionBand& band, double time_h) {
  return interpolate_band(band, band.point, time_h);
}

std::optional<FailureCrossing> band_failure_time(const PredictionBand& band, double threshold = kFailureThreshold);

struct IntervalOptions {
  double level = 0.95;
  int draws = 50000;
  std::uint64_t seed = 20170401;
  unsigned threads = 1;
  // Elapsed hours at which the band is reported; empty means one point per
  // day plus the final bin.
  std::vector<double> times_h;
  SlopeRule rule = SlopeRule::kExact;
};

// Calibrated band. Each draw takes theta* ~ N(theta_hat, Sigma) over the 11
// fixed effects and v* ~ N(0, sigma_v^2); W* is the random-effect CDF at
// theta_hat evaluated at the drawn path, and its alpha/2, 1 - alpha/2
// quantiles are mapped back through the same CDF. With sigma_v = 0 the band
// is the percentile interval of the drawn paths.
PredictionBand calibrated_interval(const BinnedCovariates& binned, const CombinedFit& fit,
                                   const IntervalOptions& options = {});

// Raw probability-integral values W* (draws x times, row-major) used by the
// band; exposed for diagnostics.
struct PivotSample {
  std::vector<double> times_h;
  std::vector<double> point;
  std::vector<double> w;  // draws * times
  int draws = 0;
  long long redraws = 0;
};
PivotSample calibration_pivots(const BinnedCovariates& binned, const CombinedFit& fit,
                               const IntervalOptions& options = {});

struct RandomEffectEstimate {
  double v = 0.0;
  double scale = 1.0;  // exp(v)
  bool fallback = false;
  std::string warning;
};

// exp(v) = sum(y * yhat) / sum(yhat^2) over measurement positions
// first..last (1-based, inclusive).
RandomEffectEstimate estimate_random_effect(std::span<const double> measured, std::span<const double> predicted,
                                            int first = 5, int last = 10);

// Group-level effect from the pooled windows of all members, then a
// specimen-level deviation shrunk toward zero by sigma_w^2 / (sigma_w^2 +
// var(w_hat)).
struct NestedEffectEstimate {
  double u = 0.0;
  std::vector<double> w;
  std::vector<std::string> warnings;
};
NestedEffectEstimate estimate_nested_effects(const std::vector<std::vector<double>>& measured,
                                             const std::vector<std::vector<double>>& predicted, double sigma_w,
                                             double sigma_eps, int first = 5, int last = 10);

double prediction_mse(std::span<const double> measured, std::span<const double> predicted);

}  // namespace photodeg
