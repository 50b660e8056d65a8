#pragma once

// Synthetic accelerated-test datasets and outdoor weather/measurement
// series with known truth. Every draw comes from a counter-based stream
// keyed by the seed and an identifier, so output does not depend on
// evaluation order.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "photodeg/covariates.hpp"
#include "photodeg/dataset.hpp"
#include "photodeg/fit.hpp"
#include "photodeg/path_model.hpp"
#include "photodeg/prediction.hpp"

namespace photodeg {

struct AccelCell {
  BandPass bp = BandPass::k306;
  double nd = 1.0;
  double temp_c = 35.0;
  double rh_pct = 25.0;
  int replicates = 4;
};

struct AccelDesign {
  std::vector<AccelCell> cells;
  std::vector<double> schedule_h;             // measurement times, strictly increasing
  std::map<BandPass, double> rate;            // dosage per hour at ND 100%
  std::map<BandPass, WavelengthSplit> splits;
  double sigma_v = 0.1;
  double sigma_eps = 0.01;
  double sigma_u = 0.0;  // cell-level effect; groups are cells
  std::uint64_t seed = 1;

  void validate() const;

  // The 80 temperature/RH/filter combinations of the laboratory study,
  // four replicates each except one cell with three (319 specimens).
  // Lamp rates put the reference condition (ND 100%, 35 C, 25% RH) at half
  // damage at the geometric middle of the schedule under `truth`.
  static AccelDesign laboratory(const CombinedParams& truth, std::uint64_t seed = 1);
  static AccelDesign laboratory(const CategoricalParams& truth, std::uint64_t seed = 1);
};

// Measurement schedule alternating 3- and 4-day gaps.
std::vector<double> alternating_schedule(double first_day, int count);

// Two-peak lamp spectrum on 296..536 nm used by the synthetic designs.
SpectralCurve synthetic_lamp();

std::size_t specimen_count(const AccelDesign& design);

// Forward model of the combined model; truth's fixed effects only, noise
// levels come from the design.
AccelDataset simulate_accel(const AccelDesign& design, const CombinedParams& truth);
// Same design under the categorical-effects model.
AccelDataset simulate_accel(const AccelDesign& design, const CategoricalParams& truth);

struct WeatherSpec {
  std::string specimen_id = "W1";
  long long start_s = 1275350400;  // 2010-06-01T00:00:00Z
  int n_days = 120;
  double peak_dosage = 0.02;       // per cell per raw record at noon, summer, spectral peak
  double sunrise_h = 6.0;          // daylight window in local hours
  double sunset_h = 20.0;
  double seasonal_amplitude = 0.5; // relative; 0 gives identical days
  double seasonal_peak_day = 172;  // day of year of the UV maximum
  double cutoff_nm = 310.0;        // logistic short-wavelength cutoff
  double cutoff_width_nm = 3.0;
  double decay_per_nm = 0.004;     // long-wavelength decline
  double cloudiness = 0.0;         // daily factor uniform on (1 - c, 1)
  double temp_mean_c = 15.0;
  double temp_seasonal_c = 10.0;
  double temp_daily_c = 6.0;
  double rh_mean_pct = 60.0;
  double rh_seasonal_pct = -10.0;
  double rh_daily_pct = 15.0;
  double missing_fraction = 0.0;   // injected missing records
  std::uint64_t seed = 7;

  void validate() const;
};

// Relative spectral shape of the synthetic daylight at a wavelength.
double weather_spectral_shape(const WeatherSpec& spec, double lambda_nm);

CovariateHistory simulate_weather(const WeatherSpec& spec);

struct OutdoorSimOptions {
  std::string specimen_id = "O1";
  std::uint64_t seed = 11;
  long long bin_s = 3600;
  SlopeRule rule = SlopeRule::kExact;
  std::vector<double> times_h;  // empty: every 3-4 days over the history
  bool draw_v = true;           // v ~ N(0, sigma_v^2); otherwise v = fixed_v
  double fixed_v = 0.0;
  bool add_noise = true;        // measurement error with truth.sigma_eps
};

struct OutdoorSpecimen {
  std::string id;
  std::string weather_id;
  double v = 0.0;
  std::vector<double> times_h;
  std::vector<double> latent;    // exp(v) * Omega(t)
  std::vector<double> measured;  // latent + noise
};

// Shares the accumulation engine with predict_path.
OutdoorSpecimen simulate_outdoor(const BinnedCovariates& binned, const CombinedParams& truth,
                                 const OutdoorSimOptions& options = {});
OutdoorSpecimen simulate_outdoor(const CovariateHistory& history, const CombinedParams& truth,
                                 const OutdoorSimOptions& options = {});

}  // namespace photodeg
