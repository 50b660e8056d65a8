#include "photodeg/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "photodeg/errors.hpp"
#include "photodeg/rng.hpp"

namespace photodeg {

namespace {

std::string numbered(const char* prefix, std::size_t n, int width) {
  std::ostringstream os;
  os << prefix;
  os.width(width);
  os.fill('0');
  os << n;
  return os.str();
}

std::vector<AccelCell> laboratory_cells() {
  std::vector<AccelCell> cells;
  // temp, RH, and whether every ND level is run
  const struct {
    double temp, rh;
    bool full;
  } blocks[] = {{25, 0, true},   {35, 0, true},   {35, 25, false}, {35, 50, false},
                {45, 25, false}, {45, 50, false}, {45, 75, true},  {55, 75, true}};
  for (const auto& b : blocks) {
    for (BandPass bp : kAllBandPasses) {
      if (b.full) {
        for (double nd : kNdLevels) cells.push_back({bp, nd, b.temp, b.rh, 4});
      } else {
        cells.push_back({bp, 1.0, b.temp, b.rh, 4});
      }
    }
  }
  // One specimen of one replicate group was lost: 319 in total.
  cells.back().replicates = 3;
  return cells;
}

double geometric_middle(const std::vector<double>& schedule) {
  return std::sqrt(schedule.front() * schedule.back());
}

}  // namespace

std::vector<double> alternating_schedule(double first_day, int count) {
  std::vector<double> out;
  double day = first_day;
  for (int i = 0; i < count; ++i) {
    out.push_back(day * 24.0);
    day += (i % 2 == 0) ? 3.0 : 4.0;
  }
  return out;
}

SpectralCurve synthetic_lamp() {
  std::vector<double> grid, values;
  for (int nm = 296; nm <= 536; ++nm) {
    const double x = nm;
    // broad continuum plus a line near 313 nm
    const double continuum = 1.0 / (1.0 + std::exp(-(x - 300.0) / 4.0)) * std::exp(-std::pow((x - 380.0) / 120.0, 2));
    const double line = 0.6 * std::exp(-0.5 * std::pow((x - 313.0) / 2.5, 2));
    grid.push_back(x);
    values.push_back(continuum + line);
  }
  return SpectralCurve(grid, values);
}

void AccelDesign::validate() const {
  if (cells.empty()) throw ConfigurationError("design: no cells");
  for (const auto& c : cells) {
    if (c.replicates < 1) throw ConfigurationError("design: replicates must be at least 1");
    ExposureConditions{c.bp, c.nd, c.temp_c, c.rh_pct}.validate();
    if (!rate.count(c.bp)) throw ConfigurationError("design: missing lamp rate for filter " + to_string(c.bp));
  }
  if (schedule_h.empty()) throw ConfigurationError("design: empty schedule");
  for (std::size_t i = 0; i < schedule_h.size(); ++i)
    if (!(schedule_h[i] > 0.0) || (i > 0 && !(schedule_h[i] > schedule_h[i - 1])))
      throw ConfigurationError("design: schedule must be positive and strictly increasing");
  if (sigma_v < 0.0 || sigma_eps < 0.0 || sigma_u < 0.0) throw ConfigurationError("design: negative noise level");
}

AccelDesign AccelDesign::laboratory(const CombinedParams& truth, std::uint64_t seed) {
  AccelDesign d;
  d.cells = laboratory_cells();
  d.schedule_h = alternating_schedule(3.0, 36);
  d.splits = default_splits(synthetic_lamp());
  d.seed = seed;
  const double t_mid = geometric_middle(d.schedule_h);
  const double offset = condition_offset(1.0, 35.0, 25.0, truth);
  for (BandPass bp : kAllBandPasses) {
    const double spectral = bp == BandPass::k353 ? truth.b353 : log_spectral_weight(d.splits.at(bp), truth.beta_lambda);
    d.rate[bp] = std::exp(-(spectral + offset)) / t_mid;
  }
  return d;
}

AccelDesign AccelDesign::laboratory(const CategoricalParams& truth, std::uint64_t seed) {
  AccelDesign d;
  d.cells = laboratory_cells();
  d.schedule_h = alternating_schedule(3.0, 36);
  d.splits = default_splits(synthetic_lamp());
  d.seed = seed;
  const double t_mid = geometric_middle(d.schedule_h);
  for (BandPass bp : kAllBandPasses)
    d.rate[bp] = std::exp(-(truth.log_b_minus_mu[static_cast<std::size_t>(bp)] + truth.log_nd_effect(1.0))) / t_mid;
  return d;
}

std::size_t specimen_count(const AccelDesign& design) {
  std::size_t n = 0;
  for (const auto& c : design.cells) n += static_cast<std::size_t>(c.replicates);
  return n;
}

namespace {

template <typename MeanFn>
AccelDataset simulate_with(const AccelDesign& design, MeanFn&& mean_of) {
  design.validate();
  AccelDataset ds;
  ds.splits = design.splits;
  std::size_t serial = 0;
  for (std::size_t ci = 0; ci < design.cells.size(); ++ci) {
    const auto& cell = design.cells[ci];
    const std::string group = numbered("C", ci + 1, 2);
    double u = 0.0;
    if (design.sigma_u > 0.0) {
      StreamRng grng(design.seed, string_key("group:" + group));
      u = design.sigma_u * grng.normal();
    }
    for (int r = 0; r < cell.replicates; ++r) {
      AccelSpecimen s;
      s.id = numbered("S", ++serial, 3);
      s.group_id = group;
      s.conditions = {cell.bp, cell.nd, cell.temp_c, cell.rh_pct};
      const double rate = design.rate.at(cell.bp) * cell.nd;
      s.dosage.times.push_back(0.0);
      s.dosage.cumulative.push_back(0.0);
      for (double t : design.schedule_h) {
        s.dosage.times.push_back(t);
        s.dosage.cumulative.push_back(rate * t);
      }
      StreamRng rng(design.seed, string_key(s.id));
      const double v = u + design.sigma_v * rng.normal();
      for (double t : design.schedule_h) s.measurements.push_back({t, 0.0});
      const std::vector<double> mean = mean_of(s);
      const double scale = std::exp(v);
      for (std::size_t j = 0; j < mean.size(); ++j)
        s.measurements[j].damage = scale * mean[j] + design.sigma_eps * rng.normal();
      ds.specimens.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace

AccelDataset simulate_accel(const AccelDesign& design, const CombinedParams& truth) {
  return simulate_with(design, [&](const AccelSpecimen& s) { return combined_mean(truth, s, design.splits); });
}

AccelDataset simulate_accel(const AccelDesign& design, const CategoricalParams& truth) {
  return simulate_with(design, [&](const AccelSpecimen& s) { return categorical_mean(truth, s); });
}

void WeatherSpec::validate() const {
  if (n_days < 1) throw ConfigurationError("weather: n_days must be at least 1");
  if (!(sunrise_h >= 0.0 && sunrise_h < sunset_h && sunset_h <= 24.0))
    throw ConfigurationError("weather: daylight window must satisfy 0 <= sunrise < sunset <= 24");
  if (peak_dosage < 0.0) throw ConfigurationError("weather: negative peak dosage");
  if (seasonal_amplitude < 0.0 || seasonal_amplitude >= 1.0)
    throw ConfigurationError("weather: seasonal amplitude must lie in [0, 1)");
  if (cloudiness < 0.0 || cloudiness >= 1.0) throw ConfigurationError("weather: cloudiness must lie in [0, 1)");
  if (missing_fraction < 0.0 || missing_fraction > 0.5) throw ConfigurationError("weather: missing fraction out of range");
}

double weather_spectral_shape(const WeatherSpec& spec, double lambda_nm) {
  const double cut = 1.0 / (1.0 + std::exp(-(lambda_nm - spec.cutoff_nm) / spec.cutoff_width_nm));
  return cut * std::exp(-spec.decay_per_nm * std::max(0.0, lambda_nm - spec.cutoff_nm));
}

CovariateHistory simulate_weather(const WeatherSpec& spec) {
  spec.validate();
  CovariateHistory h;
  h.specimen_id = spec.specimen_id;
  CellArray shape{};
  for (int c = 0; c < kCellCount; ++c) shape[c] = weather_spectral_shape(spec, cell_center(c));

  const long long per_day = kSecondsPerDay / kRawIntervalSeconds;
  const double two_pi = 2.0 * std::numbers::pi;
  const double daylight = spec.sunset_h - spec.sunrise_h;
  h.records.reserve(static_cast<std::size_t>(spec.n_days * per_day));
  for (int day = 0; day < spec.n_days; ++day) {
    const long long day_start = spec.start_s + day * kSecondsPerDay;
    // days since 1970-01-01 modulo a year stands in for the day of year
    const double doy = std::fmod(static_cast<double>(day_start / kSecondsPerDay) + 0.5, 365.25);
    const double season = std::cos(two_pi * (doy - spec.seasonal_peak_day) / 365.25);
    const double uv_season = (1.0 + spec.seasonal_amplitude * season) / (1.0 + spec.seasonal_amplitude);
    StreamRng day_rng(spec.seed, static_cast<std::uint64_t>(day_start));
    const double cloud = spec.cloudiness > 0.0 ? 1.0 - spec.cloudiness * day_rng.uniform() : 1.0;
    for (long long k = 0; k < per_day; ++k) {
      CovariateRecord r;
      r.time_s = day_start + k * kRawIntervalSeconds;
      const double hour = (static_cast<double>(k) + 0.5) * kRawIntervalSeconds / 3600.0;
      double sun = 0.0;
      if (hour > spec.sunrise_h && hour < spec.sunset_h) sun = std::sin(std::numbers::pi * (hour - spec.sunrise_h) / daylight);
      const double level = spec.peak_dosage * uv_season * cloud * sun;
      for (int c = 0; c < kCellCount; ++c) r.dosage[c] = level * shape[c];
      const double diurnal = std::sin(two_pi * (hour - 9.0) / 24.0);
      r.temp_c = spec.temp_mean_c + spec.temp_seasonal_c * season + spec.temp_daily_c * diurnal;
      r.rh_pct = std::clamp(spec.rh_mean_pct + spec.rh_seasonal_pct * season - spec.rh_daily_pct * diurnal, 0.0, 100.0);
      h.records.push_back(r);
    }
  }

  if (spec.missing_fraction > 0.0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < h.records.size(); ++i) {
      StreamRng rng(spec.seed ^ 0x5bd1e995ULL, i);
      if (rng.uniform() >= spec.missing_fraction) continue;
      auto& r = h.records[i];
      switch (static_cast<int>(rng.uniform() * 3.0)) {
        case 0: r.temp_c = nan; break;
        case 1: r.rh_pct = nan; break;
        default: r.dosage.fill(nan); break;
      }
    }
  }
  return h;
}

OutdoorSpecimen simulate_outdoor(const BinnedCovariates& binned, const CombinedParams& truth,
                                 const OutdoorSimOptions& options) {
  OutdoorSpecimen out;
  out.id = options.specimen_id;
  out.weather_id = binned.specimen_id;
  const PredictionBand path = predict_path(binned, truth, 0.0, options.rule);
  StreamRng rng(options.seed, string_key(options.specimen_id));
  out.v = options.draw_v ? truth.sigma_v * rng.normal() : options.fixed_v;
  if (options.times_h.empty()) {
    const double last = path.times_h.back();
    double t = 3.0 * 24.0;
    for (int i = 0; t <= last; ++i) {
      out.times_h.push_back(t);
      t += (i % 2 == 0 ? 4.0 : 3.0) * 24.0;
    }
  } else {
    out.times_h = options.times_h;
  }
  const double scale = std::exp(out.v);
  for (double t : out.times_h) {
    const double latent = scale * damage_at(path, t);
    out.latent.push_back(latent);
    out.measured.push_back(options.add_noise ? latent + truth.sigma_eps * rng.normal() : latent);
  }
  return out;
}

OutdoorSpecimen simulate_outdoor(const CovariateHistory& history, const CombinedParams& truth,
                                 const OutdoorSimOptions& options) {
  return simulate_outdoor(bin_covariates(history, options.bin_s), truth, options);
}

}  // namespace photodeg
