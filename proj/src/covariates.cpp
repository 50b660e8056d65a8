#include "photodeg/covariates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "photodeg/errors.hpp"

namespace photodeg {

namespace {

bool record_has_missing(const CovariateRecord& r) {
  if (std::isnan(r.temp_c) || std::isnan(r.rh_pct)) return true;
  return std::any_of(r.dosage.begin(), r.dosage.end(), [](double d) { return std::isnan(d); });
}

long long floor_div(long long a, long long b) {
  long long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

void CovariateHistory::validate() const {
  if (raw_interval_s <= 0) throw ConfigurationError("covariate history: raw interval must be positive");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.time_s <= records[i - 1].time_s) {
      std::ostringstream os;
      os << "covariate history " << specimen_id << ": timestamps not strictly increasing at record " << i;
      throw ValidationError(os.str());
    }
    if (!std::isnan(r.temp_c) && (r.temp_c < -100.0 || r.temp_c > 100.0))
      throw ValidationError("covariate history: temperature outside physical bounds");
    if (!std::isnan(r.rh_pct) && (r.rh_pct < 0.0 || r.rh_pct > 100.0))
      throw ValidationError("covariate history: RH outside [0, 100]");
    for (double d : r.dosage)
      if (!std::isnan(d) && (d < 0.0 || !std::isfinite(d)))
        throw ValidationError("covariate history: dosage must be finite and nonnegative");
  }
}

bool CovariateHistory::has_missing() const {
  return std::any_of(records.begin(), records.end(), record_has_missing);
}

double CovariateHistory::missing_fraction() const {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(), record_has_missing);
  return static_cast<double>(n) / static_cast<double>(records.size());
}

CovariateHistory impute_covariates(const CovariateHistory& history, const ImputeOptions& options) {
  history.validate();
  if (!history.has_missing()) return history;

  const double frac = history.missing_fraction();
  if (frac > options.max_missing_fraction) {
    std::ostringstream os;
    os << "impute_covariates: missing fraction " << frac << " exceeds cap " << options.max_missing_fraction;
    throw MissingDataError(os.str());
  }

  const auto& src = history.records;
  const std::size_t n = src.size();

  // A run of consecutive missing values longer than the donor window cannot
  // be filled from nearby days.
  auto check_runs = [&](auto&& is_missing, const char* what) {
    std::size_t i = 0;
    while (i < n) {
      if (!is_missing(src[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < n && is_missing(src[j + 1])) ++j;
      const long long span = src[j].time_s - src[i].time_s + history.raw_interval_s;
      if (span > options.max_window_s) {
        std::ostringstream os;
        os << "impute_covariates: " << what << " missing for " << span / 3600.0
           << " h starting at t=" << src[i].time_s << ", longer than the imputation window";
        throw MissingDataError(os.str());
      }
      i = j + 1;
    }
  };
  check_runs([](const CovariateRecord& r) { return std::isnan(r.temp_c); }, "temperature");
  check_runs([](const CovariateRecord& r) { return std::isnan(r.rh_pct); }, "RH");
  check_runs([](const CovariateRecord& r) {
    return std::any_of(r.dosage.begin(), r.dosage.end(), [](double d) { return std::isnan(d); });
  }, "UV dosage");

  auto index_of = [&](long long t) -> std::ptrdiff_t {
    auto it = std::lower_bound(src.begin(), src.end(), t,
                               [](const CovariateRecord& r, long long v) { return r.time_s < v; });
    if (it == src.end() || it->time_s != t) return -1;
    return it - src.begin();
  };

  // Mean of the observed values at the same time of day within the window.
  auto donor_mean = [&](std::size_t i, auto&& get) -> double {
    const long long max_days = options.max_window_s / kSecondsPerDay;
    double sum = 0.0;
    int count = 0;
    for (long long k = -max_days; k <= max_days; ++k) {
      if (k == 0) continue;
      const auto j = index_of(src[i].time_s + k * kSecondsPerDay);
      if (j < 0) continue;
      const double v = get(src[static_cast<std::size_t>(j)]);
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    return count > 0 ? sum / count : NAN;
  };

  CovariateHistory out = history;
  std::vector<long long> failed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = src[i];
    auto& o = out.records[i];
    bool ok = true;
    if (std::isnan(r.temp_c)) {
      o.temp_c = donor_mean(i, [](const CovariateRecord& x) { return x.temp_c; });
      ok &= !std::isnan(o.temp_c);
    }
    if (std::isnan(r.rh_pct)) {
      o.rh_pct = donor_mean(i, [](const CovariateRecord& x) { return x.rh_pct; });
      ok &= !std::isnan(o.rh_pct);
    }
    for (int c = 0; c < kCellCount; ++c) {
      if (!std::isnan(r.dosage[c])) continue;
      double before = NAN, after = NAN;
      for (std::size_t j = i; j-- > 0;)
        if (!std::isnan(src[j].dosage[c])) {
          before = src[j].dosage[c];
          break;
        }
      for (std::size_t j = i + 1; j < n; ++j)
        if (!std::isnan(src[j].dosage[c])) {
          after = src[j].dosage[c];
          break;
        }
      if (before == 0.0 && after == 0.0) {
        o.dosage[c] = 0.0;
      } else {
        o.dosage[c] = donor_mean(i, [c](const CovariateRecord& x) { return x.dosage[c]; });
        ok &= !std::isnan(o.dosage[c]);
      }
    }
    if (!ok) failed.push_back(r.time_s);
  }
  if (!failed.empty()) {
    std::ostringstream os;
    os << "impute_covariates: no donor observations for " << failed.size() << " record(s), first at t="
       << failed.front();
    throw ImputationError(os.str(), std::move(failed));
  }
  return out;
}

BinnedCovariates bin_covariates(const CovariateHistory& history, long long bin_s, long long max_gap_s) {
  history.validate();
  if (bin_s <= 0 || bin_s % history.raw_interval_s != 0) {
    std::ostringstream os;
    os << "bin width " << bin_s << " s is not a positive multiple of the raw interval "
       << history.raw_interval_s << " s";
    throw ConfigurationError(os.str());
  }
  if (history.records.empty()) throw MissingDataError("bin_covariates: empty covariate history");

  BinnedCovariates out;
  out.specimen_id = history.specimen_id;
  out.bin_s = bin_s;
  out.origin_s = floor_div(history.records.front().time_s, bin_s) * bin_s;

  const auto& recs = history.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (record_has_missing(r)) {
      std::ostringstream os;
      os << "bin_covariates: missing value at t=" << r.time_s << "; impute the history first";
      throw MissingDataError(os.str());
    }
    if (i > 0 && r.time_s - recs[i - 1].time_s > max_gap_s) {
      std::ostringstream os;
      os << "bin_covariates: gap of " << (r.time_s - recs[i - 1].time_s) / 3600.0
         << " h before t=" << r.time_s << " exceeds the imputation window";
      throw MissingDataError(os.str());
    }
    const long long start = floor_div(r.time_s, bin_s) * bin_s;
    if (out.bins.empty() || out.bins.back().start_s != start) {
      CovariateBin b;
      b.start_s = start;
      b.end_s = start + bin_s;
      out.bins.push_back(b);
    }
    auto& b = out.bins.back();
    b.mean_temp_c += r.temp_c;
    b.mean_rh_pct += r.rh_pct;
    ++b.record_count;
    for (int c = 0; c < kCellCount; ++c) b.dosage[c] += r.dosage[c];
  }
  for (auto& b : out.bins) {
    b.mean_temp_c /= b.record_count;
    b.mean_rh_pct /= b.record_count;
  }
  return out;
}

CellArray cell_weights(double beta_lambda) {
  CellArray w{};
  for (int c = 0; c < kCellCount; ++c) w[c] = std::exp(beta_lambda * cell_center(c));
  return w;
}

EffectiveDosageBins incremental_effective_dosage(const CovariateHistory& history, double beta_lambda,
                                                 long long bin_s) {
  EffectiveDosageBins out;
  out.binned = bin_covariates(history, bin_s);
  const CellArray w = cell_weights(beta_lambda);
  out.increments.reserve(out.binned.bins.size());
  for (const auto& b : out.binned.bins) {
    CellArray inc{};
    for (int c = 0; c < kCellCount; ++c) inc[c] = b.dosage[c] * w[c];
    out.increments.push_back(inc);
  }
  return out;
}

}  // namespace photodeg
