#include "photodeg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "photodeg/errors.hpp"

namespace photodeg {

void AccelDataset::validate() const {
  std::set<std::string> seen;
  for (const auto& s : specimens) {
    if (!seen.insert(s.id).second) throw ValidationError("duplicate specimen id '" + s.id + "'");
    s.conditions.validate();
    s.dosage.validate();
    for (std::size_t j = 0; j < s.measurements.size(); ++j) {
      const auto& m = s.measurements[j];
      if (!std::isfinite(m.time_h) || !std::isfinite(m.damage))
        throw ValidationError("specimen '" + s.id + "': non-finite measurement");
      if (j > 0 && !(m.time_h > s.measurements[j - 1].time_h))
        throw ValidationError("specimen '" + s.id + "': measurement times not strictly increasing");
    }
  }
}

std::size_t AccelDataset::measurement_count() const {
  std::size_t n = 0;
  for (const auto& s : specimens) n += s.measurements.size();
  return n;
}

AccelDataset clean(const AccelDataset& dataset, const CleanOptions& options, CleanReport* report) {
  CleanReport local;
  CleanReport& rep = report ? *report : local;
  rep = CleanReport{};
  const std::set<std::string> excluded(dataset.exclusions.begin(), dataset.exclusions.end());

  AccelDataset out;
  out.splits = dataset.splits;
  out.exclusions = dataset.exclusions;
  for (const auto& s : dataset.specimens) {
    if (excluded.count(s.id)) {
      rep.excluded.push_back(s.id);
      continue;
    }
    AccelSpecimen kept = s;
    kept.measurements.clear();
    for (const auto& m : s.measurements) {
      if (m.damage >= options.floor)
        kept.measurements.push_back(m);
      else
        ++rep.dropped_points;
    }
    if (kept.measurements.size() < options.min_points) {
      rep.dropped_too_short.push_back(s.id);
      continue;
    }
    rep.retained_points[s.id] = kept.measurements.size();
    out.specimens.push_back(std::move(kept));
  }
  return out;
}

AccelDataset drop_condition(const AccelDataset& dataset, double temp_c, double rh_pct) {
  AccelDataset out = dataset;
  std::erase_if(out.specimens, [&](const AccelSpecimen& s) {
    return std::abs(s.conditions.temp_c - temp_c) < 1e-9 && std::abs(s.conditions.rh_pct - rh_pct) < 1e-9;
  });
  return out;
}

std::map<BandPass, WavelengthSplit> default_splits(const SpectralCurve& lamp) {
  std::map<BandPass, WavelengthSplit> splits;
  for (BandPass bp : kAllBandPasses) {
    const auto window = nominal_window(bp);
    if (bp == BandPass::k452) {
      splits[bp] = uniform_split(window);
    } else {
      splits[bp] = area_proportions(filtered_irradiance(lamp, FilterStack::nominal(bp, 1.0)), window);
    }
  }
  return splits;
}

}  // namespace photodeg
