#pragma once

// Constant-condition accelerated test data and the cleaning rules applied
// before model fitting.

#include <map>
#include <string>
#include <vector>

#include "photodeg/path_model.hpp"
#include "photodeg/spectral.hpp"

namespace photodeg {

inline constexpr double kDamageFloor = -0.6;

struct Measurement {
  double time_h = 0.0;
  double damage = 0.0;
};

struct AccelSpecimen {
  std::string id;
  std::string group_id;
  ExposureConditions conditions;
  std::vector<Measurement> measurements;
  DosageSeries dosage;
};

struct AccelDataset {
  std::vector<AccelSpecimen> specimens;
  // Wavelength split of each bandpass window; the 353 nm entry is unused by
  // the combined model but kept for completeness.
  std::map<BandPass, WavelengthSplit> splits;
  std::vector<std::string> exclusions;

  void validate() const;
  std::size_t measurement_count() const;
};

struct CleanOptions {
  double floor = kDamageFloor;
  std::size_t min_points = 3;
};

struct CleanReport {
  std::map<std::string, std::size_t> retained_points;
  std::vector<std::string> excluded;
  std::vector<std::string> dropped_too_short;  // warnings
  std::size_t dropped_points = 0;
};

// Drops measurements below the floor and the excluded specimens; specimens
// left with fewer than min_points measurements are dropped with a warning.
AccelDataset clean(const AccelDataset& dataset, const CleanOptions& options = {},
                   CleanReport* report = nullptr);

// Removes every specimen exposed at the given temperature and RH.
AccelDataset drop_condition(const AccelDataset& dataset, double temp_c, double rh_pct);

// Splits for the four filters from a lamp curve: trapezoid areas for the
// narrow filters, uniform cells for the wide 452 nm window.
std::map<BandPass, WavelengthSplit> default_splits(const SpectralCurve& lamp);

}  // namespace photodeg
