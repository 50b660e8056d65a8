#pragma once

// Spectral dosage bookkeeping: lamp/filter products, wavelength splits of
// aggregate dosage, and effective (quantum-yield weighted) dosage.

#include <optional>
#include <string>
#include <vector>

namespace photodeg {

// Tabulated nonnegative function of wavelength (nm). Between grid points
// the curve is linear.
struct SpectralCurve {
  std::vector<double> grid;
  std::vector<double> values;

  SpectralCurve() = default;
  SpectralCurve(std::vector<double> grid_nm, std::vector<double> vals);

  // Throws DomainError when the invariants do not hold.
  void validate() const;
  double value_at(double nm) const;
  double front() const { return grid.front(); }
  double back() const { return grid.back(); }
};

enum class BandPass { k306, k326, k353, k452 };

inline constexpr BandPass kAllBandPasses[] = {BandPass::k306, BandPass::k326,
                                              BandPass::k353, BandPass::k452};

struct WavelengthWindow {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double nm) const { return nm >= lo && nm <= hi; }
};

double nominal_center(BandPass bp);
// Nominal full-width windows of the four bandpass filters.
WavelengthWindow nominal_window(BandPass bp);
std::optional<BandPass> band_pass_from_center(double center_nm);
std::string to_string(BandPass bp);

struct FilterStack {
  BandPass bp = BandPass::k306;
  WavelengthWindow window;
  double nd_fraction = 1.0;

  static FilterStack nominal(BandPass bp, double nd_fraction);
  void validate() const;
};

// Cumulative dosage recorded against exposure time (hours).
struct DosageSeries {
  std::vector<double> times;
  std::vector<double> cumulative;

  void validate() const;
  // Linear interpolation in time; throws ExtrapolationError outside the
  // recorded range.
  double at(double t) const;
};

// Proportion of a bandpass window's dosage falling in each 2 nm cell.
struct WavelengthSplit {
  WavelengthWindow window;
  std::vector<double> centers;
  std::vector<double> proportions;
};

inline constexpr double kCellWidthNm = 2.0;

// Lamp times hard bandpass window times ND fraction, on the lamp grid.
SpectralCurve filtered_irradiance(const SpectralCurve& lamp, const FilterStack& filters);

// Trapezoid areas of the filtered curve over consecutive cells of the
// window, normalized to sum to one.
WavelengthSplit area_proportions(const SpectralCurve& filtered, WavelengthWindow window,
                                 double cell_width = kCellWidthNm);

// Every cell gets the same share; used where the dosage density is taken
// as flat over the window.
WavelengthSplit uniform_split(WavelengthWindow window, double cell_width = kCellWidthNm);

struct CellDosage {
  double wavelength = 0.0;
  double dosage = 0.0;
};

std::vector<CellDosage> wavelength_dosage(const DosageSeries& series, const WavelengthSplit& split,
                                          double t);

// log of sum_cells P(lambda) exp(beta_lambda * lambda).
double log_spectral_weight(const WavelengthSplit& split, double beta_lambda);

// sum_cells D(t) P(lambda) exp(beta_lambda * lambda).
double effective_dosage_constant(const DosageSeries& series, const WavelengthSplit& split,
                                 double beta_lambda, double t);

}  // namespace photodeg
