#include "photodeg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "photodeg/errors.hpp"

namespace photodeg {

SpectralCurve::SpectralCurve(std::vector<double> grid_nm, std::vector<double> vals)
    : grid(std::move(grid_nm)), values(std::move(vals)) {
  validate();
}

void SpectralCurve::validate() const {
  if (grid.size() != values.size()) throw DomainError("spectral curve: grid/value size mismatch");
  if (grid.size() < 2) throw DomainError("spectral curve: need at least two grid points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw DomainError("spectral curve: non-finite wavelength");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw DomainError("spectral curve: grid must be strictly increasing");
    if (!std::isfinite(values[i]) || values[i] < 0.0)
      throw DomainError("spectral curve: values must be finite and nonnegative");
  }
}

double SpectralCurve::value_at(double nm) const {
  if (nm < grid.front() || nm > grid.back()) {
    std::ostringstream os;
    os << "spectral curve: " << nm << " nm outside [" << grid.front() << ", " << grid.back() << "]";
    throw DomainError(os.str());
  }
  auto it = std::upper_bound(grid.begin(), grid.end(), nm);
  if (it == grid.end()) return values.back();
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double f = (nm - grid[lo]) / (grid[hi] - grid[lo]);
  return values[lo] + f * (values[hi] - values[lo]);
}

double nominal_center(BandPass bp) {
  switch (bp) {
    case BandPass::k306: return 306.0;
    case BandPass::k326: return 326.0;
    case BandPass::k353: return 353.0;
    case BandPass::k452: return 452.0;
  }
  return 0.0;
}

WavelengthWindow nominal_window(BandPass bp) {
  switch (bp) {
    case BandPass::k306: return {303.0, 309.0};
    case BandPass::k326: return {320.0, 332.0};
    case BandPass::k353: return {332.0, 374.0};
    case BandPass::k452: return {373.0, 531.0};
  }
  return {};
}

std::optional<BandPass> band_pass_from_center(double center_nm) {
  for (BandPass bp : kAllBandPasses)
    if (std::abs(nominal_center(bp) - center_nm) < 0.5) return bp;
  return std::nullopt;
}

std::string to_string(BandPass bp) {
  return std::to_string(static_cast<int>(nominal_center(bp)));
}

FilterStack FilterStack::nominal(BandPass bp, double nd_fraction) {
  FilterStack f{bp, nominal_window(bp), nd_fraction};
  f.validate();
  return f;
}

void FilterStack::validate() const {
  if (!(nd_fraction > 0.0 && nd_fraction <= 1.0))
    throw DomainError("filter stack: ND fraction must lie in (0, 1]");
  if (!(window.hi > window.lo)) throw DomainError("filter stack: empty bandpass window");
}

void DosageSeries::validate() const {
  if (times.size() != cumulative.size() || times.empty())
    throw DomainError("dosage series: times and cumulative values must be nonempty and equal length");
  if (cumulative.front() < 0.0) throw DomainError("dosage series: negative initial dosage");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DomainError("dosage series: times must be strictly increasing");
    if (cumulative[i] < cumulative[i - 1]) throw DomainError("dosage series: cumulative dosage decreased");
  }
}

double DosageSeries::at(double t) const {
  if (times.empty()) throw DomainError("dosage series: empty");
  if (t < times.front() || t > times.back()) {
    std::ostringstream os;
    os << "dosage series: t=" << t << " h outside recorded range [" << times.front() << ", "
       << times.back() << "]";
    throw ExtrapolationError(os.str());
  }
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.end()) return cumulative.back();
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  if (hi == 0) return cumulative.front();
  const std::size_t lo = hi - 1;
  const double f = (t - times[lo]) / (times[hi] - times[lo]);
  return cumulative[lo] + f * (cumulative[hi] - cumulative[lo]);
}

SpectralCurve filtered_irradiance(const SpectralCurve& lamp, const FilterStack& filters) {
  lamp.validate();
  filters.validate();
  if (lamp.front() > filters.window.lo || lamp.back() < filters.window.hi) {
    std::ostringstream os;
    os << "filtered_irradiance: lamp grid [" << lamp.front() << ", " << lamp.back()
       << "] does not cover bandpass window [" << filters.window.lo << ", " << filters.window.hi << "]";
    throw DomainError(os.str());
  }
  SpectralCurve out;
  out.grid = lamp.grid;
  out.values.resize(lamp.values.size());
  for (std::size_t i = 0; i < lamp.grid.size(); ++i) {
    const double transmission = filters.window.contains(lamp.grid[i]) ? 1.0 : 0.0;
    out.values[i] = lamp.values[i] * transmission * filters.nd_fraction;
  }
  return out;
}

namespace {

// Integral of the piecewise-linear curve over [a, b].
double trapezoid_area(const SpectralCurve& c, double a, double b) {
  std::vector<double> knots{a};
  for (double g : c.grid)
    if (g > a && g < b) knots.push_back(g);
  knots.push_back(b);
  double area = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    area += 0.5 * (knots[i] - knots[i - 1]) * (c.value_at(knots[i - 1]) + c.value_at(knots[i]));
  }
  return area;
}

std::vector<WavelengthWindow> cells_of(WavelengthWindow window, double cell_width) {
  if (!(cell_width > 0.0)) throw DomainError("cell width must be positive");
  if (!(window.hi > window.lo)) throw DomainError("empty wavelength window");
  std::vector<WavelengthWindow> cells;
  for (double lo = window.lo; lo < window.hi - 1e-9; lo += cell_width)
    cells.push_back({lo, std::min(lo + cell_width, window.hi)});
  return cells;
}

}  // namespace

WavelengthSplit area_proportions(const SpectralCurve& filtered, WavelengthWindow window,
                                 double cell_width) {
  filtered.validate();
  if (window.lo < filtered.front() || window.hi > filtered.back())
    throw DomainError("area_proportions: window outside the curve's grid");
  const auto inside = std::count_if(filtered.grid.begin(), filtered.grid.end(),
                                    [&](double g) { return window.contains(g); });
  if (inside < 2) throw DomainError("area_proportions: fewer than two grid points inside the window");

  WavelengthSplit split;
  split.window = window;
  double total = 0.0;
  for (const auto& cell : cells_of(window, cell_width)) {
    const double area = trapezoid_area(filtered, cell.lo, cell.hi);
    split.centers.push_back(0.5 * (cell.lo + cell.hi));
    split.proportions.push_back(area);
    total += area;
  }
  if (!(total > 0.0)) throw DegenerateInputError("area_proportions: curve is zero over the window");
  for (double& p : split.proportions) p /= total;
  return split;
}

WavelengthSplit uniform_split(WavelengthWindow window, double cell_width) {
  WavelengthSplit split;
  split.window = window;
  double total = 0.0;
  for (const auto& cell : cells_of(window, cell_width)) {
    split.centers.push_back(0.5 * (cell.lo + cell.hi));
    split.proportions.push_back(cell.hi - cell.lo);
    total += cell.hi - cell.lo;
  }
  for (double& p : split.proportions) p /= total;
  return split;
}

std::vector<CellDosage> wavelength_dosage(const DosageSeries& series, const WavelengthSplit& split,
                                          double t) {
  const double total = series.at(t);
  std::vector<CellDosage> out;
  out.reserve(split.centers.size());
  for (std::size_t i = 0; i < split.centers.size(); ++i)
    out.push_back({split.centers[i], total * split.proportions[i]});
  return out;
}

double log_spectral_weight(const WavelengthSplit& split, double beta_lambda) {
  if (split.centers.empty()) throw DegenerateInputError("empty wavelength split");
  // log-sum-exp keeps the sum representable for wide windows.
  double peak = -INFINITY;
  for (std::size_t i = 0; i < split.centers.size(); ++i)
    if (split.proportions[i] > 0.0)
      peak = std::max(peak, std::log(split.proportions[i]) + beta_lambda * split.centers[i]);
  if (!std::isfinite(peak)) throw DegenerateInputError("wavelength split has no positive proportion");
  double acc = 0.0;
  for (std::size_t i = 0; i < split.centers.size(); ++i)
    if (split.proportions[i] > 0.0)
      acc += std::exp(std::log(split.proportions[i]) + beta_lambda * split.centers[i] - peak);
  return peak + std::log(acc);
}

double effective_dosage_constant(const DosageSeries& series, const WavelengthSplit& split,
                                 double beta_lambda, double t) {
  const double total = series.at(t);
  double acc = 0.0;
  for (std::size_t i = 0; i < split.centers.size(); ++i)
    acc += split.proportions[i] * std::exp(beta_lambda * split.centers[i]);
  return total * acc;
}

}  // namespace photodeg
