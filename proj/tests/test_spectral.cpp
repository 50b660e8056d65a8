#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "photodeg/errors.hpp"
#include "photodeg/spectral.hpp"

using namespace photodeg;

namespace {

SpectralCurve flat_lamp(double lo = 296.0, double hi = 536.0, double value = 1.0) {
  std::vector<double> g, v;
  for (double x = lo; x <= hi + 1e-9; x += 1.0) {
    g.push_back(x);
    v.push_back(value);
  }
  return SpectralCurve(g, v);
}

double sum(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0); }

}  // namespace

TEST(SpectralCurve, RejectsBadGrids) {
  EXPECT_THROW(SpectralCurve({300.0}, {1.0}), DomainError);
  EXPECT_THROW(SpectralCurve({300.0, 300.0}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(SpectralCurve({300.0, 302.0}, {1.0, -1.0}), DomainError);
  EXPECT_THROW(SpectralCurve({300.0, 302.0}, {1.0}), DomainError);
}

TEST(FilteredIrradiance, IdentityLampPassesWindowOnly) {
  const auto out = filtered_irradiance(flat_lamp(), FilterStack::nominal(BandPass::k306, 1.0));
  for (std::size_t i = 0; i < out.grid.size(); ++i) {
    const double expected = (out.grid[i] >= 303.0 && out.grid[i] <= 309.0) ? 1.0 : 0.0;
    EXPECT_EQ(out.values[i], expected) << out.grid[i];
  }
}

TEST(FilteredIrradiance, NdScalesInsideWindow) {
  const auto out = filtered_irradiance(flat_lamp(), FilterStack::nominal(BandPass::k306, 0.10));
  for (std::size_t i = 0; i < out.grid.size(); ++i) {
    const bool inside = out.grid[i] >= 303.0 && out.grid[i] <= 309.0;
    EXPECT_DOUBLE_EQ(out.values[i], inside ? 0.1 : 0.0);
  }
}

TEST(FilteredIrradiance, TwoPeakLampMatchesPointwiseProduct) {
  std::vector<double> g, v;
  for (double x = 296.0; x <= 536.0; x += 2.0) {
    g.push_back(x);
    v.push_back(std::exp(-0.5 * std::pow((x - 340.0) / 6.0, 2)) + 0.5 * std::exp(-0.5 * std::pow((x - 365.0) / 4.0, 2)));
  }
  const SpectralCurve lamp(g, v);
  const auto out = filtered_irradiance(lamp, FilterStack::nominal(BandPass::k353, 0.6));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double expected = (g[i] >= 332.0 && g[i] <= 374.0) ? 0.6 * v[i] : 0.0;
    EXPECT_DOUBLE_EQ(out.values[i], expected);
  }
}

TEST(FilteredIrradiance, GridMustCoverWindow) {
  EXPECT_THROW(filtered_irradiance(flat_lamp(310.0, 536.0), FilterStack::nominal(BandPass::k306, 1.0)), DomainError);
}

TEST(AreaProportions, FlatCurveSplitsEvenly) {
  const auto split = area_proportions(flat_lamp(), nominal_window(BandPass::k306));
  ASSERT_EQ(split.proportions.size(), 3u);
  for (double p : split.proportions) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(split.centers, (std::vector<double>{304.0, 306.0, 308.0}));
}

TEST(AreaProportions, TriangleMatchesAnalyticAreas) {
  // Peak 1 at 326, zero at 320 and 332; cells of 2 nm.
  std::vector<double> g, v;
  for (double x = 316.0; x <= 336.0; x += 1.0) {
    g.push_back(x);
    v.push_back(std::max(0.0, 1.0 - std::abs(x - 326.0) / 6.0));
  }
  const auto split = area_proportions(SpectralCurve(g, v), nominal_window(BandPass::k326));
  ASSERT_EQ(split.proportions.size(), 6u);
  // Exact integral of the triangle over [a, b].
  auto integral = [](double a, double b) {
    auto F = [](double x) {
      const double d = x - 326.0;
      return d < 0 ? d + d * d / 12.0 : d - d * d / 12.0;
    };
    return F(b) - F(a);
  };
  const double total = integral(320.0, 332.0);
  for (int k = 0; k < 6; ++k) {
    const double a = 320.0 + 2.0 * k;
    EXPECT_NEAR(split.proportions[static_cast<std::size_t>(k)], integral(a, a + 2.0) / total, 1e-14);
  }
  EXPECT_NEAR(split.proportions[0], split.proportions[5], 1e-15);
  EXPECT_NEAR(split.proportions[2], split.proportions[3], 1e-15);
  EXPECT_GT(split.proportions[2], split.proportions[1]);
}

TEST(AreaProportions, InteriorZeroStillNormalized) {
  std::vector<double> g = {300, 302, 304, 306, 308, 310};
  std::vector<double> v = {1, 2, 3, 0, 2, 1};
  const auto split = area_proportions(SpectralCurve(g, v), {302.0, 310.0});
  EXPECT_NEAR(sum(split.proportions), 1.0, 1e-12);
  // Trapezoid areas 5, 3, 2, 3 over the four cells.
  const std::vector<double> expected = {5.0 / 13, 3.0 / 13, 2.0 / 13, 3.0 / 13};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(split.proportions[k], expected[k], 1e-14);
}

TEST(AreaProportions, AllZeroIsDegenerate) {
  EXPECT_THROW(area_proportions(flat_lamp(296.0, 536.0, 0.0), nominal_window(BandPass::k306)), DegenerateInputError);
}

TEST(AreaProportions, RandomCurvesSumToOne) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g, v;
    for (double x = 296.0; x <= 536.0; x += 1.0) {
      g.push_back(x);
      v.push_back(u(gen));
    }
    for (BandPass bp : kAllBandPasses) {
      const auto split = area_proportions(SpectralCurve(g, v), nominal_window(bp));
      EXPECT_NEAR(sum(split.proportions), 1.0, 1e-10);
      for (double p : split.proportions) EXPECT_GE(p, 0.0);
    }
  }
}

TEST(WavelengthDosage, SplitsAndInterpolates) {
  DosageSeries s{{0.0, 10.0, 20.0}, {0.0, 10.0, 20.0}};
  WavelengthSplit split{{303.0, 307.0}, {304.0, 306.0}, {0.5, 0.5}};
  DosageSeries hundred{{0.0, 1.0}, {100.0, 100.0}};
  const auto a = wavelength_dosage(hundred, split, 0.5);
  EXPECT_DOUBLE_EQ(a[0].dosage, 50.0);
  EXPECT_DOUBLE_EQ(a[1].dosage, 50.0);
  const auto b = wavelength_dosage(s, split, 15.0);
  EXPECT_DOUBLE_EQ(b[0].dosage + b[1].dosage, 15.0);
  EXPECT_THROW(wavelength_dosage(s, split, 21.0), ExtrapolationError);
  EXPECT_THROW(wavelength_dosage(s, split, -1.0), ExtrapolationError);
}

TEST(WavelengthDosage, SumEqualsInterpolatedTotal) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    DosageSeries s;
    double t = 0.0, d = u(gen);
    for (int i = 0; i < 20; ++i) {
      s.times.push_back(t);
      s.cumulative.push_back(d);
      t += 1.0 + u(gen);
      d += 5.0 * u(gen);
    }
    std::vector<double> g, v;
    for (double x = 296.0; x <= 536.0; x += 1.0) {
      g.push_back(x);
      v.push_back(u(gen));
    }
    const auto split = area_proportions(SpectralCurve(g, v), nominal_window(BandPass::k353));
    const double at = s.times.back() * u(gen);
    // Independent linear interpolation.
    std::size_t k = 0;
    while (s.times[k + 1] < at) ++k;
    const double f = (at - s.times[k]) / (s.times[k + 1] - s.times[k]);
    const double expected = s.cumulative[k] + f * (s.cumulative[k + 1] - s.cumulative[k]);
    double total = 0.0;
    for (const auto& c : wavelength_dosage(s, split, at)) total += c.dosage;
    EXPECT_NEAR(total, expected, 1e-12 * std::max(1.0, expected));
  }
}

TEST(EffectiveDosage, ZeroSlopeReturnsDosage) {
  DosageSeries s{{0.0, 10.0}, {0.0, 40.0}};
  const auto split = area_proportions(flat_lamp(), nominal_window(BandPass::k326));
  EXPECT_NEAR(effective_dosage_constant(s, split, 0.0, 5.0), 20.0, 1e-12);
  EXPECT_EQ(effective_dosage_constant(s, split, -0.03, 0.0), 0.0);
}

TEST(EffectiveDosage, SingleCellAt306) {
  DosageSeries s{{0.0, 1.0}, {1.0, 1.0}};
  WavelengthSplit split{{305.0, 307.0}, {306.0}, {1.0}};
  EXPECT_NEAR(effective_dosage_constant(s, split, -0.0297, 0.5), std::exp(-9.0882), 1e-15);
  EXPECT_NEAR(log_spectral_weight(split, -0.0297), -9.0882, 1e-12);
}

TEST(EffectiveDosage, MonotoneAndLinearInDosage) {
  DosageSeries s{{0.0, 5.0, 10.0, 20.0}, {0.0, 3.0, 3.0, 9.0}};
  DosageSeries doubled = s;
  for (double& d : doubled.cumulative) d *= 2.0;
  const auto split = area_proportions(flat_lamp(), nominal_window(BandPass::k452));
  double prev = -1.0;
  for (double t = 0.0; t <= 20.0; t += 0.25) {
    const double e = effective_dosage_constant(s, split, -0.03, t);
    EXPECT_GE(e, prev);
    EXPECT_NEAR(effective_dosage_constant(doubled, split, -0.03, t), 2.0 * e, 1e-15 + 1e-13 * e);
    prev = e;
  }
}

TEST(EffectiveDosage, ShorterWavelengthIsMoreEffective) {
  DosageSeries s{{0.0, 1.0}, {1.0, 1.0}};
  WavelengthSplit a{{320.0, 332.0}, {321.0, 331.0}, {0.5, 0.5}};
  WavelengthSplit b = a;
  b.proportions = {0.6, 0.4};
  EXPECT_GT(effective_dosage_constant(s, b, -0.0297, 0.0), effective_dosage_constant(s, a, -0.0297, 0.0));
}

TEST(LogSpectralWeight, MatchesDirectSum) {
  const auto split = area_proportions(flat_lamp(), nominal_window(BandPass::k452));
  double direct = 0.0;
  for (std::size_t i = 0; i < split.centers.size(); ++i)
    direct += split.proportions[i] * std::exp(-0.0297 * split.centers[i]);
  EXPECT_NEAR(log_spectral_weight(split, -0.0297), std::log(direct), 1e-12);
}

TEST(BandPass, NominalWindowsAndLookup) {
  EXPECT_EQ(nominal_window(BandPass::k353).lo, 332.0);
  EXPECT_EQ(nominal_window(BandPass::k452).hi, 531.0);
  EXPECT_EQ(band_pass_from_center(326.0), BandPass::k326);
  EXPECT_FALSE(band_pass_from_center(400.0).has_value());
  EXPECT_THROW(FilterStack::nominal(BandPass::k306, 0.0), DomainError);
}
