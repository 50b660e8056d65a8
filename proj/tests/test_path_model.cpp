#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "photodeg/errors.hpp"
#include "photodeg/path_model.hpp"

using namespace photodeg;

TEST(Phi, ConstantWithoutSlope) {
  EXPECT_DOUBLE_EQ(phi(306.0, 1.5, 0.0), std::exp(1.5));
  EXPECT_DOUBLE_EQ(phi(452.0, 1.5, 0.0), std::exp(1.5));
}

TEST(Phi, RatioAcrossFilters) {
  EXPECT_NEAR(phi(306.0, 0.0, -0.0297) / phi(452.0, 0.0, -0.0297), 76.5, 0.1);
  // Same ordering as the categorical spectral estimates.
  const double b = -0.0297;
  EXPECT_GT(phi(306, 0, b), phi(326, 0, b));
  EXPECT_GT(phi(326, 0, b), phi(353, 0, b));
  EXPECT_GT(phi(353, 0, b), phi(452, 0, b));
}

TEST(SigmaOfLambda, PublishedCurve) {
  EXPECT_NEAR(sigma_of_lambda(306.0, 0.8019, 7.6776, -0.0260), 1.559, 5e-4);
  EXPECT_DOUBLE_EQ(sigma_of_lambda(400.0, 0.5, 0.2, 0.0), 0.5 + std::exp(0.2));
  EXPECT_NEAR(sigma_of_lambda(1e5, 0.8019, 7.6776, -0.0260), 0.8019, 1e-12);
  for (double l = 300.0; l < 532.0; l += 2.0) {
    EXPECT_GT(sigma_of_lambda(l, 0.8019, 7.6776, -0.0260), sigma_of_lambda(l + 2.0, 0.8019, 7.6776, -0.0260));
    EXPECT_GT(sigma_of_lambda(l, 0.8019, 7.6776, -0.0260), 0.8019);
  }
}

TEST(Arrhenius, Differences) {
  const double e = 1945.6482;
  EXPECT_NEAR(arrhenius_log(45.0, e) - arrhenius_log(35.0, e), e * (1.0 / 308.15 - 1.0 / 318.15), 1e-12);
  EXPECT_NEAR(arrhenius_log(45.0, e) - arrhenius_log(35.0, e), 0.1985, 5e-4);
  EXPECT_NEAR(arrhenius_log(25.0, e) - arrhenius_log(35.0, e), -0.21177, 5e-5);
  EXPECT_EQ(arrhenius_log(10.0, 0.0), 0.0);
  for (double t = -20.0; t < 80.0; t += 5.0) EXPECT_LT(arrhenius_log(t, e), arrhenius_log(t + 5.0, e));
}

TEST(RhEffect, QuadraticAroundVertex) {
  const double b = -0.0005, r0 = 45.4748;
  EXPECT_EQ(rh_log_effect(r0, b, r0), 0.0);
  EXPECT_NEAR(rh_log_effect(0.0, b, r0) - rh_log_effect(25.0, b, r0), 0.824, 1e-3);
  EXPECT_NEAR(rh_log_effect(75.0, b, r0) - rh_log_effect(25.0, b, r0), 0.226, 1e-3);
  EXPECT_DOUBLE_EQ(rh_log_effect(r0 + 12.0, b, r0), rh_log_effect(r0 - 12.0, b, r0));
}

TEST(NdEffect, PowerLaw) {
  EXPECT_EQ(nd_log_effect(1.0, -0.5606), 0.0);
  EXPECT_EQ(nd_log_effect(0.4, 0.0), 0.0);
  // ND^1 from the filter itself times ND^p.
  EXPECT_NEAR(std::exp(std::log(0.8) + nd_log_effect(0.8, -0.5606)), 0.906, 1e-3);
  EXPECT_THROW(nd_log_effect(0.0, -0.5), DomainError);
}

TEST(ZCombined, Properties) {
  const auto p = CombinedParams::published();
  const ExposureConditions c{BandPass::k326, 1.0, 35.0, 25.0};
  const double split_term = -0.0297 * 326.0;
  const double sigma = sigma_of_lambda(326.0, p);
  const double z1 = z_combined(c, 2.0, 326.0, p, split_term);
  const double z2 = z_combined(c, 4.0, 326.0, p, split_term);
  EXPECT_NEAR(z2 - z1, std::log(2.0) / sigma, 1e-12);
  // Dosage putting the numerator at sigma gives z = 1.
  const double numerator_without_dose = condition_offset(1.0, 35.0, 25.0, p) + split_term;
  EXPECT_NEAR(z_combined(c, std::exp(sigma - numerator_without_dose), 326.0, p, split_term), 1.0, 1e-12);
  EXPECT_NEAR(z_combined(c, std::exp(-numerator_without_dose), 326.0, p, split_term), 0.0, 1e-12);
  EXPECT_THROW(z_combined(c, 0.0, 326.0, p, split_term), DomainError);
}

TEST(ZCombined, Uses353Parameter) {
  const auto p = CombinedParams::published();
  const ExposureConditions c{BandPass::k353, 0.4, 45.0, 75.0};
  const double expected = (condition_offset(0.4, 45.0, 75.0, p) + std::log(3.0) + p.b353) / sigma_of_lambda(353.0, p);
  EXPECT_NEAR(z_combined(c, 3.0, 353.0, p, 123.0), expected, 1e-12);
}

TEST(ZCombined, DosageScaleAbsorbedByIntercept) {
  auto p = CombinedParams::published();
  const ExposureConditions c{BandPass::k306, 0.6, 25.0, 50.0};
  const double z = z_combined(c, 0.7, 306.0, p, -9.0);
  p.eta0 -= std::log(5.0);
  EXPECT_NEAR(z_combined(c, 3.5, 306.0, p, -9.0), z, 1e-12);
}

TEST(DegradationPath, ShapeAndScaling) {
  EXPECT_DOUBLE_EQ(degradation_path(0.0, -0.6191, 0.0), -0.30955);
  EXPECT_NEAR(degradation_path(60.0, -0.6191, 0.2), -0.6191 * std::exp(0.2), 1e-15);
  EXPECT_NEAR(degradation_path(-800.0, -0.6191, 0.0), 0.0, 1e-300);
  for (double z = -10.0; z <= 10.0; z += 0.5) {
    EXPECT_NEAR(degradation_path(z, -0.6, std::log(2.0)), 2.0 * degradation_path(z, -0.6, 0.0), 1e-15);
    EXPECT_GT(degradation_path(z, -0.6, 0.0), degradation_path(z + 0.5, -0.6, 0.0));
    const double v = degradation_path(z, -0.6, 0.0);
    EXPECT_LT(v, 0.0);
    EXPECT_GT(v, -0.6);
  }
}

TEST(Derivatives, FiniteDifferenceAgreement) {
  const double h = 1e-5;
  for (double z : {-3.0, -0.4, 0.0, 1.2, 4.0}) {
    const double fd = (degradation_path(z + h, -0.6, 0.1) - degradation_path(z - h, -0.6, 0.1)) / (2 * h);
    EXPECT_NEAR(degradation_path_dz(z, -0.6, 0.1), fd, 1e-6 * std::abs(fd) + 1e-12);
  }
  for (double l : {306.0, 353.0, 452.0}) {
    const double fd = (sigma_of_lambda(l + h, 0.8, 7.7, -0.026) - sigma_of_lambda(l - h, 0.8, 7.7, -0.026)) / (2 * h);
    EXPECT_NEAR(sigma_of_lambda_derivative(l, 0.8, 7.7, -0.026), fd, 1e-6 * std::abs(fd));
  }
  for (double t : {25.0, 45.0}) {
    const double fd = (arrhenius_log(t + h, 1945.6) - arrhenius_log(t - h, 1945.6)) / (2 * h);
    EXPECT_NEAR(arrhenius_log_derivative(t, 1945.6), fd, 1e-6 * std::abs(fd));
  }
}

TEST(FailureTime, NeverCrossedWhenAsymptoteAboveThreshold) {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i);
  auto path = [](double t) { return degradation_path(std::log(t + 1e-9) - 2.0, -0.3, 0.0); };
  EXPECT_FALSE(failure_time(path, grid).has_value());
}

TEST(FailureTime, MatchesAnalyticInversion) {
  // Omega(t) = alpha / (1 + exp(-(log t - m) / s)); solve Omega = thr.
  const double alpha = -0.6191, m = 3.0, s = 0.9, thr = -0.40;
  auto path = [&](double t) { return degradation_path((std::log(t) - m) / s, alpha, 0.0); };
  const double exact = std::exp(m - s * std::log(alpha / thr - 1.0));
  std::vector<double> grid;
  for (double t = 1.0; t <= 500.0; t += 7.0) grid.push_back(t);
  const auto hit = failure_time(path, grid, thr);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->time, exact, 1e-6 * exact);
  EXPECT_FALSE(hit->multiple);
}

TEST(FailureTime, HalfwayThresholdAtZeroZ) {
  const double alpha = -0.6191;
  auto path = [&](double t) { return degradation_path(std::log(t / 40.0), alpha, 0.0); };
  std::vector<double> grid;
  for (double t = 1.0; t <= 200.0; t += 3.0) grid.push_back(t);
  const auto hit = failure_time(path, grid, alpha / 2.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->time, 40.0, 40.0 * 1e-6);
}

TEST(FailureTime, FlagsMultipleCrossings) {
  std::vector<double> grid;
  for (double t = 0.0; t <= 10.0; t += 0.1) grid.push_back(t);
  auto wavy = [](double t) { return -0.4 - 0.1 * std::sin(t); };
  const auto hit = failure_time(wavy, grid, -0.45);
  ASSERT_TRUE(hit.has_value());
  EXPECT_TRUE(hit->multiple);
  EXPECT_NEAR(hit->time, std::asin(0.5), 1e-6);
}

TEST(CombinedParams, Validity) {
  auto p = CombinedParams::published();
  p.sigma_eps = 0.01;
  EXPECT_TRUE(p.valid());
  p.sigma0 = 0.0;
  EXPECT_FALSE(p.valid());
  EXPECT_THROW(p.validate(), DomainError);
  auto q = CombinedParams::published();
  q.sigma_eps = 0.01;
  q.sigma_v = -1.0;
  EXPECT_FALSE(q.valid());
  auto arr = q.fixed();
  CombinedParams r;
  r.set_fixed(arr);
  EXPECT_EQ(r.fixed(), arr);
}
