#pragma once

// Sigmoid degradation path and the functional forms of the explanatory
// variable effects (quantum yield, scale curve, Arrhenius, RH, ND).

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string_view>

#include "photodeg/spectral.hpp"

namespace photodeg {

inline constexpr double kKelvinOffset = 273.15;
inline constexpr double kFailureThreshold = -0.40;

// Parameters of the combined model. eta0 absorbs the quantum-yield
// intercept, the Arrhenius constant and the location of the sigmoid, which
// are not separately estimable.
struct CombinedParams {
  double alpha = 0.0;        // asymptotic damage (negative)
  double beta_lambda = 0.0;  // 1/nm, log-linear quantum yield slope
  double p = 0.0;            // ND exponent deviation from reciprocity
  double ea_over_r = 0.0;    // K
  double beta_rh = 0.0;      // 1/%^2
  double rh0 = 0.0;          // %
  double eta0 = 0.0;
  double b353 = 0.0;  // log-scale spectral term used for the 353 nm filter
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma_v = 0.0;    // SD of the specimen random effect
  double sigma_eps = 0.0;  // SD of measurement error
  double sigma_u = 0.0;    // SD of the group random effect (nested model only)

  static constexpr std::size_t kFixedCount = 11;
  static constexpr std::array<std::string_view, kFixedCount> kFixedNames = {
      "alpha", "beta_lambda", "p", "ea_over_r", "beta_rh", "rh0",
      "eta0",  "b353",        "sigma0", "sigma1", "sigma2"};

  std::array<double, kFixedCount> fixed() const;
  void set_fixed(const std::array<double, kFixedCount>& values);

  // sigma0 > 0, variance components >= 0, sigma_eps > 0, all finite.
  bool valid() const;
  void validate() const;

  // Published estimates of the combined model (variance components are not
  // published and left at zero).
  static CombinedParams published();
};

struct ExposureConditions {
  BandPass bp = BandPass::k306;
  double nd = 1.0;
  double temp_c = 35.0;
  double rh_pct = 25.0;

  void validate() const;
};

double phi(double lambda, double beta0, double beta_lambda);

double sigma_of_lambda(double lambda, double sigma0, double sigma1, double sigma2);
inline double sigma_of_lambda(double lambda, const CombinedParams& p) {
  return sigma_of_lambda(lambda, p.sigma0, p.sigma1, p.sigma2);
}
double sigma_of_lambda_derivative(double lambda, double sigma0, double sigma1, double sigma2);

// -(Ea/R) / TempK, i.e. log f(Temp) without the constant log(gamma0).
double arrhenius_log(double temp_c, double ea_over_r);
double arrhenius_log_derivative(double temp_c, double ea_over_r);

// log g(RH) = -beta_rh * (RH - rh0)^2
double rh_log_effect(double rh, double beta_rh, double rh0);

// p * log(nd). Throws DomainError when nd <= 0.
double nd_log_effect(double nd, double p);

// Everything in the numerator of z except log dosage and the spectral term.
double condition_offset(double nd, double temp_c, double rh_pct, const CombinedParams& params);

// z for a constant-condition specimen. split_term is log sum P exp(beta*lambda)
// for the specimen's filter; for the 353 nm filter params.b353 is used
// instead. sigma is evaluated at lambda.
double z_combined(const ExposureConditions& conditions, double dosage, double lambda,
                  const CombinedParams& params, double split_term);

// alpha * exp(v) / (1 + exp(-z))
double degradation_path(double z, double alpha, double v);
double degradation_path_dz(double z, double alpha, double v);

struct FailureCrossing {
  double time = 0.0;
  bool multiple = false;  // path re-crosses the threshold later on the grid
};

// First downward crossing of `threshold` along the grid, refined by
// bisection on the continuous path.
std::optional<FailureCrossing> failure_time(const std::function<double(double)>& path,
                                            std::span<const double> grid,
                                            double threshold = kFailureThreshold);

}  // namespace photodeg
