#include "photodeg/path_model.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "photodeg/errors.hpp"

namespace photodeg {

std::array<double, CombinedParams::kFixedCount> CombinedParams::fixed() const {
  return {alpha, beta_lambda, p, ea_over_r, beta_rh, rh0, eta0, b353, sigma0, sigma1, sigma2};
}

void CombinedParams::set_fixed(const std::array<double, kFixedCount>& v) {
  alpha = v[0];
  beta_lambda = v[1];
  p = v[2];
  ea_over_r = v[3];
  beta_rh = v[4];
  rh0 = v[5];
  eta0 = v[6];
  b353 = v[7];
  sigma0 = v[8];
  sigma1 = v[9];
  sigma2 = v[10];
}

bool CombinedParams::valid() const {
  for (double x : fixed())
    if (!std::isfinite(x)) return false;
  if (!(sigma0 > 0.0)) return false;
  if (!(std::isfinite(sigma_v) && sigma_v >= 0.0)) return false;
  if (!(std::isfinite(sigma_u) && sigma_u >= 0.0)) return false;
  if (!(std::isfinite(sigma_eps) && sigma_eps > 0.0)) return false;
  return true;
}

void CombinedParams::validate() const {
  if (!valid()) {
    std::ostringstream os;
    os << "combined parameters invalid (sigma0=" << sigma0 << ", sigma_v=" << sigma_v
       << ", sigma_u=" << sigma_u << ", sigma_eps=" << sigma_eps << ")";
    throw DomainError(os.str());
  }
}

CombinedParams CombinedParams::published() {
  CombinedParams p;
  p.alpha = -0.6191;
  p.beta_lambda = -0.0297;
  p.p = -0.5606;
  p.ea_over_r = 1945.6482;
  p.beta_rh = -0.0005;
  p.rh0 = 45.4748;
  p.eta0 = 9.8986;
  p.b353 = -11.5661;
  p.sigma0 = 0.8019;
  p.sigma1 = 7.6776;
  p.sigma2 = -0.0260;
  return p;
}

void ExposureConditions::validate() const {
  if (!(nd > 0.0 && nd <= 1.0)) throw DomainError("exposure conditions: ND must lie in (0, 1]");
  if (!(temp_c >= -40.0 && temp_c <= 100.0)) throw DomainError("exposure conditions: temperature outside [-40, 100] C");
  if (!(rh_pct >= 0.0 && rh_pct <= 100.0)) throw DomainError("exposure conditions: RH outside [0, 100]");
}

double phi(double lambda, double beta0, double beta_lambda) {
  return std::exp(beta0 + beta_lambda * lambda);
}

double sigma_of_lambda(double lambda, double sigma0, double sigma1, double sigma2) {
  return sigma0 + std::exp(sigma1 + sigma2 * lambda);
}

double sigma_of_lambda_derivative(double lambda, double /*sigma0*/, double sigma1, double sigma2) {
  return sigma2 * std::exp(sigma1 + sigma2 * lambda);
}

double arrhenius_log(double temp_c, double ea_over_r) {
  return -ea_over_r / (temp_c + kKelvinOffset);
}

double arrhenius_log_derivative(double temp_c, double ea_over_r) {
  const double k = temp_c + kKelvinOffset;
  return ea_over_r / (k * k);
}

double rh_log_effect(double rh, double beta_rh, double rh0) {
  const double d = rh - rh0;
  return -beta_rh * d * d;
}

double nd_log_effect(double nd, double p) {
  if (!(nd > 0.0)) throw DomainError("nd_log_effect: ND fraction must be positive");
  return p * std::log(nd);
}

double condition_offset(double nd, double temp_c, double rh_pct, const CombinedParams& params) {
  return params.eta0 + nd_log_effect(nd, params.p) + arrhenius_log(temp_c, params.ea_over_r) +
         rh_log_effect(rh_pct, params.beta_rh, params.rh0);
}

double z_combined(const ExposureConditions& conditions, double dosage, double lambda,
                  const CombinedParams& params, double split_term) {
  if (!(dosage > 0.0)) throw DomainError("z_combined: dosage must be positive");
  const double spectral = conditions.bp == BandPass::k353 ? params.b353 : split_term;
  const double numerator = condition_offset(conditions.nd, conditions.temp_c, conditions.rh_pct, params) +
                           std::log(dosage) + spectral;
  return numerator / sigma_of_lambda(lambda, params);
}

double degradation_path(double z, double alpha, double v) {
  // Evaluate the logistic without overflow for large |z|.
  const double logistic = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return alpha * std::exp(v) * logistic;
}

double degradation_path_dz(double z, double alpha, double v) {
  const double e = std::exp(-std::abs(z));
  return alpha * std::exp(v) * e / ((1.0 + e) * (1.0 + e));
}

std::optional<FailureCrossing> failure_time(const std::function<double(double)>& path,
                                            std::span<const double> grid, double threshold) {
  if (grid.empty()) return std::nullopt;
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = path(grid[i]);

  std::optional<std::size_t> first;
  int crossings = 0;
  bool below = values[0] <= threshold;
  if (below) {
    first = 0;
    ++crossings;
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const bool now_below = values[i] <= threshold;
    if (now_below && !below) {
      if (!first) first = i;
      ++crossings;
    }
    below = now_below;
  }
  if (!first) return std::nullopt;

  FailureCrossing out;
  out.multiple = crossings > 1;
  if (*first == 0) {
    out.time = grid[0];
    return out;
  }
  double lo = grid[*first - 1];
  double hi = grid[*first];
  for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (path(mid) <= threshold)
      hi = mid;
    else
      lo = mid;
  }
  out.time = hi;
  return out;
}

}  // namespace photodeg
