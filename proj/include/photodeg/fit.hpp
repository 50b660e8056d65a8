#pragma once

// Maximum-likelihood fits of the categorical-effects model and of the
// combined functional-form model (variants A, B, C), with observed
// information standard errors and AIC.

#include <Eigen/Dense>
#include <array>
#include <map>
#include <string_view>
#include <cstdint>
#include <string>
#include <vector>

#include "photodeg/dataset.hpp"
#include "photodeg/likelihood.hpp"
#include "photodeg/optimizer.hpp"
#include "photodeg/path_model.hpp"

namespace photodeg {

// Factor levels of the categorical model. Baselines (log effect fixed at
// zero) are ND 10%, 35 C and 25% RH.
inline constexpr std::array<double, 4> kNdLevels = {0.10, 0.40, 0.60, 1.00};
inline constexpr std::array<double, 4> kTempLevels = {25.0, 35.0, 45.0, 55.0};
inline constexpr std::array<double, 4> kRhLevels = {0.0, 25.0, 50.0, 75.0};

struct CategoricalParams {
  double alpha = 0.0;
  std::array<double, 4> log_b_minus_mu{};  // per filter 306, 326, 353, 452
  std::array<double, 3> log_d{};           // ND 40, 60, 100 %
  std::array<double, 3> log_f{};           // 25, 45, 55 C
  std::array<double, 3> log_g{};           // RH 0, 50, 75 %
  std::array<double, 4> sigma{};           // per filter
  double sigma_v = 0.0;
  double sigma_eps = 0.0;

  static constexpr std::size_t kCount = 20;
  static const std::array<std::string, kCount>& names();
  std::array<double, kCount> to_array() const;
  static CategoricalParams from_array(const std::array<double, kCount>& a);

  double log_nd_effect(double nd) const;
  double log_temp_effect(double temp_c) const;
  double log_rh_effect(double rh_pct) const;

  // Published categorical estimates (variance components not published).
  static CategoricalParams published();
};

std::vector<double> categorical_mean(const CategoricalParams& params, const AccelSpecimen& specimen);

struct ParameterEstimate {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided Wald; not meaningful for boundary parameters
  bool free = true;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  long evaluations = 0;
  double grad_inf = 0.0;
  int starts = 0;
  int best_start = 0;
  bool hessian_pd = true;
  bool pseudo_inverse = false;
  std::vector<std::string> warnings;
  std::vector<std::string> trace;
};

struct FitOptions {
  LikelihoodOptions likelihood;
  OptimizerOptions optimizer;
  int starts = 5;
  std::uint64_t seed = 20170401;
  double jitter_sd = 2.0;  // in units of the approximate standard errors at the seed
};

struct CategoricalFit {
  CategoricalParams params;
  std::vector<ParameterEstimate> estimates;
  Eigen::MatrixXd covariance;  // natural scale, kCount x kCount (zeros for fixed entries)
  double loglik = 0.0;
  double aic = 0.0;
  int n_params = 0;
  FitDiagnostics diagnostics;
};

struct CombinedFit {
  ModelKind kind = ModelKind::kB;
  CombinedParams params;
  std::vector<ParameterEstimate> estimates;
  // Covariance of the free parameters on the natural scale, in `estimates` order.
  Eigen::MatrixXd covariance;
  // Covariance of the 11 fixed effects (CombinedParams::kFixedNames order);
  // rows of parameters held fixed are zero.
  Eigen::MatrixXd fixed_covariance;
  double loglik = 0.0;
  double aic = 0.0;
  int n_params = 0;
  FitDiagnostics diagnostics;

  const ParameterEstimate* find(std::string_view name) const;
};

double aic(double loglik, int n_params);

double categorical_loglik(const CategoricalParams& params, const AccelDataset& dataset, ModelKind kind,
                          const LikelihoodOptions& options = {});

// Throws RankDeficiencyError when a factor level is absent from the data.
CategoricalFit fit_categorical(const AccelDataset& dataset, const FitOptions& options = {});

// Stage-wise seed for the combined model from categorical estimates.
CombinedParams seed_from_categorical(const CategoricalFit& fit,
                                     const std::map<BandPass, WavelengthSplit>& splits);

CombinedFit fit_combined(const AccelDataset& dataset, const CombinedParams& init, ModelKind kind,
                         const FitOptions& options = {});

// Names of the free parameters of a combined model variant.
std::vector<std::string> free_parameter_names(ModelKind kind, bool has_353);

}  // namespace photodeg
