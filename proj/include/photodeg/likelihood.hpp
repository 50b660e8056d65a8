#pragma once

// Marginal likelihood of the sigmoid mixed-effects model with Gaussian
// measurement error, integrating the multiplicative random effects by
// adaptive Gauss-Hermite quadrature.

#include <span>
#include <string>
#include <vector>

#include "photodeg/dataset.hpp"
#include "photodeg/path_model.hpp"

namespace photodeg {

// A: no random effect. B: one random effect per specimen. C: group effect
// plus specimen effect within group.
enum class ModelKind { kA, kB, kC };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

// Nodes and weights for the weight function exp(-x^2).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermiteRule gauss_hermite(int order);

struct LikelihoodOptions {
  int quad_order = 15;  // models A/B
  int outer_order = 9;  // model C, group effect
  int inner_order = 9;  // model C, specimen effect
  unsigned threads = 1;
};

// Sufficient statistics of one specimen for a fixed mean path m:
// sum y*m, sum m^2, sum y^2 and the count. The conditional likelihood of
// y = exp(s) m + eps depends on the data only through these.
struct SpecimenStats {
  double ym = 0.0;
  double mm = 0.0;
  double yy = 0.0;
  int n = 0;
};

SpecimenStats specimen_stats(std::span<const double> y, std::span<const double> mean);

// log prod_j Normal(y_j; exp(shift) m_j, sigma_eps)
double conditional_loglik(const SpecimenStats& s, double shift, double sigma_eps);

// log of the integral over v ~ Normal(0, sigma_v^2) of the conditional
// likelihood with shift = offset + v. sigma_v == 0 gives the fixed-effect
// value.
double random_effect_loglik(const SpecimenStats& s, double sigma_eps, double sigma_v,
                            const GaussHermiteRule& rule, double offset = 0.0);

// Group effect u ~ Normal(0, sigma_u^2) shared by the members, specimen
// effects w_i ~ Normal(0, sigma_w^2), shift = u + w_i.
double nested_group_loglik(std::span<const SpecimenStats> members, double sigma_eps, double sigma_w,
                           double sigma_u, const GaussHermiteRule& outer, const GaussHermiteRule& inner);

// Mean damage path (v = 0) of a specimen at its measurement times.
std::vector<double> combined_mean(const CombinedParams& params, const AccelSpecimen& specimen,
                                  const std::map<BandPass, WavelengthSplit>& splits);

// Marginal log-likelihood given per-specimen mean paths. For model A the
// variance components sigma_v and sigma_u are ignored; for model B sigma_u
// is ignored.
double loglik_from_means(const AccelDataset& dataset, const std::vector<std::vector<double>>& means,
                         ModelKind kind, double sigma_eps, double sigma_v, double sigma_u,
                         const LikelihoodOptions& options);

// Per-specimen contributions for models A/B (in dataset order).
std::vector<double> specimen_logliks(const AccelDataset& dataset,
                                     const std::vector<std::vector<double>>& means, ModelKind kind,
                                     double sigma_eps, double sigma_v, const LikelihoodOptions& options);

double marginal_loglik(const CombinedParams& params, const AccelDataset& dataset, ModelKind kind,
                       const LikelihoodOptions& options = {});

}  // namespace photodeg
