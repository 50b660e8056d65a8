#include "photodeg/likelihood.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "photodeg/errors.hpp"
#include "photodeg/parallel.hpp"

namespace photodeg {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_normal_pdf(double x, double sd) {
  return -kHalfLog2Pi - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

double log_sum_exp(std::span<const double> terms) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double t : terms) peak = std::max(peak, t);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

struct Posterior {
  double mode = 0.0;
  double scale = 1.0;
};

// Mode and curvature scale of h(v) = conditional_loglik(offset + v) +
// log Normal(v; 0, sd). h' = (E ym - E^2 mm)/s^2 - v/sd^2 with E = exp(offset+v).
Posterior locate_mode(const SpecimenStats& s, double sigma_eps, double sd, double offset) {
  const double inv_eps2 = 1.0 / (sigma_eps * sigma_eps);
  const double inv_sd2 = 1.0 / (sd * sd);
  auto d1 = [&](double v) {
    const double e = std::exp(offset + v);
    return (e * s.ym - e * e * s.mm) * inv_eps2 - v * inv_sd2;
  };
  auto d2 = [&](double v) {
    const double e = std::exp(offset + v);
    return (e * s.ym - 2.0 * e * e * s.mm) * inv_eps2 - inv_sd2;
  };
  if (s.mm <= 0.0) return {0.0, sd};

  // Bracket the root of h' (h' -> +inf as v -> -inf, -> -inf as v -> +inf).
  double lo = -1.0, hi = 1.0;
  while (d1(lo) < 0.0 && lo > -700.0) lo *= 2.0;
  while (d1(hi) > 0.0 && hi < 700.0) hi *= 2.0;
  double v = std::clamp(0.0, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double g = d1(v);
    if (g > 0.0)
      lo = v;
    else
      hi = v;
    const double h = d2(v);
    double next = (h < 0.0) ? v - g / h : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - v) <= 1e-14 * std::max(1.0, std::abs(v));
    v = next;
    if (done || hi - lo < 1e-15) break;
  }
  const double curvature = d2(v);
  return {v, curvature < 0.0 ? 1.0 / std::sqrt(-curvature) : sd};
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kA: return "A";
    case ModelKind::kB: return "B";
    case ModelKind::kC: return "C";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "A" || text == "a") return ModelKind::kA;
  if (text == "B" || text == "b") return ModelKind::kB;
  if (text == "C" || text == "c") return ModelKind::kC;
  throw ConfigurationError("unknown model kind '" + std::string(text) + "' (expected A, B or C)");
}

GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw ConfigurationError("Gauss-Hermite order must be positive");
  // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double off = std::sqrt(0.5 * k);
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  for (int k = 0; k < order; ++k) {
    rule.nodes[k] = eig.eigenvalues()(k);
    const double v0 = eig.eigenvectors()(0, k);
    rule.weights[k] = sqrt_pi * v0 * v0;
  }
  return rule;
}

SpecimenStats specimen_stats(std::span<const double> y, std::span<const double> mean) {
  SpecimenStats s;
  for (std::size_t j = 0; j < y.size(); ++j) {
    s.ym += y[j] * mean[j];
    s.mm += mean[j] * mean[j];
    s.yy += y[j] * y[j];
  }
  s.n = static_cast<int>(y.size());
  return s;
}

double conditional_loglik(const SpecimenStats& s, double shift, double sigma_eps) {
  const double e = std::exp(shift);
  const double rss = std::max(0.0, s.yy - 2.0 * e * s.ym + e * e * s.mm);
  return -s.n * (kHalfLog2Pi + std::log(sigma_eps)) - 0.5 * rss / (sigma_eps * sigma_eps);
}

double random_effect_loglik(const SpecimenStats& s, double sigma_eps, double sigma_v,
                            const GaussHermiteRule& rule, double offset) {
  if (!(sigma_v > 0.0)) return conditional_loglik(s, offset, sigma_eps);
  const Posterior post = locate_mode(s, sigma_eps, sigma_v, offset);
  const double spread = std::numbers::sqrt2 * post.scale;
  std::vector<double> terms(rule.nodes.size());
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double x = rule.nodes[k];
    const double v = post.mode + spread * x;
    terms[k] = std::log(rule.weights[k]) + x * x + conditional_loglik(s, offset + v, sigma_eps) +
               log_normal_pdf(v, sigma_v);
  }
  return std::log(spread) + log_sum_exp(terms);
}

double nested_group_loglik(std::span<const SpecimenStats> members, double sigma_eps, double sigma_w,
                           double sigma_u, const GaussHermiteRule& outer, const GaussHermiteRule& inner) {
  auto inner_sum = [&](double u) {
    double acc = 0.0;
    for (const auto& s : members) acc += random_effect_loglik(s, sigma_eps, sigma_w, inner, u);
    return acc;
  };
  if (!(sigma_u > 0.0)) return inner_sum(0.0);

  auto outer_log = [&](double u) { return inner_sum(u) + log_normal_pdf(u, sigma_u); };

  double prior_precision = 1.0 / (sigma_u * sigma_u);
  if (sigma_w > 0.0) prior_precision += static_cast<double>(members.size()) / (sigma_w * sigma_w);
  const double rough_scale = 1.0 / std::sqrt(prior_precision);

  // Each member's marginal peaks near its own best shift log(ym/mm) and the
  // prior at 0, so the mode of the sum lies between them.
  double lo = 0.0, hi = 0.0;
  bool unbounded_below = false;
  for (const auto& s : members) {
    if (s.mm > 0.0 && s.ym > 0.0) {
      const double shift = std::log(s.ym / s.mm);
      lo = std::min(lo, shift);
      hi = std::max(hi, shift);
    } else if (s.mm > 0.0) {
      unbounded_below = true;
    }
  }
  const double margin = 0.5 + 3.0 * sigma_w;
  lo -= margin;
  hi += margin;
  if (unbounded_below) lo = std::min(lo, -(12.0 * sigma_u + 3.0));
  const auto best = boost::math::tools::brent_find_minima([&](double u) { return -outer_log(u); }, lo, hi,
                                                          std::numeric_limits<double>::digits / 2);
  const double mode = best.first;
  const double f0 = -best.second;
  auto curvature_scale = [&](double h) {
    const double c = (outer_log(mode + h) - 2.0 * f0 + outer_log(mode - h)) / (h * h);
    return c < 0.0 ? 1.0 / std::sqrt(-c) : rough_scale;
  };
  double scale = curvature_scale(1e-3 * rough_scale);
  scale = curvature_scale(1e-3 * scale);

  const double spread = std::numbers::sqrt2 * scale;
  std::vector<double> terms(outer.nodes.size());
  for (std::size_t k = 0; k < outer.nodes.size(); ++k) {
    const double x = outer.nodes[k];
    terms[k] = std::log(outer.weights[k]) + x * x + outer_log(mode + spread * x);
  }
  return std::log(spread) + log_sum_exp(terms);
}

std::vector<double> combined_mean(const CombinedParams& params, const AccelSpecimen& specimen,
                                  const std::map<BandPass, WavelengthSplit>& splits) {
  const auto& cond = specimen.conditions;
  double spectral = params.b353;
  if (cond.bp != BandPass::k353) {
    const auto it = splits.find(cond.bp);
    if (it == splits.end()) throw DomainError("no wavelength split for filter " + to_string(cond.bp));
    spectral = log_spectral_weight(it->second, params.beta_lambda);
  }
  const double offset = condition_offset(cond.nd, cond.temp_c, cond.rh_pct, params) + spectral;
  const double inv_sigma = 1.0 / sigma_of_lambda(nominal_center(cond.bp), params);
  std::vector<double> mean(specimen.measurements.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double dose = specimen.dosage.at(specimen.measurements[j].time_h);
    mean[j] = dose > 0.0 ? degradation_path((std::log(dose) + offset) * inv_sigma, params.alpha, 0.0) : 0.0;
  }
  return mean;
}

namespace {

std::vector<SpecimenStats> all_stats(const AccelDataset& dataset,
                                     const std::vector<std::vector<double>>& means) {
  if (means.size() != dataset.specimens.size())
    throw DomainError("loglik: one mean path per specimen required");
  std::vector<SpecimenStats> stats(means.size());
  std::vector<double> y;
  for (std::size_t i = 0; i < means.size(); ++i) {
    const auto& ms = dataset.specimens[i].measurements;
    y.resize(ms.size());
    for (std::size_t j = 0; j < ms.size(); ++j) y[j] = ms[j].damage;
    stats[i] = specimen_stats(y, means[i]);
  }
  return stats;
}

}  // namespace

std::vector<double> specimen_logliks(const AccelDataset& dataset,
                                     const std::vector<std::vector<double>>& means, ModelKind kind,
                                     double sigma_eps, double sigma_v, const LikelihoodOptions& options) {
  const auto stats = all_stats(dataset, means);
  const auto rule = gauss_hermite(options.quad_order);
  std::vector<double> out(stats.size());
  parallel_for(stats.size(), options.threads, [&](std::size_t i) {
    out[i] = kind == ModelKind::kA ? conditional_loglik(stats[i], 0.0, sigma_eps)
                                   : random_effect_loglik(stats[i], sigma_eps, sigma_v, rule);
  });
  return out;
}

double loglik_from_means(const AccelDataset& dataset, const std::vector<std::vector<double>>& means,
                         ModelKind kind, double sigma_eps, double sigma_v, double sigma_u,
                         const LikelihoodOptions& options) {
  if (!(sigma_eps > 0.0)) return -std::numeric_limits<double>::infinity();
  if (kind != ModelKind::kC) {
    if (options.quad_order < 5) throw ConfigurationError("quadrature order must be at least 5");
    const auto parts = specimen_logliks(dataset, means, kind, sigma_eps, sigma_v, options);
    double total = 0.0;
    for (double x : parts) total += x;  // fixed order
    return total;
  }

  const auto stats = all_stats(dataset, means);
  std::map<std::string, std::vector<SpecimenStats>> groups;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& s = dataset.specimens[i];
    groups[s.group_id.empty() ? s.id : s.group_id].push_back(stats[i]);
  }
  std::vector<const std::vector<SpecimenStats>*> ordered;
  for (const auto& [_, members] : groups) ordered.push_back(&members);

  const auto outer = gauss_hermite(options.outer_order);
  const auto inner = gauss_hermite(options.inner_order);
  std::vector<double> parts(ordered.size());
  parallel_for(ordered.size(), options.threads, [&](std::size_t g) {
    parts[g] = nested_group_loglik(*ordered[g], sigma_eps, sigma_v, sigma_u, outer, inner);
  });
  double total = 0.0;
  for (double x : parts) total += x;
  return total;
}

double marginal_loglik(const CombinedParams& params, const AccelDataset& dataset, ModelKind kind,
                       const LikelihoodOptions& options) {
  if (!params.valid()) return -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> means(dataset.specimens.size());
  for (std::size_t i = 0; i < means.size(); ++i)
    means[i] = combined_mean(params, dataset.specimens[i], dataset.splits);
  for (const auto& m : means)
    for (double x : m)
      if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  return loglik_from_means(dataset, means, kind, params.sigma_eps, params.sigma_v, params.sigma_u, options);
}

}  // namespace photodeg
