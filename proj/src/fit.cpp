#include "photodeg/fit.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <limits>
#include <sstream>

#include "photodeg/errors.hpp"
#include "photodeg/rng.hpp"

namespace photodeg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int bp_index(BandPass bp) { return static_cast<int>(bp); }

// Index of `value` in `levels`, or -1.
template <std::size_t N>
int level_index(const std::array<double, N>& levels, double value) {
  for (std::size_t i = 0; i < N; ++i)
    if (std::abs(levels[i] - value) < 1e-6) return static_cast<int>(i);
  return -1;
}

double wald_p_value(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

// Per-specimen quantities that stay fixed while the parameters move.
struct SpecimenCache {
  std::vector<double> y;
  std::vector<double> log_dose;  // -inf where the dosage is zero
  ExposureConditions cond;
  int bp = 0;
  int nd_level = -1;
  int temp_level = -1;
  int rh_level = -1;
};

std::vector<SpecimenCache> build_cache(const AccelDataset& dataset) {
  std::vector<SpecimenCache> cache;
  cache.reserve(dataset.specimens.size());
  for (const auto& s : dataset.specimens) {
    SpecimenCache c;
    c.cond = s.conditions;
    c.bp = bp_index(s.conditions.bp);
    c.nd_level = level_index(kNdLevels, s.conditions.nd);
    c.temp_level = level_index(kTempLevels, s.conditions.temp_c);
    c.rh_level = level_index(kRhLevels, s.conditions.rh_pct);
    for (const auto& m : s.measurements) {
      c.y.push_back(m.damage);
      const double d = s.dosage.at(m.time_h);
      c.log_dose.push_back(d > 0.0 ? std::log(d) : kNegInf);
    }
    cache.push_back(std::move(c));
  }
  return cache;
}

void fill_mean(const SpecimenCache& c, double offset, double inv_sigma, double alpha, std::vector<double>& out) {
  out.resize(c.log_dose.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = std::isfinite(c.log_dose[j]) ? degradation_path((c.log_dose[j] + offset) * inv_sigma, alpha, 0.0) : 0.0;
}

// ----------------------------------------------------------------------------
// Generic maximizer over a list of free parameters, some on the log scale.

struct FreeParam {
  std::string name;
  bool log_scale = false;
};

using LoglikFn = std::function<double(const std::vector<double>& natural)>;

struct EngineResult {
  std::vector<double> natural;
  double loglik = 0.0;
  Eigen::MatrixXd covariance;  // natural scale
  FitDiagnostics diagnostics;
};

class Engine {
 public:
  Engine(std::vector<FreeParam> params, LoglikFn loglik, const FitOptions& options)
      : params_(std::move(params)), loglik_(std::move(loglik)), options_(options) {}

  EngineResult run(const std::vector<double>& init_natural) {
    const Eigen::VectorXd u_seed = to_internal(init_natural);
    if (!std::isfinite(objective_u(u_seed)))
      throw DomainError("fit: log-likelihood is not finite at the initial parameters");
    const Eigen::VectorXd scale_seed = curvature_scale(u_seed);

    EngineResult out;
    double best_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u = u_seed;
    OptimizerResult best_run;
    const int starts = std::max(1, options_.starts);
    for (int k = 0; k < starts; ++k) {
      Eigen::VectorXd u0 = u_seed;
      if (k > 0) {
        StreamRng rng(options_.seed, static_cast<std::uint64_t>(k));
        for (Eigen::Index i = 0; i < u0.size(); ++i) u0[i] += options_.jitter_sd * scale_seed[i] * rng.normal();
        if (!std::isfinite(objective_u(u0))) continue;
      }
      OptimizerResult r = optimize_from(u0, k == 0 ? &scale_seed : nullptr);
      out.diagnostics.evaluations += r.evaluations;
      ++out.diagnostics.starts;
      if (r.value < best_value) {
        best_value = r.value;
        best_u = r.x;
        best_run = r;
        out.diagnostics.best_start = k;
      }
    }

    // Polish the best solution with curvature rescaled at the optimum.
    OptimizerResult polished = optimize_from(best_u, nullptr);
    out.diagnostics.evaluations += polished.evaluations;
    if (polished.value <= best_value) {
      best_u = polished.x;
      best_value = polished.value;
      polished.iterations += best_run.iterations;
      best_run = polished;
    }

    out.diagnostics.converged = best_run.converged;
    out.diagnostics.iterations = best_run.iterations;
    out.diagnostics.grad_inf = best_run.grad_inf;
    out.diagnostics.trace = best_run.trace;
    if (!best_run.converged) {
      std::ostringstream os;
      os << "fit did not converge (" << best_run.reason << ", |g|inf=" << best_run.grad_inf << ")";
      throw ConvergenceError(os.str(), best_run.trace);
    }

    out.natural = to_natural(best_u);
    out.loglik = -best_value;
    out.covariance = covariance_at(best_u, out.diagnostics);
    return out;
  }

 private:
  Eigen::VectorXd to_internal(const std::vector<double>& nat) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(nat.size()));
    for (std::size_t i = 0; i < nat.size(); ++i)
      u[static_cast<Eigen::Index>(i)] = params_[i].log_scale ? std::log(std::max(nat[i], 1e-8)) : nat[i];
    return u;
  }

  std::vector<double> to_natural(const Eigen::VectorXd& u) const {
    std::vector<double> nat(static_cast<std::size_t>(u.size()));
    for (std::size_t i = 0; i < nat.size(); ++i)
      nat[i] = params_[i].log_scale ? std::exp(u[static_cast<Eigen::Index>(i)]) : u[static_cast<Eigen::Index>(i)];
    return nat;
  }

  double objective_u(const Eigen::VectorXd& u) const {
    const double ll = loglik_(to_natural(u));
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  }

  // Approximate standard errors from the diagonal curvature.
  Eigen::VectorXd curvature_scale(const Eigen::VectorXd& u) const {
    Eigen::VectorXd scale(u.size());
    const double f0 = objective_u(u);
    Eigen::VectorXd probe = u;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const double h = 1e-4 * std::max(std::abs(u[k]), 1e-2);
      probe[k] = u[k] + h;
      const double up = objective_u(probe);
      probe[k] = u[k] - h;
      const double down = objective_u(probe);
      probe[k] = u[k];
      const double d2 = (up - 2.0 * f0 + down) / (h * h);
      scale[k] = (std::isfinite(d2) && d2 > 0.0) ? 1.0 / std::sqrt(d2) : 0.1 * std::max(std::abs(u[k]), 1e-2);
      // A flat log-scale direction (variance component near zero) would
      // otherwise send jittered starts many e-folds away.
      if (params_[static_cast<std::size_t>(k)].log_scale) scale[k] = std::min(scale[k], 0.5);
    }
    return scale;
  }

  // BFGS in whitened coordinates u = u0 + T x, where T maps unit steps to
  // one standard error along the eigen-directions of the curvature at u0.
  OptimizerResult optimize_from(const Eigen::VectorXd& u0, const Eigen::VectorXd* known_scale) {
    const Eigen::VectorXd scale = known_scale ? *known_scale : curvature_scale(u0);
    const Eigen::Index n = u0.size();
    Objective scaled = [&](const Eigen::VectorXd& x) { return objective_u(u0 + scale.cwiseProduct(x)); };
    const Eigen::MatrixXd hess = central_hessian(scaled, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, 1e-2));
    Eigen::MatrixXd transform = scale.asDiagonal();
    if (hess.allFinite()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (hess + hess.transpose()));
      if (eig.info() == Eigen::Success) {
        const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
        Eigen::VectorXd inv_root(n);
        for (Eigen::Index k = 0; k < n; ++k)
          inv_root[k] = 1.0 / std::sqrt(std::max(std::abs(eig.eigenvalues()[k]), 1e-8 * top));
        transform = scale.asDiagonal() * eig.eigenvectors() * inv_root.asDiagonal();
      }
    }
    Objective fx = [&](const Eigen::VectorXd& x) { return objective_u(u0 + transform * x); };
    OptimizerResult r = minimize_bfgs(fx, Eigen::VectorXd::Zero(n), options_.optimizer);
    const Eigen::VectorXd u = u0 + transform * r.x;
    r.x = u;
    return r;
  }

  Eigen::MatrixXd covariance_at(const Eigen::VectorXd& u, FitDiagnostics& diag) const {
    const Eigen::VectorXd scale = curvature_scale(u);
    Objective fx = [&](const Eigen::VectorXd& x) { return objective_u(u + scale.cwiseProduct(x)); };
    const Eigen::Index n = u.size();
    const Eigen::MatrixXd hess = central_hessian(fx, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, 1e-2));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (hess + hess.transpose()));
    Eigen::VectorXd inv_vals(n);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    diag.hessian_pd = eig.eigenvalues().minCoeff() > 1e-10 * top;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double lam = eig.eigenvalues()[k];
      inv_vals[k] = lam > 1e-10 * top ? 1.0 / lam : 0.0;
    }
    if (!diag.hessian_pd) {
      diag.pseudo_inverse = true;
      diag.warnings.push_back("observed information not positive definite at the optimum; pseudo-inverse used");
    }
    const Eigen::MatrixXd cov_x = eig.eigenvectors() * inv_vals.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::VectorXd jac(n);
    for (Eigen::Index k = 0; k < n; ++k)
      jac[k] = scale[k] * (params_[static_cast<std::size_t>(k)].log_scale ? std::exp(u[k]) : 1.0);
    return jac.asDiagonal() * cov_x * jac.asDiagonal();
  }

  std::vector<FreeParam> params_;
  LoglikFn loglik_;
  FitOptions options_;
};

std::vector<ParameterEstimate> make_estimates(const std::vector<FreeParam>& params,
                                              const std::vector<double>& natural, const Eigen::MatrixXd& cov) {
  std::vector<ParameterEstimate> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParameterEstimate e;
    e.name = params[i].name;
    e.estimate = natural[i];
    const double var = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    e.se = var > 0.0 ? std::sqrt(var) : 0.0;
    e.z = e.se > 0.0 ? e.estimate / e.se : 0.0;
    e.p_value = e.se > 0.0 ? wald_p_value(e.z) : 1.0;
    out.push_back(e);
  }
  return out;
}

}  // namespace

double aic(double loglik, int n_params) {
  if (n_params < 1) throw DomainError("aic: number of parameters must be at least 1");
  return 2.0 * n_params - 2.0 * loglik;
}

// ----------------------------------------------------------------------------
// Categorical model

const std::array<std::string, CategoricalParams::kCount>& CategoricalParams::names() {
  static const std::array<std::string, kCount> n = {
      "alpha",     "log_b_minus_mu_306", "log_b_minus_mu_326", "log_b_minus_mu_353", "log_b_minus_mu_452",
      "log_d_40",  "log_d_60",           "log_d_100",          "log_f_25",           "log_f_45",
      "log_f_55",  "log_g_0",            "log_g_50",           "log_g_75",           "sigma_306",
      "sigma_326", "sigma_353",          "sigma_452",          "sigma_v",            "sigma_eps"};
  return n;
}

std::array<double, CategoricalParams::kCount> CategoricalParams::to_array() const {
  std::array<double, kCount> a{};
  a[0] = alpha;
  for (int i = 0; i < 4; ++i) a[1 + i] = log_b_minus_mu[i];
  for (int i = 0; i < 3; ++i) {
    a[5 + i] = log_d[i];
    a[8 + i] = log_f[i];
    a[11 + i] = log_g[i];
  }
  for (int i = 0; i < 4; ++i) a[14 + i] = sigma[i];
  a[18] = sigma_v;
  a[19] = sigma_eps;
  return a;
}

CategoricalParams CategoricalParams::from_array(const std::array<double, kCount>& a) {
  CategoricalParams p;
  p.alpha = a[0];
  for (int i = 0; i < 4; ++i) p.log_b_minus_mu[i] = a[1 + i];
  for (int i = 0; i < 3; ++i) {
    p.log_d[i] = a[5 + i];
    p.log_f[i] = a[8 + i];
    p.log_g[i] = a[11 + i];
  }
  for (int i = 0; i < 4; ++i) p.sigma[i] = a[14 + i];
  p.sigma_v = a[18];
  p.sigma_eps = a[19];
  return p;
}

// Level 0 of ND and level 1 of temperature/RH are the baselines.
double CategoricalParams::log_nd_effect(double nd) const {
  const int k = level_index(kNdLevels, nd);
  if (k < 0) throw DomainError("categorical model: ND " + std::to_string(nd) + " is not a design level");
  return k == 0 ? 0.0 : log_d[static_cast<std::size_t>(k - 1)];
}

double CategoricalParams::log_temp_effect(double temp_c) const {
  const int k = level_index(kTempLevels, temp_c);
  if (k < 0) throw DomainError("categorical model: temperature is not a design level");
  if (k == 1) return 0.0;
  return log_f[static_cast<std::size_t>(k == 0 ? 0 : k - 1)];
}

double CategoricalParams::log_rh_effect(double rh_pct) const {
  const int k = level_index(kRhLevels, rh_pct);
  if (k < 0) throw DomainError("categorical model: RH is not a design level");
  if (k == 1) return 0.0;
  return log_g[static_cast<std::size_t>(k == 0 ? 0 : k - 1)];
}

CategoricalParams CategoricalParams::published() {
  CategoricalParams p;
  p.alpha = -0.6810;
  p.log_b_minus_mu = {-6.5620, -7.0844, -9.0275, -10.1087};
  p.log_d = {-0.7939, -1.0553, -1.3082};
  p.log_f = {-0.1963, 0.1973, -0.8193};
  p.log_g = {0.8749, -0.3707, 0.2287};
  p.sigma = {1.5591, 1.2336, 1.0443, 0.8416};
  return p;
}

std::vector<double> categorical_mean(const CategoricalParams& params, const AccelSpecimen& specimen) {
  const auto& c = specimen.conditions;
  const int b = bp_index(c.bp);
  const double offset = params.log_b_minus_mu[static_cast<std::size_t>(b)] + params.log_nd_effect(c.nd) +
                        params.log_temp_effect(c.temp_c) + params.log_rh_effect(c.rh_pct);
  const double inv_sigma = 1.0 / params.sigma[static_cast<std::size_t>(b)];
  std::vector<double> mean(specimen.measurements.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double d = specimen.dosage.at(specimen.measurements[j].time_h);
    mean[j] = d > 0.0 ? degradation_path((std::log(d) + offset) * inv_sigma, params.alpha, 0.0) : 0.0;
  }
  return mean;
}

double categorical_loglik(const CategoricalParams& params, const AccelDataset& dataset, ModelKind kind,
                          const LikelihoodOptions& options) {
  std::vector<std::vector<double>> means;
  means.reserve(dataset.specimens.size());
  for (const auto& s : dataset.specimens) means.push_back(categorical_mean(params, s));
  return loglik_from_means(dataset, means, kind, params.sigma_eps, params.sigma_v, 0.0, options);
}

namespace {

void require_levels(const std::vector<SpecimenCache>& cache) {
  std::array<bool, 4> bp{}, nd{}, temp{}, rh{};
  for (const auto& c : cache) {
    if (c.nd_level < 0 || c.temp_level < 0 || c.rh_level < 0)
      throw DomainError("categorical model: specimen conditions are not on the design levels");
    bp[static_cast<std::size_t>(c.bp)] = true;
    nd[static_cast<std::size_t>(c.nd_level)] = true;
    temp[static_cast<std::size_t>(c.temp_level)] = true;
    rh[static_cast<std::size_t>(c.rh_level)] = true;
  }
  std::vector<std::string> missing;
  for (int i = 0; i < 4; ++i) {
    if (!bp[i]) missing.push_back("filter " + to_string(kAllBandPasses[i]));
    if (!nd[i]) missing.push_back("ND " + std::to_string(static_cast<int>(kNdLevels[i] * 100)) + "%");
    if (!temp[i]) missing.push_back("temperature " + std::to_string(static_cast<int>(kTempLevels[i])) + " C");
    if (!rh[i]) missing.push_back("RH " + std::to_string(static_cast<int>(kRhLevels[i])) + "%");
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "categorical model not identifiable; no data for:";
    for (const auto& m : missing) os << ' ' << m << ';';
    throw RankDeficiencyError(os.str());
  }
}

// Linearized starting values: with alpha fixed, logit(y/alpha) * sigma_b =
// log D + offsets, which is linear once rearranged for log D.
CategoricalParams categorical_start(const std::vector<SpecimenCache>& cache) {
  double ymin = 0.0;
  for (const auto& c : cache)
    for (double y : c.y) ymin = std::min(ymin, y);
  if (!(ymin < 0.0)) throw DegenerateInputError("categorical fit: no degradation observed");
  const double alpha = 1.05 * ymin;

  std::vector<std::array<double, 17>> rows;
  std::vector<double> rhs;
  for (const auto& c : cache) {
    for (std::size_t j = 0; j < c.y.size(); ++j) {
      const double r = c.y[j] / alpha;
      if (!(r > 0.1 && r < 0.9) || !std::isfinite(c.log_dose[j])) continue;
      const double z = std::log(r / (1.0 - r));
      std::array<double, 17> row{};
      row[static_cast<std::size_t>(c.bp)] = z;          // sigma_b
      row[4 + static_cast<std::size_t>(c.bp)] = -1.0;   // log_b_minus_mu_b
      if (c.nd_level > 0) row[8 + static_cast<std::size_t>(c.nd_level - 1)] = -1.0;
      if (c.temp_level != 1) row[11 + static_cast<std::size_t>(c.temp_level == 0 ? 0 : c.temp_level - 1)] = -1.0;
      if (c.rh_level != 1) row[14 + static_cast<std::size_t>(c.rh_level == 0 ? 0 : c.rh_level - 1)] = -1.0;
      rows.push_back(row);
      rhs.push_back(c.log_dose[j]);
    }
  }
  CategoricalParams p;
  p.alpha = alpha;
  p.sigma = {1.0, 1.0, 1.0, 1.0};
  if (rows.size() >= 17) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 17);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int k = 0; k < 17; ++k) x(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
      yv[static_cast<Eigen::Index>(i)] = rhs[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == 17) {
      const Eigen::VectorXd beta = qr.solve(yv);
      for (int b = 0; b < 4; ++b) {
        p.sigma[static_cast<std::size_t>(b)] = beta[b] > 0.05 ? beta[b] : 1.0;
        p.log_b_minus_mu[static_cast<std::size_t>(b)] = beta[4 + b];
      }
      for (int k = 0; k < 3; ++k) {
        p.log_d[static_cast<std::size_t>(k)] = beta[8 + k];
        p.log_f[static_cast<std::size_t>(k)] = beta[11 + k];
        p.log_g[static_cast<std::size_t>(k)] = beta[14 + k];
      }
    }
  }
  p.sigma_v = 0.05;
  p.sigma_eps = 0.02;
  return p;
}

}  // namespace

CategoricalFit fit_categorical(const AccelDataset& dataset, const FitOptions& options) {
  if (dataset.specimens.empty()) throw ValidationError("fit_categorical: empty dataset");
  const auto cache = build_cache(dataset);
  require_levels(cache);

  std::vector<FreeParam> params;
  const auto& names = CategoricalParams::names();
  for (std::size_t i = 0; i < CategoricalParams::kCount; ++i)
    params.push_back({names[i], i >= 14});  // sigmas and variance components on log scale

  auto loglik = [&](const std::vector<double>& nat) {
    std::array<double, CategoricalParams::kCount> a{};
    std::copy(nat.begin(), nat.end(), a.begin());
    const auto p = CategoricalParams::from_array(a);
    std::vector<std::vector<double>> means(cache.size());
    for (std::size_t i = 0; i < cache.size(); ++i) {
      const auto& c = cache[i];
      const double offset = p.log_b_minus_mu[static_cast<std::size_t>(c.bp)] + p.log_nd_effect(c.cond.nd) +
                            p.log_temp_effect(c.cond.temp_c) + p.log_rh_effect(c.cond.rh_pct);
      fill_mean(c, offset, 1.0 / p.sigma[static_cast<std::size_t>(c.bp)], p.alpha, means[i]);
    }
    return loglik_from_means(dataset, means, ModelKind::kB, p.sigma_eps, p.sigma_v, 0.0, options.likelihood);
  };

  const auto start = categorical_start(cache);
  const auto arr = start.to_array();
  Engine engine(params, loglik, options);
  const auto res = engine.run(std::vector<double>(arr.begin(), arr.end()));

  CategoricalFit fit;
  std::array<double, CategoricalParams::kCount> a{};
  std::copy(res.natural.begin(), res.natural.end(), a.begin());
  fit.params = CategoricalParams::from_array(a);
  fit.covariance = res.covariance;
  fit.estimates = make_estimates(params, res.natural, res.covariance);
  fit.loglik = res.loglik;
  fit.n_params = static_cast<int>(params.size());
  fit.aic = aic(fit.loglik, fit.n_params);
  fit.diagnostics = res.diagnostics;
  return fit;
}

// ----------------------------------------------------------------------------
// Combined model

CombinedParams seed_from_categorical(const CategoricalFit& fit,
                                     const std::map<BandPass, WavelengthSplit>& splits) {
  const auto& c = fit.params;
  CombinedParams p;
  p.alpha = c.alpha;
  p.sigma_v = std::max(c.sigma_v, 1e-3);
  p.sigma_eps = std::max(c.sigma_eps, 1e-4);

  // Quantum-yield slope: theta_b - A_b(beta) should not depend on the filter.
  const std::array<BandPass, 3> narrow = {BandPass::k306, BandPass::k326, BandPass::k452};
  auto spread = [&](double beta) {
    std::array<double, 3> r{};
    for (std::size_t i = 0; i < 3; ++i)
      r[i] = c.log_b_minus_mu[static_cast<std::size_t>(bp_index(narrow[i]))] -
             log_spectral_weight(splits.at(narrow[i]), beta);
    const double mean = (r[0] + r[1] + r[2]) / 3.0;
    return (r[0] - mean) * (r[0] - mean) + (r[1] - mean) * (r[1] - mean) + (r[2] - mean) * (r[2] - mean);
  };
  p.beta_lambda = boost::math::tools::brent_find_minima(spread, -0.2, 0.1, 40).first;

  // ND: log d(nd) = p (log nd - log 0.1)
  {
    double sxy = 0.0, sxx = 0.0;
    for (int k = 1; k < 4; ++k) {
      const double x = std::log(kNdLevels[static_cast<std::size_t>(k)]) - std::log(kNdLevels[0]);
      sxy += x * c.log_d[static_cast<std::size_t>(k - 1)];
      sxx += x * x;
    }
    p.p = sxy / sxx;
  }
  // Arrhenius through the 35 C baseline, using 25 and 45 C.
  {
    const double base = 1.0 / (35.0 + kKelvinOffset);
    const double x25 = 1.0 / (25.0 + kKelvinOffset) - base;
    const double x45 = 1.0 / (45.0 + kKelvinOffset) - base;
    p.ea_over_r = -(x25 * c.log_f[0] + x45 * c.log_f[1]) / (x25 * x25 + x45 * x45);
  }
  // Quadratic RH through the 25% baseline:
  // log g = -beta (RH^2 - 625) + 2 beta rh0 (RH - 25)
  {
    Eigen::Matrix<double, 3, 2> x;
    Eigen::Vector3d y;
    const std::array<double, 3> rh = {0.0, 50.0, 75.0};
    for (int i = 0; i < 3; ++i) {
      x(i, 0) = rh[static_cast<std::size_t>(i)] * rh[static_cast<std::size_t>(i)] - 625.0;
      x(i, 1) = rh[static_cast<std::size_t>(i)] - 25.0;
      y[i] = c.log_g[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d coef = x.colPivHouseholderQr().solve(y);
    p.beta_rh = -coef[0];
    p.rh0 = std::abs(coef[0]) > 1e-12 ? -coef[1] / (2.0 * coef[0]) : 50.0;
  }
  // sigma curve: profile sigma0, log-linear fit of the remainder.
  {
    std::array<double, 4> lam{}, sig{};
    for (int b = 0; b < 4; ++b) {
      lam[static_cast<std::size_t>(b)] = nominal_center(kAllBandPasses[b]);
      sig[static_cast<std::size_t>(b)] = c.sigma[static_cast<std::size_t>(b)];
    }
    const double smin = *std::min_element(sig.begin(), sig.end());
    auto fit_given = [&](double s0, double& s1, double& s2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (int b = 0; b < 4; ++b) {
        const double x = lam[static_cast<std::size_t>(b)];
        const double y = std::log(sig[static_cast<std::size_t>(b)] - s0);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      s2 = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
      s1 = (sy - s2 * sx) / 4;
      double sse = 0.0;
      for (int b = 0; b < 4; ++b) {
        const double r = sig[static_cast<std::size_t>(b)] - sigma_of_lambda(lam[static_cast<std::size_t>(b)], s0, s1, s2);
        sse += r * r;
      }
      return sse;
    };
    const auto best = boost::math::tools::brent_find_minima(
        [&](double s0) {
          double s1, s2;
          return fit_given(s0, s1, s2);
        },
        1e-3, smin * (1.0 - 1e-6), 40);
    p.sigma0 = best.first;
    fit_given(p.sigma0, p.sigma1, p.sigma2);
  }
  // Intercepts at the categorical baseline (ND 10%, 35 C, 25% RH).
  const double base_offset = nd_log_effect(0.10, p.p) + arrhenius_log(35.0, p.ea_over_r) +
                             rh_log_effect(25.0, p.beta_rh, p.rh0);
  double acc = 0.0;
  for (BandPass bp : narrow)
    acc += c.log_b_minus_mu[static_cast<std::size_t>(bp_index(bp))] - log_spectral_weight(splits.at(bp), p.beta_lambda);
  p.eta0 = acc / 3.0 - base_offset;
  p.b353 = c.log_b_minus_mu[static_cast<std::size_t>(bp_index(BandPass::k353))] - base_offset - p.eta0;
  return p;
}

const ParameterEstimate* CombinedFit::find(std::string_view name) const {
  for (const auto& e : estimates)
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<std::string> free_parameter_names(ModelKind kind, bool has_353) {
  std::vector<std::string> names;
  for (auto n : CombinedParams::kFixedNames) {
    if (n == "p" && kind == ModelKind::kA) continue;
    if (n == "b353" && !has_353) continue;
    names.emplace_back(n);
  }
  if (kind != ModelKind::kA) names.emplace_back("sigma_v");
  if (kind == ModelKind::kC) names.emplace_back("sigma_u");
  names.emplace_back("sigma_eps");
  return names;
}

namespace {

double get_named(const CombinedParams& p, std::string_view name) {
  const auto f = p.fixed();
  for (std::size_t i = 0; i < CombinedParams::kFixedCount; ++i)
    if (CombinedParams::kFixedNames[i] == name) return f[i];
  if (name == "sigma_v") return p.sigma_v;
  if (name == "sigma_u") return p.sigma_u;
  if (name == "sigma_eps") return p.sigma_eps;
  throw DomainError("unknown parameter " + std::string(name));
}

void set_named(CombinedParams& p, std::string_view name, double value) {
  auto f = p.fixed();
  for (std::size_t i = 0; i < CombinedParams::kFixedCount; ++i)
    if (CombinedParams::kFixedNames[i] == name) {
      f[i] = value;
      p.set_fixed(f);
      return;
    }
  if (name == "sigma_v") p.sigma_v = value;
  else if (name == "sigma_u") p.sigma_u = value;
  else if (name == "sigma_eps") p.sigma_eps = value;
  else throw DomainError("unknown parameter " + std::string(name));
}

}  // namespace

CombinedFit fit_combined(const AccelDataset& dataset, const CombinedParams& init, ModelKind kind,
                         const FitOptions& options) {
  if (dataset.specimens.empty()) throw ValidationError("fit_combined: empty dataset");
  const auto cache = build_cache(dataset);
  const bool has_353 = std::any_of(cache.begin(), cache.end(),
                                   [](const SpecimenCache& c) { return c.cond.bp == BandPass::k353; });
  const bool has_other = std::any_of(cache.begin(), cache.end(),
                                     [](const SpecimenCache& c) { return c.cond.bp != BandPass::k353; });
  if (!has_other) throw RankDeficiencyError("fit_combined: quantum-yield slope needs data outside the 353 nm filter");
  for (const auto& c : cache)
    if (c.cond.bp != BandPass::k353 && !dataset.splits.count(c.cond.bp))
      throw DomainError("fit_combined: no wavelength split for filter " + to_string(c.cond.bp));

  CombinedParams base = init;
  if (kind == ModelKind::kA) {
    base.p = 0.0;
    base.sigma_v = 0.0;
    base.sigma_u = 0.0;
  } else if (kind == ModelKind::kB) {
    base.sigma_u = 0.0;
    base.sigma_v = std::max(base.sigma_v, 1e-3);
  } else {
    base.sigma_v = std::max(base.sigma_v, 1e-3);
    base.sigma_u = std::max(base.sigma_u, 1e-3);
  }
  base.sigma_eps = std::max(base.sigma_eps, 1e-4);

  const auto names = free_parameter_names(kind, has_353);
  std::vector<FreeParam> params;
  for (const auto& n : names)
    params.push_back({n, n == "sigma0" || n == "sigma_v" || n == "sigma_u" || n == "sigma_eps"});

  auto unpack = [&](const std::vector<double>& nat) {
    CombinedParams p = base;
    for (std::size_t i = 0; i < names.size(); ++i) set_named(p, names[i], nat[i]);
    return p;
  };

  auto loglik = [&](const std::vector<double>& nat) {
    const CombinedParams p = unpack(nat);
    if (!p.valid()) return kNegInf;
    std::array<double, 4> spectral{};
    for (BandPass bp : kAllBandPasses) {
      const auto it = dataset.splits.find(bp);
      spectral[static_cast<std::size_t>(bp_index(bp))] =
          bp == BandPass::k353 ? p.b353 : (it != dataset.splits.end() ? log_spectral_weight(it->second, p.beta_lambda) : 0.0);
    }
    std::array<double, 4> inv_sigma{};
    for (BandPass bp : kAllBandPasses)
      inv_sigma[static_cast<std::size_t>(bp_index(bp))] = 1.0 / sigma_of_lambda(nominal_center(bp), p);
    std::vector<std::vector<double>> means(cache.size());
    for (std::size_t i = 0; i < cache.size(); ++i) {
      const auto& c = cache[i];
      const double offset = condition_offset(c.cond.nd, c.cond.temp_c, c.cond.rh_pct, p) +
                            spectral[static_cast<std::size_t>(c.bp)];
      fill_mean(c, offset, inv_sigma[static_cast<std::size_t>(c.bp)], p.alpha, means[i]);
    }
    return loglik_from_means(dataset, means, kind, p.sigma_eps, p.sigma_v, p.sigma_u, options.likelihood);
  };

  std::vector<double> start;
  for (const auto& n : names) start.push_back(get_named(base, n));
  Engine engine(params, loglik, options);
  const auto res = engine.run(start);

  CombinedFit fit;
  fit.kind = kind;
  fit.params = unpack(res.natural);
  fit.covariance = res.covariance;
  fit.estimates = make_estimates(params, res.natural, res.covariance);
  fit.loglik = res.loglik;
  fit.n_params = static_cast<int>(params.size());
  fit.aic = aic(fit.loglik, fit.n_params);
  fit.diagnostics = res.diagnostics;

  fit.fixed_covariance = Eigen::MatrixXd::Zero(CombinedParams::kFixedCount, CombinedParams::kFixedCount);
  std::vector<int> map(CombinedParams::kFixedCount, -1);
  for (std::size_t i = 0; i < CombinedParams::kFixedCount; ++i)
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == CombinedParams::kFixedNames[i]) map[i] = static_cast<int>(k);
  for (std::size_t i = 0; i < map.size(); ++i)
    for (std::size_t j = 0; j < map.size(); ++j)
      if (map[i] >= 0 && map[j] >= 0)
        fit.fixed_covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = res.covariance(map[i], map[j]);
  return fit;
}

}  // namespace photodeg
