#include "photodeg/prediction.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "photodeg/errors.hpp"
#include "photodeg/parallel.hpp"
#include "photodeg/rng.hpp"

namespace photodeg {

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Path with v = 0 at every bin end, plus the running total effective dosage.
void accumulate(const BinnedCovariates& binned, const CombinedParams& params, SlopeRule rule,
                std::vector<double>& omega, std::vector<double>* s_star) {
  const CellArray w = cell_weights(params.beta_lambda);
  CellArray inv_sigma{};
  for (int c = 0; c < kCellCount; ++c) inv_sigma[c] = 1.0 / sigma_of_lambda(cell_center(c), params);

  omega.assign(binned.bins.size(), 0.0);
  if (s_star) s_star->assign(binned.bins.size(), 0.0);
  double total = 0.0;
  double path = 0.0;
  CellArray inc{};
  for (std::size_t k = 0; k < binned.bins.size(); ++k) {
    const auto& bin = binned.bins[k];
    double delta = 0.0;
    for (int c = 0; c < kCellCount; ++c) {
      inc[c] = bin.dosage[c] * w[c];
      delta += inc[c];
    }
    if (delta > 0.0) {
      // ND is 100% outdoors, so the p term vanishes.
      const double offset = condition_offset(1.0, bin.mean_temp_c, bin.mean_rh_pct, params);
      double change = 0.0;
      if (rule == SlopeRule::kExact) {
        const double log_after = std::log(total + delta);
        const double log_before = total > 0.0 ? std::log(total) : -std::numeric_limits<double>::infinity();
        for (int c = 0; c < kCellCount; ++c) {
          if (inc[c] == 0.0) continue;
          const double hi = logistic((log_after + offset) * inv_sigma[c]);
          const double lo = total > 0.0 ? logistic((log_before + offset) * inv_sigma[c]) : 0.0;
          change += inc[c] * (hi - lo);
        }
        change /= delta;
      } else {
        const double mid = total + 0.5 * delta;
        const double log_mid = std::log(mid);
        for (int c = 0; c < kCellCount; ++c) {
          if (inc[c] == 0.0) continue;
          const double z = (log_mid + offset) * inv_sigma[c];
          const double l = logistic(z);
          change += inc[c] * l * (1.0 - l) * inv_sigma[c] / mid;
        }
      }
      path += params.alpha * change;
      total += delta;
    }
    omega[k] = path;
    if (s_star) (*s_star)[k] = total;
  }
}

void fill_times(const BinnedCovariates& binned, PredictionBand& band) {
  band.specimen_id = binned.specimen_id;
  band.origin_s = binned.origin_s;
  band.times_h.resize(binned.bins.size());
  band.timestamps_s.resize(binned.bins.size());
  for (std::size_t k = 0; k < binned.bins.size(); ++k) {
    band.timestamps_s[k] = binned.bins[k].end_s;
    band.times_h[k] = static_cast<double>(binned.bins[k].end_s - binned.origin_s) / 3600.0;
  }
}

// Linear interpolation with the value 0 at time 0.
double interpolate(const std::vector<double>& times, const std::vector<double>& values, double t) {
  if (times.empty() || t < 0.0 || t > times.back() * (1.0 + 1e-12))
    throw ExtrapolationError("prediction: requested time outside the covariate history");
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - times.begin(),
                                                                          static_cast<std::ptrdiff_t>(times.size()) - 1));
  const double t1 = times[hi];
  const double v1 = values[hi];
  const double t0 = hi == 0 ? 0.0 : times[hi - 1];
  const double v0 = hi == 0 ? 0.0 : values[hi - 1];
  if (t >= t1 || t1 == t0) return v1;
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

std::vector<double> default_times(const BinnedCovariates& binned) {
  std::vector<double> out;
  if (binned.bins.empty()) return out;
  const double last = static_cast<double>(binned.bins.back().end_s - binned.origin_s) / 3600.0;
  for (double t = 24.0; t < last; t += 24.0) out.push_back(t);
  out.push_back(last);
  return out;
}

// theta_hat + L z with L L' = Sigma (eigen square root; tolerates the zero
// rows of parameters held fixed).
Eigen::MatrixXd covariance_root(const Eigen::MatrixXd& cov) {
  if (cov.rows() != static_cast<Eigen::Index>(CombinedParams::kFixedCount) || cov.cols() != cov.rows())
    throw ConfigurationError("calibrated_interval: fixed-effect covariance must be 11x11");
  if (!cov.allFinite()) throw DomainError("calibrated_interval: covariance has non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

bool drawable(const CombinedParams& p) {
  if (!(p.alpha < 0.0) || !(p.sigma0 > 0.0)) return false;
  for (double lam : {kFirstCellNm, cell_center(kCellCount - 1)})
    if (!std::isfinite(sigma_of_lambda(lam, p))) return false;
  return std::isfinite(p.ea_over_r) && std::isfinite(p.eta0);
}

double quantile(std::vector<double>& xs, double q) {
  // Linear interpolation between order statistics.
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(lo), xs.end());
  const double a = xs[lo];
  double b = a;
  if (hi != lo) b = *std::min_element(xs.begin() + static_cast<std::ptrdiff_t>(lo) + 1, xs.end());
  return a + (b - a) * (pos - static_cast<double>(lo));
}

}  // namespace

PredictionBand predict_path(const BinnedCovariates& binned, const CombinedParams& params, double v, SlopeRule rule) {
  if (binned.bins.empty()) throw MissingDataError("predict_path: empty covariate history");
  if (!(params.alpha <= 0.0) || !(params.sigma0 > 0.0))
    throw DomainError("predict_path: parameters out of domain (need alpha <= 0, sigma0 > 0)");
  PredictionBand band;
  fill_times(binned, band);
  accumulate(binned, params, rule, band.point, &band.s_star_cum);
  if (v != 0.0) {
    const double scale = std::exp(v);
    for (double& x : band.point) x *= scale;
  }
  return band;
}

PredictionBand predict_path(const CovariateHistory& history, const CombinedParams& params, double v,
                            const PredictOptions& options) {
  return predict_path(bin_covariates(history, options.bin_s, options.max_gap_s), params, v, options.rule);
}

double interpolate_band(const PredictionBand& band, const std::vector<double>& values, double time_h) {
  if (values.size() != band.times_h.size()) throw ConfigurationError("interpolate_band: size mismatch");
  return interpolate(band.times_h, values, time_h);
}

std::optional<FailureCrossing> band_failure_time(const PredictionBand& band, double threshold) {
  if (band.times_h.empty()) return std::nullopt;
  std::vector<double> grid;
  grid.reserve(band.times_h.size() + 1);
  grid.push_back(0.0);
  grid.insert(grid.end(), band.times_h.begin(), band.times_h.end());
  return failure_time([&](double t) { return damage_at(band, t); }, grid, threshold);
}

PivotSample calibration_pivots(const BinnedCovariates& binned, const CombinedFit& fit,
                               const IntervalOptions& options) {
  if (options.draws < 1) throw ConfigurationError("calibrated_interval: need at least one draw");
  if (binned.bins.empty()) throw MissingDataError("calibrated_interval: empty covariate history");
  const CombinedParams& hat = fit.params;
  const double sigma_v = hat.sigma_v;

  PredictionBand point_band = predict_path(binned, hat, 0.0, options.rule);
  PivotSample out;
  out.times_h = options.times_h.empty() ? default_times(binned) : options.times_h;
  out.draws = options.draws;
  for (double t : out.times_h) out.point.push_back(damage_at(point_band, t));

  const Eigen::MatrixXd root = covariance_root(fit.fixed_covariance);
  const auto theta_hat = hat.fixed();
  const std::size_t nt = out.times_h.size();
  out.w.assign(static_cast<std::size_t>(options.draws) * nt, 0.0);
  std::vector<long long> redraws(static_cast<std::size_t>(options.draws), 0);

  parallel_for(static_cast<std::size_t>(options.draws), options.threads, [&](std::size_t b) {
    StreamRng rng(options.seed, b);
    CombinedParams star = hat;
    Eigen::VectorXd z(static_cast<Eigen::Index>(CombinedParams::kFixedCount));
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw DomainError("calibrated_interval: could not draw valid parameters");
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
      const Eigen::VectorXd delta = root * z;
      auto theta = theta_hat;
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += delta[static_cast<Eigen::Index>(i)];
      star.set_fixed(theta);
      if (drawable(star)) break;
      ++redraws[b];
    }
    const double v_star = sigma_v * rng.normal();
    std::vector<double> omega;
    accumulate(binned, star, options.rule, omega, nullptr);
    const double scale = std::exp(v_star);
    for (std::size_t j = 0; j < nt; ++j) {
      const double drawn = scale * interpolate(point_band.times_h, omega, out.times_h[j]);
      const double base = out.point[j];
      double w;
      if (sigma_v > 0.0) {
        // F(drawn | theta_hat) = P(exp(v) * base <= drawn), base < 0
        if (base < 0.0 && drawn < 0.0)
          w = 0.5 * std::erfc(std::log(drawn / base) / (sigma_v * std::numbers::sqrt2));
        else
          w = base < 0.0 ? 1.0 : 0.5;
      } else {
        w = drawn;  // percentile interval on the damage scale
      }
      out.w[b * nt + j] = w;
    }
  });
  for (long long r : redraws) out.redraws += r;
  return out;
}

PredictionBand calibrated_interval(const BinnedCovariates& binned, const CombinedFit& fit,
                                   const IntervalOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0))
    throw ConfigurationError("calibrated_interval: level must lie in (0, 1)");
  const PivotSample sample = calibration_pivots(binned, fit, options);

  PredictionBand band;
  band.specimen_id = binned.specimen_id;
  band.origin_s = binned.origin_s;
  band.level = options.level;
  band.redraws = sample.redraws;
  band.times_h = sample.times_h;
  band.point = sample.point;
  const PredictionBand full = predict_path(binned, fit.params, 0.0, options.rule);
  for (double t : band.times_h) {
    band.timestamps_s.push_back(binned.origin_s + static_cast<long long>(std::llround(t * 3600.0)));
    band.s_star_cum.push_back(interpolate_band(full, full.s_star_cum, t));
  }

  const double a = 1.0 - options.level;
  const double sigma_v = fit.params.sigma_v;
  const boost::math::normal_distribution<double> unit;
  const std::size_t nt = band.times_h.size();
  std::vector<double> col(static_cast<std::size_t>(sample.draws));
  for (std::size_t j = 0; j < nt; ++j) {
    for (int b = 0; b < sample.draws; ++b) col[static_cast<std::size_t>(b)] = sample.w[static_cast<std::size_t>(b) * nt + j];
    const double wl = quantile(col, 0.5 * a);
    const double wu = quantile(col, 1.0 - 0.5 * a);
    const double base = band.point[j];
    double lo, hi;
    if (sigma_v > 0.0 && base < 0.0) {
      auto invert = [&](double w) {
        w = std::clamp(w, 1e-15, 1.0 - 1e-15);
        return base * std::exp(sigma_v * boost::math::quantile(unit, 1.0 - w));
      };
      lo = invert(wl);
      hi = invert(wu);
    } else if (sigma_v > 0.0) {
      lo = hi = base;
    } else {
      lo = wl;
      hi = wu;
    }
    band.lower.push_back(std::min({lo, hi, base}));
    band.upper.push_back(std::max({lo, hi, base}));
  }

  if (fit.diagnostics.pseudo_inverse)
    band.warnings.push_back("calibrated_interval: fit covariance is a pseudo-inverse");
  const double frac = static_cast<double>(sample.redraws) / static_cast<double>(sample.redraws + sample.draws);
  if (frac > 0.10) {
    std::ostringstream os;
    os << "calibrated_interval: " << sample.redraws << " parameter draws were invalid and redrawn ("
       << 100.0 * frac << "%)";
    band.warnings.push_back(os.str());
  }
  return band;
}

RandomEffectEstimate estimate_random_effect(std::span<const double> measured, std::span<const double> predicted,
                                            int first, int last) {
  if (measured.size() != predicted.size())
    throw ValidationError("estimate_random_effect: measured and predicted lengths differ");
  if (first < 1 || last < first) throw ConfigurationError("estimate_random_effect: invalid window");
  if (measured.size() < static_cast<std::size_t>(last)) {
    std::ostringstream os;
    os << "estimate_random_effect: need at least " << last << " measurements, got " << measured.size();
    throw ValidationError(os.str());
  }
  double sxy = 0.0, sxx = 0.0;
  for (int j = first - 1; j < last; ++j) {
    sxy += measured[static_cast<std::size_t>(j)] * predicted[static_cast<std::size_t>(j)];
    sxx += predicted[static_cast<std::size_t>(j)] * predicted[static_cast<std::size_t>(j)];
  }
  if (!(sxx > 0.0)) throw DegenerateInputError("estimate_random_effect: predictions are zero on the window");
  RandomEffectEstimate out;
  const double ratio = sxy / sxx;
  if (!(ratio > 0.0)) {
    out.fallback = true;
    out.warning = "estimate_random_effect: nonpositive scale estimate; using v = 0";
    return out;
  }
  out.scale = ratio;
  out.v = std::log(ratio);
  return out;
}

NestedEffectEstimate estimate_nested_effects(const std::vector<std::vector<double>>& measured,
                                             const std::vector<std::vector<double>>& predicted, double sigma_w,
                                             double sigma_eps, int first, int last) {
  if (measured.size() != predicted.size() || measured.empty())
    throw ValidationError("estimate_nested_effects: need matching, nonempty member lists");
  std::vector<double> ys, yh;
  for (std::size_t k = 0; k < measured.size(); ++k) {
    if (measured[k].size() != predicted[k].size() || measured[k].size() < static_cast<std::size_t>(last))
      throw ValidationError("estimate_nested_effects: member has too few measurements");
    for (int j = first - 1; j < last; ++j) {
      ys.push_back(measured[k][static_cast<std::size_t>(j)]);
      yh.push_back(predicted[k][static_cast<std::size_t>(j)]);
    }
  }
  NestedEffectEstimate out;
  const int n = static_cast<int>(ys.size());
  const auto group = estimate_random_effect(ys, yh, 1, n);
  if (group.fallback) out.warnings.push_back(group.warning);
  out.u = group.v;
  for (std::size_t k = 0; k < measured.size(); ++k) {
    std::vector<double> scaled(predicted[k]);
    for (double& x : scaled) x *= group.scale;
    const auto own = estimate_random_effect(measured[k], scaled, first, last);
    if (own.fallback) out.warnings.push_back(own.warning);
    double sxx = 0.0;
    for (int j = first - 1; j < last; ++j) sxx += scaled[static_cast<std::size_t>(j)] * scaled[static_cast<std::size_t>(j)];
    // var(w_hat) ~ sigma_eps^2 / sum(yhat^2) on the log scale
    const double var_hat = sigma_eps * sigma_eps / sxx;
    const double shrink = sigma_w > 0.0 ? sigma_w * sigma_w / (sigma_w * sigma_w + var_hat) : 0.0;
    out.w.push_back(shrink * own.v);
  }
  return out;
}

double prediction_mse(std::span<const double> measured, std::span<const double> predicted) {
  if (measured.empty()) throw ValidationError("prediction_mse: no points");
  if (measured.size() != predicted.size()) throw ValidationError("prediction_mse: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double d = measured[i] - predicted[i];
    acc += d * d;
  }
  return acc / static_cast<double>(measured.size());
}

}  // namespace photodeg
