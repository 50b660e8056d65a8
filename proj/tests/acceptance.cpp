// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset (e.g. "acceptance 4 8"); no arguments runs everything.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "photodeg/errors.hpp"
#include "photodeg/fit.hpp"
#include "photodeg/io.hpp"
#include "photodeg/likelihood.hpp"
#include "photodeg/prediction.hpp"
#include "photodeg/simulate.hpp"
#include "photodeg/spectral.hpp"

using namespace photodeg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

CombinedParams truth(double sigma_v = 0.1) {
  auto p = CombinedParams::published();
  p.sigma_v = sigma_v;
  p.sigma_eps = 0.01;
  return p;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_normal(double x, double mean, double sd) {
  const double r = (x - mean) / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * r * r;
}

// ---------------------------------------------------------------------------

Outcome aic_arithmetic() {
  struct Row {
    double loglik;
    int k;
    double printed;
  };
  const Row rows[] = {{15740.22, 9, -31462.44}, {30201.98, 13, -60377.95}, {30414.43, 14, -60800.85}};
  Outcome o{true, ""};
  for (const auto& r : rows) {
    const double a = aic(r.loglik, r.k);
    o.pass &= std::abs(a - r.printed) <= 0.02;
    o.detail += fmt("%.2f ", a);
  }
  return o;
}

Outcome cross_model_consistency() {
  const auto p = CombinedParams::published();
  const double lambdas[] = {306.0, 326.0, 353.0, 452.0};
  const double table3[] = {1.5591, 1.2336, 1.0443, 0.8416};
  Outcome o{true, "sigma"};
  for (int i = 0; i < 4; ++i) {
    const double s = sigma_of_lambda(lambdas[i], p);
    o.pass &= std::abs(s - table3[i]) <= 0.03;
    o.detail += fmt(" %.4f", s);
  }
  const double f25 = arrhenius_log(25.0, p.ea_over_r) - arrhenius_log(35.0, p.ea_over_r);
  const double f45 = arrhenius_log(45.0, p.ea_over_r) - arrhenius_log(35.0, p.ea_over_r);
  o.pass &= std::abs(f25 - (-0.1963)) <= 0.02 && std::abs(f45 - 0.1973) <= 0.02;
  o.detail += fmt("; log f(25) %.4f", f25) + fmt(", log f(45) %.4f", f45);
  return o;
}

Outcome nd_reciprocity() {
  const double p = CombinedParams::published().p;
  const double overall = std::exp(std::log(0.8) + nd_log_effect(0.8, p));
  return {std::abs(overall - 0.906) <= 0.001, fmt("0.8^(1+p) = %.5f", overall)};
}

// Monochromatic constant input against the closed-form sigmoid. Returns the
// largest relative error over the bins, or the error at the last bin.
double closed_form_error(long long record_s, long long bin_s, SlopeRule rule, int cell, bool last_only = false) {
  const auto p = truth();
  const double per_hour = 0.05;
  const double temp = 30.0, rh = 40.0;
  CovariateHistory h;
  h.specimen_id = "M";
  h.raw_interval_s = record_s;
  const long long start = 1275350400;
  const int records = static_cast<int>(40 * kSecondsPerDay / record_s);
  for (int i = 0; i < records; ++i) {
    CovariateRecord r;
    r.time_s = start + i * record_s;
    r.temp_c = temp;
    r.rh_pct = rh;
    r.dosage[static_cast<std::size_t>(cell)] = per_hour * static_cast<double>(record_s) / 3600.0;
    h.records.push_back(r);
  }
  PredictOptions opt;
  opt.bin_s = bin_s;
  opt.rule = rule;
  const auto band = predict_path(h, p, 0.0, opt);
  const double lam = cell_center(cell);
  const double sigma = p.sigma0 + std::exp(p.sigma1 + p.sigma2 * lam);
  const double off = p.eta0 - p.ea_over_r / (temp + 273.15) - p.beta_rh * (rh - p.rh0) * (rh - p.rh0) +
                     p.beta_lambda * lam;
  double worst = 0.0;
  for (std::size_t k = 0; k < band.size(); ++k) {
    const double dose = per_hour * band.times_h[k];
    const double want = p.alpha * logistic((std::log(dose) + off) / sigma);
    const double rel = std::abs(band.point[k] - want) / std::abs(want);
    worst = last_only ? rel : std::max(worst, rel);
  }
  return worst;
}

Outcome closed_form_equivalence() {
  Outcome o{true, ""};
  for (int cell : {3, 13, 76}) {
    const double e60 = closed_form_error(720, 3600, SlopeRule::kExact, cell);
    const double e6 = closed_form_error(360, 360, SlopeRule::kExact, cell);
    o.pass &= e60 < 1e-3 && e6 < 1e-4;
    o.detail += fmt("%.0f nm: ", cell_center(cell)) + fmt("60-min %.1e", e60) + fmt(", 6-min %.1e; ", e6);
  }
  // The midpoint slope rule is reported for reference where it converges.
  o.detail += fmt("midpoint rule at 452 nm, end of path: 60-min %.1e",
                  closed_form_error(720, 3600, SlopeRule::kMidpoint, 76, true)) +
              fmt(", 6-min %.1e", closed_form_error(360, 360, SlopeRule::kMidpoint, 76, true));
  return o;
}

// Stage-wise fit: categorical model first, combined model B seeded from it.
CombinedFit stagewise_fit(std::uint64_t seed) {
  const auto t = truth();
  const auto design = AccelDesign::laboratory(t, seed);
  const auto data = clean(simulate_accel(design, t));
  FitOptions options;
  options.seed = seed;
  const auto cat = fit_categorical(data, options);
  const auto init = seed_from_categorical(cat, data.splits);
  return fit_combined(drop_condition(data, 55.0, 75.0), init, ModelKind::kB, options);
}

Outcome parameter_recovery(const CombinedFit& fit) {
  const auto want = truth().fixed();
  const std::set<std::string> relative = {"alpha", "beta_lambda", "p", "ea_over_r", "rh0", "sigma0", "sigma1", "sigma2"};
  Outcome o{fit.diagnostics.converged, ""};
  double worst_z = 0.0, worst_rel = 0.0;
  std::string worst_z_name, worst_rel_name;
  for (std::size_t k = 0; k < want.size(); ++k) {
    const auto* e = fit.find(CombinedParams::kFixedNames[k]);
    const double z = std::abs(e->estimate - want[k]) / e->se;
    o.pass &= z < 3.0;
    if (z > worst_z) worst_z = z, worst_z_name = e->name;
    if (relative.count(e->name)) {
      const double rel = std::abs(e->estimate - want[k]) / std::abs(want[k]);
      o.pass &= rel <= 0.10;
      if (rel > worst_rel) worst_rel = rel, worst_rel_name = e->name;
    }
  }
  o.detail = "largest |error|/SE " + fmt("%.2f", worst_z) + " (" + worst_z_name + "), largest relative error " +
             fmt("%.3f", worst_rel) + " (" + worst_rel_name + ")";
  return o;
}

// Coverage of the latent outdoor path e^v Omega(t) by 95% calibrated bands.
// Each replicate simulates a new accelerated study, fits it, and predicts
// 50 outdoor specimens exposed on one weather record.
Outcome interval_coverage(const CombinedFit& first_fit, int replicates, int per_replicate, int draws) {
  const auto t = truth();
  const int days = 90;
  const double mid_h = 45.0 * 24.0, end_h = days * 24.0;
  long long hits_mid = 0, hits_end = 0, total = 0;
  for (int r = 0; r < replicates; ++r) {
    const CombinedFit fit = r == 0 ? first_fit : stagewise_fit(1000 + static_cast<std::uint64_t>(r));
    WeatherSpec spec;
    spec.specimen_id = "W" + std::to_string(r + 1);
    spec.start_s += static_cast<long long>(r) * 12 * kSecondsPerDay;
    spec.n_days = days;
    spec.seed = 500 + static_cast<std::uint64_t>(r);
    spec.cloudiness = 0.3;
    const auto binned = bin_covariates(simulate_weather(spec), 3600);
    IntervalOptions io;
    io.draws = draws;
    io.level = 0.95;
    io.times_h = {mid_h, end_h};
    io.seed = 77 + static_cast<std::uint64_t>(r);
    const auto band = calibrated_interval(binned, fit, io);
    for (int k = 0; k < per_replicate; ++k) {
      OutdoorSimOptions so;
      so.specimen_id = "R" + std::to_string(r) + "S" + std::to_string(k);
      so.seed = 91;
      so.times_h = {mid_h, end_h};
      so.add_noise = false;
      const auto s = simulate_outdoor(binned, t, so);
      hits_mid += s.latent[0] >= band.lower[0] && s.latent[0] <= band.upper[0];
      hits_end += s.latent[1] >= band.lower[1] && s.latent[1] <= band.upper[1];
      ++total;
    }
  }
  const double cm = static_cast<double>(hits_mid) / static_cast<double>(total);
  const double ce = static_cast<double>(hits_end) / static_cast<double>(total);
  Outcome o;
  o.pass = cm >= 0.92 && cm <= 0.98 && ce >= 0.92 && ce <= 0.98;
  o.detail = std::to_string(total) + " specimens, B = " + std::to_string(draws) + ": coverage mid " + fmt("%.3f", cm) +
             ", end " + fmt("%.3f", ce);
  return o;
}

Outcome adjustment_improves(int seeds) {
  const auto t = truth(0.2);
  int better = 0;
  double sum_raw = 0.0, sum_adj = 0.0;
  for (int s = 0; s < seeds; ++s) {
    double se_raw = 0.0, se_adj = 0.0;
    long n = 0;
    for (int w = 0; w < 5; ++w) {
      WeatherSpec spec;
      spec.specimen_id = "W" + std::to_string(w);
      spec.start_s += static_cast<long long>(w) * 30 * kSecondsPerDay;
      spec.n_days = 120;
      spec.seed = 1000 * static_cast<std::uint64_t>(s) + static_cast<std::uint64_t>(w);
      spec.cloudiness = 0.3;
      const auto binned = bin_covariates(simulate_weather(spec), 3600);
      const auto band = predict_path(binned, t);
      for (int k = 0; k < 10; ++k) {
        OutdoorSimOptions so;
        so.specimen_id = "S" + std::to_string(s) + "W" + std::to_string(w) + "K" + std::to_string(k);
        so.seed = 31 + static_cast<std::uint64_t>(s);
        const auto sim = simulate_outdoor(binned, t, so);
        std::vector<double> yhat;
        for (double h : sim.times_h) yhat.push_back(damage_at(band, h));
        const auto v = estimate_random_effect(sim.measured, yhat);
        for (std::size_t j = 0; j < yhat.size(); ++j) {
          const double d0 = sim.measured[j] - yhat[j];
          const double d1 = sim.measured[j] - v.scale * yhat[j];
          se_raw += d0 * d0;
          se_adj += d1 * d1;
          ++n;
        }
      }
    }
    const double mse_raw = se_raw / static_cast<double>(n), mse_adj = se_adj / static_cast<double>(n);
    better += mse_adj < mse_raw;
    sum_raw += mse_raw;
    sum_adj += mse_adj;
  }
  const double frac = static_cast<double>(better) / seeds;
  return {frac >= 0.95, std::to_string(better) + "/" + std::to_string(seeds) + " seeds improved; mean MSE " +
                            fmt("%.6f", sum_raw / seeds) + " -> " + fmt("%.6f", sum_adj / seeds)};
}

// log of the trapezoid integral of exp(f) over [lo, hi].
double dense_log_integral(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  std::vector<double> vals(static_cast<std::size_t>(n) + 1);
  double peak = -INFINITY;
  for (int i = 0; i <= n; ++i) peak = std::max(peak, vals[static_cast<std::size_t>(i)] = f(lo + h * i));
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) acc += ((i == 0 || i == n) ? 0.5 : 1.0) * std::exp(vals[static_cast<std::size_t>(i)] - peak);
  return peak + std::log(acc * h);
}

Outcome quadrature_fidelity() {
  const auto t = truth();
  const auto data = clean(simulate_accel(AccelDesign::laboratory(t, 808), t));
  std::mt19937_64 gen(808);
  std::vector<std::size_t> pick(data.specimens.size());
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
  std::shuffle(pick.begin(), pick.end(), gen);
  pick.resize(20);
  const auto rule = gauss_hermite(15);
  double worst = 0.0;
  for (std::size_t i : pick) {
    const auto& sp = data.specimens[i];
    const auto mean = combined_mean(t, sp, data.splits);
    std::vector<double> y;
    for (const auto& m : sp.measurements) y.push_back(m.damage);
    const double q = random_effect_loglik(specimen_stats(y, mean), t.sigma_eps, t.sigma_v, rule);
    const double dense = dense_log_integral(
        [&](double v) {
          double acc = log_normal(v, 0.0, t.sigma_v);
          for (std::size_t j = 0; j < y.size(); ++j) acc += log_normal(y[j], std::exp(v) * mean[j], t.sigma_eps);
          return acc;
        },
        -1.5, 1.5, 300000);
    worst = std::max(worst, std::abs(q - dense));
  }
  return {worst < 1e-6, "20 specimens, largest |order-15 - dense| = " + fmt("%.2e", worst)};
}

Outcome invariant_suites() {
  std::vector<std::pair<std::string, bool>> checks;

  // P(lambda) normalization on random curves.
  {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> g, v;
      for (double x = 296.0; x <= 536.0; x += 1.0) g.push_back(x), v.push_back(u(gen));
      for (BandPass bp : kAllBandPasses) {
        const auto split = area_proportions(SpectralCurve(g, v), nominal_window(bp));
        double s = 0.0;
        for (double p : split.proportions) s += p, ok &= p >= 0.0;
        ok &= std::abs(s - 1.0) < 1e-10;
      }
    }
    checks.push_back({"P(lambda) normalization", ok});
  }

  const auto t = truth();
  WeatherSpec spec;
  spec.n_days = 60;
  spec.cloudiness = 0.4;
  const auto binned = bin_covariates(simulate_weather(spec), 3600);

  // Monotone damage paths, bounded by the asymptote.
  {
    bool ok = true;
    for (double v : {-0.3, 0.0, 0.3}) {
      const auto band = predict_path(binned, t, v);
      for (std::size_t k = 1; k < band.size(); ++k) ok &= band.point[k] <= band.point[k - 1];
      for (double x : band.point) ok &= std::abs(x) < std::abs(t.alpha * std::exp(v));
    }
    checks.push_back({"monotone damage paths", ok});
  }

  CombinedFit fit;
  fit.kind = ModelKind::kB;
  fit.params = t;
  fit.fixed_covariance = Eigen::MatrixXd::Zero(11, 11);
  const double se[11] = {0.01013, 0.00026, 0.00781, 75.83458, 0.00001, 0.28749,
                         0.25662, 0.09428, 0.00664, 0.18760, 0.00062};
  for (int i = 0; i < 11; ++i) fit.fixed_covariance(i, i) = se[i] * se[i];

  // Interval nesting across levels, and thread-count determinism.
  {
    IntervalOptions io;
    io.draws = 2000;
    io.level = 0.95;
    const auto b95 = calibrated_interval(binned, fit, io);
    io.level = 0.99;
    const auto b99 = calibrated_interval(binned, fit, io);
    bool ok = true;
    for (std::size_t j = 0; j < b95.size(); ++j) ok &= b99.lower[j] <= b95.lower[j] && b99.upper[j] >= b95.upper[j];
    checks.push_back({"interval nesting", ok});

    io.level = 0.95;
    io.threads = 4;
    const auto threaded = calibrated_interval(binned, fit, io);
    bool same = threaded.lower == b95.lower && threaded.upper == b95.upper;
    const auto data = clean(simulate_accel(AccelDesign::laboratory(t, 5), t));
    LikelihoodOptions one, four;
    four.threads = 4;
    same &= marginal_loglik(t, data, ModelKind::kB, one) == marginal_loglik(t, data, ModelKind::kB, four);
    const auto again = simulate_accel(AccelDesign::laboratory(t, 5), t);
    same &= clean(again).measurement_count() == data.measurement_count() &&
            again.specimens[7].measurements[3].damage ==
                simulate_accel(AccelDesign::laboratory(t, 5), t).specimens[7].measurements[3].damage;
    checks.push_back({"seed determinism across thread counts", same});
  }

  // Scale-equivariance of v_hat.
  {
    OutdoorSimOptions so;
    const auto sim = simulate_outdoor(binned, t, so);
    const auto band = predict_path(binned, t);
    std::vector<double> yhat;
    for (double h : sim.times_h) yhat.push_back(damage_at(band, h));
    const double v = estimate_random_effect(sim.measured, yhat).v;
    bool ok = true;
    for (double c : {0.3, 2.5}) {
      auto y = sim.measured;
      for (double& x : y) x *= c;
      ok &= std::abs(estimate_random_effect(y, yhat).v - (v + std::log(c))) < 1e-12;
    }
    checks.push_back({"scale-equivariance of v_hat", ok});
  }

  // Ingest/emit round trip.
  {
    const fs::path dir = fs::temp_directory_path() / "photodeg_acceptance_roundtrip";
    fs::remove_all(dir);
    emit_accel(simulate_accel(AccelDesign::laboratory(t, 6), t), dir / "a", "# acceptance");
    const auto first = ingest_accel(dir / "a");
    emit_accel(first, dir / "b", "# acceptance");
    const auto second = ingest_accel(dir / "b");
    bool ok = first.specimens.size() == second.specimens.size();
    for (std::size_t i = 0; ok && i < first.specimens.size(); ++i) {
      const auto& x = first.specimens[i];
      const auto& y = second.specimens[i];
      ok &= x.id == y.id && x.group_id == y.group_id && x.conditions.bp == y.conditions.bp &&
            x.conditions.nd == y.conditions.nd && x.conditions.temp_c == y.conditions.temp_c &&
            x.conditions.rh_pct == y.conditions.rh_pct && x.dosage.times == y.dosage.times &&
            x.dosage.cumulative == y.dosage.cumulative && x.measurements.size() == y.measurements.size();
      for (std::size_t j = 0; ok && j < x.measurements.size(); ++j)
        ok &= x.measurements[j].time_h == y.measurements[j].time_h && x.measurements[j].damage == y.measurements[j].damage;
    }
    for (const auto& [bp, s] : first.splits) ok &= s.proportions == second.splits.at(bp).proportions;
    fs::remove_all(dir);
    checks.push_back({"ingest/emit round trip", ok});
  }

  Outcome o{true, ""};
  for (const auto& [name, ok] : checks) {
    o.pass &= ok;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += name + (ok ? " ok" : " FAILED");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  int failures = 0;
  auto report = [&](int n, const std::string& title, const std::function<Outcome()>& run) {
    if (!wanted(n)) return;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d: %s - %s [%s] (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += !o.pass;
  };

  report(1, "AIC arithmetic", aic_arithmetic);
  report(2, "cross-model consistency", cross_model_consistency);
  report(3, "ND reciprocity", nd_reciprocity);
  report(4, "closed-form equivalence", closed_form_equivalence);

  std::optional<CombinedFit> fit;
  auto recovery_fit = [&]() -> const CombinedFit& {
    if (!fit) fit = stagewise_fit(1000);
    return *fit;
  };
  report(5, "parameter recovery", [&] { return parameter_recovery(recovery_fit()); });
  report(6, "interval calibration", [&] { return interval_coverage(recovery_fit(), 10, 50, 5000); });
  report(7, "random-effect adjustment", [] { return adjustment_improves(20); });
  report(8, "quadrature fidelity", quadrature_fidelity);
  report(9, "invariant suites", invariant_suites);
  return failures == 0 ? 0 : 1;
}
