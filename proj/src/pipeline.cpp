#include "photodeg/pipeline.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "photodeg/errors.hpp"
#include "photodeg/rng.hpp"

namespace photodeg {

namespace fs = std::filesystem;

namespace {

constexpr long long kSimulationStart = 1275350400;  // 2010-06-01T00:00:00Z
constexpr int kStartSpacingDays = 45;

struct Outdoor {
  std::vector<OutdoorRecord> records;
  std::map<std::string, BinnedCovariates> binned;  // by weather file
  std::vector<std::string> warnings;
};

Outdoor load_outdoor(const RunConfig& config) {
  Outdoor out;
  out.records = ingest_outdoor(config.data_dir);
  if (out.records.empty()) throw ValidationError("no outdoor specimens in " + config.data_dir.string());
  for (const auto& r : out.records) {
    if (out.binned.count(r.weather)) continue;
    CovariateHistory h = read_weather_csv(config.data_dir / r.weather, r.weather);
    if (h.has_missing()) {
      std::ostringstream os;
      os << r.weather << ": imputed " << format_number(100.0 * h.missing_fraction()) << "% of records";
      out.warnings.push_back(os.str());
      h = impute_covariates(h);
    }
    out.binned[r.weather] = bin_covariates(h, static_cast<long long>(config.bin_min) * 60);
  }
  return out;
}

CombinedFit load_fit(const fs::path& path) {
  try {
    return combined_fit_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

const fs::path& first_fit(const PipelineRequest& request) {
  if (request.fits.empty()) throw ConfigurationError(request.config.command + " needs --fit");
  return request.fits.front();
}

std::vector<double> predicted_at(const PredictionBand& band, const OutdoorRecord& r) {
  std::vector<double> out;
  out.reserve(r.times_h.size());
  for (double t : r.times_h) out.push_back(damage_at(band, t));
  return out;
}

struct Adjusted {
  std::vector<double> v;  // per record
  std::vector<std::string> warnings;
};

Adjusted adjust_effects(const CombinedFit& fit, const std::vector<OutdoorRecord>& records,
                        const std::vector<std::vector<double>>& predicted) {
  Adjusted out;
  out.v.assign(records.size(), 0.0);
  if (fit.kind == ModelKind::kC && fit.params.sigma_u > 0.0) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].group_id].push_back(i);
    for (const auto& [gid, members] : groups) {
      std::vector<std::vector<double>> y, yhat;
      for (std::size_t i : members) {
        y.push_back(records[i].damage);
        yhat.push_back(predicted[i]);
      }
      const auto est = estimate_nested_effects(y, yhat, fit.params.sigma_v, fit.params.sigma_eps);
      for (std::size_t k = 0; k < members.size(); ++k) out.v[members[k]] = est.u + est.w[k];
      for (const auto& w : est.warnings) out.warnings.push_back("group " + gid + ": " + w);
    }
    return out;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      const auto est = estimate_random_effect(records[i].damage, predicted[i]);
      out.v[i] = est.v;
      if (est.fallback) out.warnings.push_back(records[i].id + ": " + est.warning);
    } catch (const ValidationError& e) {
      out.warnings.push_back(records[i].id + ": " + e.what() + "; using v = 0");
    }
  }
  return out;
}

struct MseSummary {
  double unadjusted = 0.0;
  double adjusted = 0.0;
};

MseSummary outdoor_mse(const CombinedFit& fit, const Outdoor& outdoor, std::vector<std::string>& warnings) {
  std::vector<std::vector<double>> predicted;
  std::vector<double> y, p1, p2;
  for (const auto& r : outdoor.records)
    predicted.push_back(predicted_at(predict_path(outdoor.binned.at(r.weather), fit.params), r));
  const auto adj = adjust_effects(fit, outdoor.records, predicted);
  warnings.insert(warnings.end(), adj.warnings.begin(), adj.warnings.end());
  for (std::size_t i = 0; i < outdoor.records.size(); ++i) {
    const double scale = std::exp(adj.v[i]);
    for (std::size_t j = 0; j < predicted[i].size(); ++j) {
      y.push_back(outdoor.records[i].damage[j]);
      p1.push_back(predicted[i][j]);
      p2.push_back(scale * predicted[i][j]);
    }
  }
  return {prediction_mse(y, p1), prediction_mse(y, p2)};
}

std::string band_file_name(const std::string& id) { return id + ".csv"; }

}  // namespace

PipelineResult run_simulate(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  const std::string header = config.header_line();

  CombinedParams truth = CombinedParams::published();
  truth.sigma_v = request.sigma_v;
  truth.sigma_eps = request.sigma_eps;

  AccelDesign design = AccelDesign::laboratory(truth, config.seed);
  design.sigma_v = request.sigma_v;
  design.sigma_eps = request.sigma_eps;
  const AccelDataset accel = simulate_accel(design, truth);
  emit_accel(accel, config.out_dir / "accel", header);
  for (const char* f : {"specimens.csv", "measurements.csv", "dosage.csv", "splits.csv"})
    result.artifacts.push_back(config.out_dir / "accel" / f);

  // Specimens are placed in pairs sharing one exposure start and weather
  // record; the pair is the specimen group.
  const fs::path outdoor_dir = config.out_dir / "outdoor";
  std::vector<OutdoorRecord> records;
  const int n = std::max(0, request.outdoor_specimens);
  for (int g = 0; g * 2 < n; ++g) {
    WeatherSpec spec;
    spec.specimen_id = "W" + std::to_string(g + 1);
    spec.start_s = kSimulationStart + static_cast<long long>(g) * kStartSpacingDays * kSecondsPerDay;
    spec.n_days = request.outdoor_days;
    spec.missing_fraction = 0.0032;
    spec.seed = mix64(config.seed ^ static_cast<std::uint64_t>(g + 1));
    CovariateHistory raw = simulate_weather(spec);
    const std::string weather_file = "weather_" + spec.specimen_id + ".csv";
    write_weather_csv(raw, outdoor_dir / weather_file, header);
    result.artifacts.push_back(outdoor_dir / weather_file);
    const CovariateHistory complete = raw.has_missing() ? impute_covariates(raw) : raw;
    const BinnedCovariates binned = bin_covariates(complete, static_cast<long long>(config.bin_min) * 60);
    for (int k = 0; k < 2 && 2 * g + k < n; ++k) {
      OutdoorSimOptions opt;
      opt.specimen_id = "O" + std::to_string(2 * g + k + 1);
      opt.seed = config.seed;
      opt.bin_s = binned.bin_s;
      const OutdoorSpecimen s = simulate_outdoor(binned, truth, opt);
      records.push_back({s.id, weather_file, spec.specimen_id, s.times_h, s.measured});
    }
  }
  emit_outdoor(records, outdoor_dir, header);
  result.artifacts.push_back(outdoor_dir / "outdoor_specimens.csv");
  result.artifacts.push_back(outdoor_dir / "outdoor_measurements.csv");

  nlohmann::ordered_json doc;
  doc["format"] = kFormatVersion;
  doc["config"] = config.to_map();
  nlohmann::ordered_json params;
  const auto fixed = truth.fixed();
  for (std::size_t i = 0; i < fixed.size(); ++i) params[std::string(CombinedParams::kFixedNames[i])] = fixed[i];
  params["sigma_v"] = truth.sigma_v;
  params["sigma_u"] = truth.sigma_u;
  params["sigma_eps"] = truth.sigma_eps;
  doc["truth"] = params;
  write_text(config.out_dir / "truth.json", doc.dump(2) + "\n");
  result.artifacts.push_back(config.out_dir / "truth.json");

  std::ostringstream os;
  os << "simulated " << accel.specimens.size() << " accelerated and " << records.size() << " outdoor specimens";
  result.summary = os.str();
  return result;
}

PipelineResult run_fit(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  IngestReport ingest;
  AccelDataset data = ingest_accel(config.data_dir, &ingest);
  result.warnings = ingest.warnings;
  if (!config.exclude_file.empty()) data.exclusions = read_id_list(config.exclude_file);
  CleanReport cleaning;
  const AccelDataset cleaned = clean(data, {config.floor, 3}, &cleaning);
  for (const auto& id : cleaning.dropped_too_short)
    result.warnings.push_back("specimen " + id + " dropped: fewer than 3 points above the floor");
  if (cleaned.specimens.empty()) throw ValidationError("no specimens left to fit");

  FitOptions options;
  options.likelihood.quad_order = config.quad_order;
  options.likelihood.threads = config.threads;
  options.seed = config.seed;
  const std::string header = config.header_line();

  const CategoricalFit cat = fit_categorical(cleaned, options);
  write_text(config.out_dir / "categorical_fit.json", fit_to_json(cat, config).dump(2) + "\n");
  write_text(config.out_dir / "categorical_report.txt",
             fit_report(cat.estimates, cat.loglik, cat.aic, cat.n_params, "categorical-effects model", config));
  result.artifacts.push_back(config.out_dir / "categorical_fit.json");
  result.artifacts.push_back(config.out_dir / "categorical_report.txt");
  for (const auto& w : cat.diagnostics.warnings) result.warnings.push_back("categorical: " + w);

  const CombinedParams init = seed_from_categorical(cat, cleaned.splits);
  const AccelDataset combined_data =
      request.keep_all_conditions ? cleaned : drop_condition(cleaned, 55.0, 75.0);
  const ModelKind kind = parse_model_kind(config.model);
  const CombinedFit fit = fit_combined(combined_data, init, kind, options);
  const std::string m = to_string(kind);
  write_text(config.out_dir / ("fit_" + m + ".json"), fit_to_json(fit, config).dump(2) + "\n");
  write_text(config.out_dir / ("report_" + m + ".txt"),
             fit_report(fit.estimates, fit.loglik, fit.aic, fit.n_params, "combined model " + m, config));
  result.artifacts.push_back(config.out_dir / ("fit_" + m + ".json"));
  result.artifacts.push_back(config.out_dir / ("report_" + m + ".txt"));
  for (const auto& w : fit.diagnostics.warnings) result.warnings.push_back("combined: " + w);

  std::ostringstream os;
  os << "model " << m << ": loglik " << format_number(fit.loglik) << ", " << fit.n_params << " parameters, AIC "
     << format_number(fit.aic) << " (" << combined_data.specimens.size() << " specimens)";
  result.summary = os.str();
  return result;
}

PipelineResult run_predict(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  const CombinedFit fit = load_fit(first_fit(request));
  const Outdoor outdoor = load_outdoor(config);
  result.warnings = outdoor.warnings;
  const std::string header = config.header_line();

  std::vector<FailureRow> failures;
  std::vector<OverlayRow> overlay;
  for (const auto& r : outdoor.records) {
    PredictionBand band = predict_path(outdoor.binned.at(r.weather), fit.params);
    band.specimen_id = r.id;
    const fs::path path = config.out_dir / "predictions" / band_file_name(r.id);
    write_text(path, prediction_csv(band, header));
    result.artifacts.push_back(path);
    failures.push_back({r.id, band_failure_time(band, config.threshold), band.origin_s});
    for (std::size_t j = 0; j < r.times_h.size(); ++j) {
      overlay.push_back({r.id, "measured", r.times_h[j], r.damage[j]});
      overlay.push_back({r.id, "predicted", r.times_h[j], damage_at(band, r.times_h[j])});
    }
  }
  write_text(config.out_dir / "failures.csv", failure_csv(failures, config.threshold, header));
  write_text(config.out_dir / "overlay.csv", overlay_csv(overlay, header));
  result.artifacts.push_back(config.out_dir / "failures.csv");
  result.artifacts.push_back(config.out_dir / "overlay.csv");
  std::size_t crossed = 0;
  for (const auto& f : failures) crossed += f.crossing.has_value();
  result.summary = std::to_string(outdoor.records.size()) + " specimens predicted, " + std::to_string(crossed) +
                   " reach the threshold";
  return result;
}

PipelineResult run_interval(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  const CombinedFit fit = load_fit(first_fit(request));
  const Outdoor outdoor = load_outdoor(config);
  result.warnings = outdoor.warnings;
  const std::string header = config.header_line();

  IntervalOptions options;
  options.level = config.level;
  options.draws = config.draws;
  options.seed = config.seed;
  options.threads = config.threads;
  std::map<std::string, PredictionBand> bands;  // one band per weather record
  for (const auto& r : outdoor.records) {
    auto it = bands.find(r.weather);
    if (it == bands.end()) {
      it = bands.emplace(r.weather, calibrated_interval(outdoor.binned.at(r.weather), fit, options)).first;
      for (const auto& w : it->second.warnings) result.warnings.push_back(r.weather + ": " + w);
    }
    PredictionBand band = it->second;
    band.specimen_id = r.id;
    const fs::path path = config.out_dir / "intervals" / band_file_name(r.id);
    write_text(path, prediction_csv(band, header));
    result.artifacts.push_back(path);
  }
  result.summary = std::to_string(bands.size()) + " calibrated bands at level " + format_number(config.level) +
                   " with B = " + std::to_string(config.draws);
  return result;
}

PipelineResult run_adjust(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  const CombinedFit fit = load_fit(first_fit(request));
  const Outdoor outdoor = load_outdoor(config);
  result.warnings = outdoor.warnings;
  const std::string header = config.header_line();

  std::vector<PredictionBand> bands;
  std::vector<std::vector<double>> predicted;
  for (const auto& r : outdoor.records) {
    bands.push_back(predict_path(outdoor.binned.at(r.weather), fit.params));
    predicted.push_back(predicted_at(bands.back(), r));
  }
  const Adjusted adj = adjust_effects(fit, outdoor.records, predicted);
  result.warnings.insert(result.warnings.end(), adj.warnings.begin(), adj.warnings.end());

  std::string effects = header + "\nspecimen_id,group_id,v_hat,scale\n";
  std::vector<OverlayRow> overlay;
  std::vector<FailureRow> failures;
  std::vector<double> y, p1, p2;
  for (std::size_t i = 0; i < outdoor.records.size(); ++i) {
    const auto& r = outdoor.records[i];
    const double scale = std::exp(adj.v[i]);
    effects += r.id + "," + r.group_id + "," + format_number(adj.v[i]) + "," + format_number(scale) + "\n";
    PredictionBand band = bands[i];
    band.specimen_id = r.id;
    for (double& x : band.point) x *= scale;
    const fs::path path = config.out_dir / "adjusted" / band_file_name(r.id);
    write_text(path, prediction_csv(band, header));
    result.artifacts.push_back(path);
    failures.push_back({r.id, band_failure_time(band, config.threshold), band.origin_s});
    for (std::size_t j = 0; j < r.times_h.size(); ++j) {
      overlay.push_back({r.id, "measured", r.times_h[j], r.damage[j]});
      overlay.push_back({r.id, "predicted", r.times_h[j], predicted[i][j]});
      overlay.push_back({r.id, "adjusted", r.times_h[j], scale * predicted[i][j]});
      y.push_back(r.damage[j]);
      p1.push_back(predicted[i][j]);
      p2.push_back(scale * predicted[i][j]);
    }
  }
  write_text(config.out_dir / "random_effects.csv", effects);
  write_text(config.out_dir / "overlay_adjusted.csv", overlay_csv(overlay, header));
  write_text(config.out_dir / "failures_adjusted.csv", failure_csv(failures, config.threshold, header));
  result.artifacts.push_back(config.out_dir / "random_effects.csv");
  result.artifacts.push_back(config.out_dir / "overlay_adjusted.csv");
  result.artifacts.push_back(config.out_dir / "failures_adjusted.csv");
  result.summary = "MSE unadjusted " + format_number(prediction_mse(y, p1)) + ", adjusted " +
                   format_number(prediction_mse(y, p2));
  return result;
}

PipelineResult run_compare(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  std::vector<ComparisonRow> rows = request.manual_rows;
  const bool have_outdoor = fs::exists(config.data_dir / "outdoor_specimens.csv");
  std::optional<Outdoor> outdoor;
  if (!request.fits.empty() && have_outdoor) {
    outdoor = load_outdoor(config);
    result.warnings = outdoor->warnings;
  }
  for (const auto& path : request.fits) {
    const CombinedFit fit = load_fit(path);
    const std::string m = to_string(fit.kind);
    if (outdoor) {
      const MseSummary mse = outdoor_mse(fit, *outdoor, result.warnings);
      rows.push_back({m, fit.loglik, fit.n_params, m + "1", mse.unadjusted});
      rows.push_back({m, fit.loglik, fit.n_params, m + "2", mse.adjusted});
    } else {
      rows.push_back({m, fit.loglik, fit.n_params, "", std::nullopt});
    }
  }
  if (rows.empty()) throw ConfigurationError("compare needs --fit files or --entry rows");
  const std::string table = comparison_table(rows, config.header_line());
  write_text(config.out_dir / "comparison.csv", table);
  result.artifacts.push_back(config.out_dir / "comparison.csv");
  result.summary = table;
  return result;
}

PipelineResult run_validate(const PipelineRequest& request) {
  const RunConfig& config = request.config;
  PipelineResult result;
  nlohmann::ordered_json doc;
  doc["format"] = kFormatVersion;
  doc["config"] = config.to_map();
  bool any = false;
  std::ostringstream summary;
  if (fs::exists(config.data_dir / "specimens.csv")) {
    any = true;
    IngestReport ingest;
    AccelDataset data = ingest_accel(config.data_dir, &ingest);
    if (!config.exclude_file.empty()) data.exclusions = read_id_list(config.exclude_file);
    CleanReport cleaning;
    const AccelDataset cleaned = clean(data, {config.floor, 3}, &cleaning);
    result.warnings.insert(result.warnings.end(), ingest.warnings.begin(), ingest.warnings.end());
    nlohmann::ordered_json a;
    a["specimens"] = data.specimens.size();
    a["measurements"] = data.measurement_count();
    a["retained_specimens"] = cleaned.specimens.size();
    a["retained_measurements"] = cleaned.measurement_count();
    a["dropped_points"] = cleaning.dropped_points;
    a["excluded"] = cleaning.excluded;
    a["dropped_too_short"] = cleaning.dropped_too_short;
    doc["accelerated"] = a;
    summary << "accelerated: " << data.specimens.size() << " specimens, " << cleaned.specimens.size()
            << " retained after cleaning\n";
  }
  if (fs::exists(config.data_dir / "outdoor_specimens.csv")) {
    any = true;
    const Outdoor outdoor = load_outdoor(config);
    result.warnings.insert(result.warnings.end(), outdoor.warnings.begin(), outdoor.warnings.end());
    nlohmann::ordered_json o;
    o["specimens"] = outdoor.records.size();
    o["weather_records"] = outdoor.binned.size();
    doc["outdoor"] = o;
    summary << "outdoor: " << outdoor.records.size() << " specimens, " << outdoor.binned.size()
            << " weather records\n";
  }
  if (!any) throw ValidationError("no recognised data files in " + config.data_dir.string());
  doc["warnings"] = result.warnings;
  write_text(config.out_dir / "validation.json", doc.dump(2) + "\n");
  result.artifacts.push_back(config.out_dir / "validation.json");
  result.summary = summary.str();
  return result;
}

PipelineResult run_pipeline(const PipelineRequest& request) {
  request.config.validate();
  const std::string& c = request.config.command;
  if (c == "simulate") return run_simulate(request);
  if (c == "fit") return run_fit(request);
  if (c == "predict") return run_predict(request);
  if (c == "interval") return run_interval(request);
  if (c == "adjust") return run_adjust(request);
  if (c == "compare") return run_compare(request);
  if (c == "validate") return run_validate(request);
  throw ConfigurationError("unknown command '" + c + "'");
}

namespace {

const char* error_type(const std::exception& e) {
  if (dynamic_cast<const ImputationError*>(&e)) return "ImputationError";
  if (dynamic_cast<const MissingDataError*>(&e)) return "MissingDataError";
  if (dynamic_cast<const ConfigurationError*>(&e)) return "ConfigurationError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const RankDeficiencyError*>(&e)) return "RankDeficiencyError";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const DegenerateInputError*>(&e)) return "DegenerateInputError";
  if (dynamic_cast<const ExtrapolationError*>(&e)) return "ExtrapolationError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigurationError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 3;
  if (dynamic_cast<const Error*>(&e)) return 4;
  return 1;
}

nlohmann::ordered_json error_report(const std::exception& error, const std::string& command) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormatVersion;
  doc["status"] = "error";
  doc["command"] = command;
  doc["type"] = error_type(error);
  doc["message"] = error.what();
  doc["exit_code"] = exit_code_for(error);
  return doc;
}

}  // namespace photodeg
