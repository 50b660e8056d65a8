#include "photodeg/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "photodeg/errors.hpp"

namespace photodeg {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  fs::path path;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    std::ostringstream os;
    os << path.string() << ":" << line << ": " << msg;
    throw ValidationError(os.str());
  }

  double number(const CsvRow& row, std::size_t col) const {
    const std::string& f = row.fields[col];
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
      fail(row.line, "column '" + header[col] + "': '" + f + "' is not a number");
    return v;
  }

  // Empty field -> NaN.
  double optional_number(const CsvRow& row, std::size_t col) const {
    if (row.fields[col].empty()) return std::numeric_limits<double>::quiet_NaN();
    return number(row, col);
  }
};

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& expected) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto fields = split(s);
    if (t.header.empty()) {
      t.header = fields;
      if (!expected.empty() && t.header != expected) {
        std::ostringstream os;
        os << "header mismatch; expected";
        for (const auto& e : expected) os << ' ' << e;
        t.fail(n, os.str());
      }
      continue;
    }
    if (fields.size() != t.header.size()) {
      std::ostringstream os;
      os << "expected " << t.header.size() << " fields, found " << fields.size();
      t.fail(n, os.str());
    }
    t.rows.push_back({n, std::move(fields)});
  }
  if (t.header.empty()) t.fail(n, "missing header row");
  return t;
}

std::string join_header(const std::vector<std::string>& cols) {
  std::string s;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) s += ',';
    s += cols[i];
  }
  return s;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string header_block(const std::string& header) {
  if (header.empty()) return {};
  return header.back() == '\n' ? header : header + "\n";
}

const std::vector<std::string> kSpecimenCols = {"specimen_id", "group_id", "bp", "nd", "temp_c", "rh_pct"};
const std::vector<std::string> kMeasurementCols = {"specimen_id", "time_h", "damage"};
const std::vector<std::string> kDosageCols = {"specimen_id", "time_h", "cum_dosage"};
const std::vector<std::string> kSplitCols = {"bp", "wavelength_nm", "proportion"};
const std::vector<std::string> kOutdoorSpecimenCols = {"specimen_id", "weather_file", "group_id"};

std::vector<std::string> weather_cols() {
  std::vector<std::string> cols = {"timestamp_iso8601", "temp_c", "rh_pct"};
  for (int c = 0; c < kCellCount; ++c) cols.push_back("d" + std::to_string(static_cast<int>(cell_center(c))));
  return cols;
}

double round12(double x) { return std::isfinite(x) ? std::strtod(format_number(x).c_str(), nullptr) : x; }

}  // namespace

long long parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  const bool ok = (n == 6 || (n == 7 && tail == 'Z')) && text.size() == (n == 7 ? 20u : 19u);
  if (!ok) throw ValidationError("invalid ISO-8601 timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw ValidationError("invalid calendar time '" + text + "'");
  const long long days = sys_days{ymd}.time_since_epoch().count();
  return days * kSecondsPerDay + h * 3600LL + mi * 60LL + s;
}

std::string format_iso8601(long long epoch_s) {
  using namespace std::chrono;
  long long days = epoch_s / kSecondsPerDay;
  long long rem = epoch_s % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600, (rem / 60) % 60,
                rem % 60);
  return buf;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  if (std::string_view(buf) == "-0") return "0";
  return buf;
}

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  parse_model_kind(model);
  if (!(level > 0.0 && level < 1.0)) throw ConfigurationError("level must lie in (0, 1)");
  if (draws < 1000) throw ConfigurationError("B must be at least 1000");
  if (bin_min <= 0 || bin_min % 12 != 0 || (24 * 60) % bin_min != 0)
    throw ConfigurationError("bin width must be a multiple of 12 minutes that divides 24 h");
  if (!(threshold > -0.6 && threshold < 0.0)) throw ConfigurationError("threshold must lie in (-0.6, 0)");
  if (!(floor < 0.0)) throw ConfigurationError("floor must be negative");
  if (quad_order < 5) throw ConfigurationError("quadrature order must be at least 5");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  return {{"B", std::to_string(draws)},
          {"bin_min", std::to_string(bin_min)},
          {"data_dir", data_dir.string()},
          {"exclude", exclude_file.string()},
          {"floor", format_number(floor)},
          {"level", format_number(level)},
          {"model", model},
          {"out_dir", out_dir.string()},
          {"quad_order", std::to_string(quad_order)},
          {"seed", std::to_string(seed)},
          {"threads", std::to_string(threads)},
          {"threshold", format_number(threshold)}};
}

void RunConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "B") draws = std::stoi(value);
    else if (key == "bin_min") bin_min = std::stoi(value);
    else if (key == "data_dir") data_dir = value;
    else if (key == "exclude") exclude_file = value;
    else if (key == "floor") floor = std::stod(value);
    else if (key == "level") level = std::stod(value);
    else if (key == "model") model = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "quad_order") quad_order = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "threads") threads = static_cast<unsigned>(std::stoul(value));
    else if (key == "threshold") threshold = std::stod(value);
    else throw ConfigurationError("unknown configuration key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ConfigurationError("configuration key '" + key + "': invalid value '" + value + "'");
  } catch (const std::out_of_range&) {
    throw ConfigurationError("configuration key '" + key + "': value out of range '" + value + "'");
  }
}

std::string RunConfig::header_line() const {
  std::ostringstream os;
  os << "# format=" << kFormatVersion;
  if (!command.empty()) os << " command=" << command;
  for (const auto& [k, v] : to_map()) os << ' ' << k << '=' << v;
  return os.str();
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigurationError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    base.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return base;
}

// ---------------------------------------------------------------------------

AccelDataset ingest_accel(const fs::path& dir, IngestReport* report) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  AccelDataset ds;
  std::map<std::string, std::size_t> index;

  const auto spec = read_csv(dir / "specimens.csv", kSpecimenCols);
  for (const auto& row : spec.rows) {
    AccelSpecimen s;
    s.id = row.fields[0];
    if (s.id.empty()) spec.fail(row.line, "empty specimen_id");
    if (index.count(s.id)) spec.fail(row.line, "duplicate specimen id '" + s.id + "'");
    s.group_id = row.fields[1];
    const auto bp = band_pass_from_center(spec.number(row, 2));
    if (!bp) spec.fail(row.line, "unknown bandpass filter '" + row.fields[2] + "'");
    s.conditions = {*bp, spec.number(row, 3), spec.number(row, 4), spec.number(row, 5)};
    try {
      s.conditions.validate();
    } catch (const Error& e) {
      spec.fail(row.line, e.what());
    }
    index[s.id] = ds.specimens.size();
    ds.specimens.push_back(std::move(s));
  }

  const auto meas = read_csv(dir / "measurements.csv", kMeasurementCols);
  for (const auto& row : meas.rows) {
    const auto it = index.find(row.fields[0]);
    if (it == index.end()) meas.fail(row.line, "unknown specimen '" + row.fields[0] + "'");
    auto& s = ds.specimens[it->second];
    const Measurement m{meas.number(row, 1), meas.number(row, 2)};
    if (!s.measurements.empty() && !(m.time_h > s.measurements.back().time_h))
      meas.fail(row.line, "specimen '" + s.id + "': times not strictly increasing");
    s.measurements.push_back(m);
    ++rep.measurement_rows[s.id];
  }

  const auto dose = read_csv(dir / "dosage.csv", kDosageCols);
  for (const auto& row : dose.rows) {
    const auto it = index.find(row.fields[0]);
    if (it == index.end()) dose.fail(row.line, "unknown specimen '" + row.fields[0] + "'");
    auto& s = ds.specimens[it->second];
    const double t = dose.number(row, 1);
    const double d = dose.number(row, 2);
    if (!s.dosage.times.empty() && !(t > s.dosage.times.back()))
      dose.fail(row.line, "specimen '" + s.id + "': dosage times not strictly increasing");
    if (!s.dosage.cumulative.empty() && d < s.dosage.cumulative.back())
      dose.fail(row.line, "specimen '" + s.id + "': cumulative dosage decreases");
    s.dosage.times.push_back(t);
    s.dosage.cumulative.push_back(d);
    ++rep.dosage_rows[s.id];
  }
  for (const auto& s : ds.specimens) {
    if (s.dosage.times.size() < 2) throw ValidationError("specimen '" + s.id + "': needs at least two dosage rows");
    if (s.measurements.empty()) rep.warnings.push_back("specimen '" + s.id + "' has no measurements");
    for (const auto& m : s.measurements)
      if (m.time_h < s.dosage.times.front() || m.time_h > s.dosage.times.back())
        throw ValidationError("specimen '" + s.id + "': measurement time outside the dosage record");
  }

  const fs::path split_path = dir / "splits.csv";
  if (fs::exists(split_path)) {
    const auto sp = read_csv(split_path, kSplitCols);
    for (const auto& row : sp.rows) {
      const auto bp = band_pass_from_center(sp.number(row, 0));
      if (!bp) sp.fail(row.line, "unknown bandpass filter '" + row.fields[0] + "'");
      auto& split = ds.splits[*bp];
      split.window = nominal_window(*bp);
      split.centers.push_back(sp.number(row, 1));
      split.proportions.push_back(sp.number(row, 2));
    }
    for (const auto& [bp, split] : ds.splits) {
      double total = 0.0;
      for (double p : split.proportions) {
        if (p < 0.0) throw ValidationError(split_path.string() + ": negative proportion");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw ValidationError(split_path.string() + ": proportions for filter " + to_string(bp) + " do not sum to 1");
    }
  } else {
    ds.splits = default_splits(synthetic_lamp());
    rep.warnings.push_back("splits.csv not found; using the built-in synthetic lamp spectrum");
  }
  ds.validate();
  return ds;
}

void emit_accel(const AccelDataset& dataset, const fs::path& dir, const std::string& header) {
  const std::string head = header_block(header);
  std::string spec = head + join_header(kSpecimenCols) + "\n";
  std::string meas = head + join_header(kMeasurementCols) + "\n";
  std::string dose = head + join_header(kDosageCols) + "\n";
  for (const auto& s : dataset.specimens) {
    spec += s.id + "," + s.group_id + "," + to_string(s.conditions.bp) + "," + format_number(s.conditions.nd) + "," +
            format_number(s.conditions.temp_c) + "," + format_number(s.conditions.rh_pct) + "\n";
    for (const auto& m : s.measurements)
      meas += s.id + "," + format_number(m.time_h) + "," + format_number(m.damage) + "\n";
    for (std::size_t i = 0; i < s.dosage.times.size(); ++i)
      dose += s.id + "," + format_number(s.dosage.times[i]) + "," + format_number(s.dosage.cumulative[i]) + "\n";
  }
  std::string splits = head + join_header(kSplitCols) + "\n";
  for (const auto& [bp, split] : dataset.splits)
    for (std::size_t i = 0; i < split.centers.size(); ++i)
      splits += to_string(bp) + "," + format_number(split.centers[i]) + "," + format_number(split.proportions[i]) + "\n";
  fs::create_directories(dir);
  write_file(dir / "specimens.csv", spec);
  write_file(dir / "measurements.csv", meas);
  write_file(dir / "dosage.csv", dose);
  write_file(dir / "splits.csv", splits);
}

std::vector<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (!s.empty() && s[0] != '#') ids.push_back(s);
  }
  return ids;
}

// ---------------------------------------------------------------------------

CovariateHistory read_weather_csv(const fs::path& path, const std::string& id) {
  const auto t = read_csv(path, weather_cols());
  CovariateHistory h;
  h.specimen_id = id;
  long long min_step = 0;
  for (const auto& row : t.rows) {
    CovariateRecord r;
    try {
      r.time_s = parse_iso8601(row.fields[0]);
    } catch (const ValidationError& e) {
      t.fail(row.line, e.what());
    }
    if (!h.records.empty()) {
      const long long step = r.time_s - h.records.back().time_s;
      if (step <= 0) t.fail(row.line, "timestamps not strictly increasing");
      min_step = min_step == 0 ? step : std::min(min_step, step);
    }
    r.temp_c = t.optional_number(row, 1);
    r.rh_pct = t.optional_number(row, 2);
    for (int c = 0; c < kCellCount; ++c) r.dosage[c] = t.optional_number(row, 3 + static_cast<std::size_t>(c));
    h.records.push_back(r);
  }
  if (min_step > 0) h.raw_interval_s = min_step;
  h.validate();
  return h;
}

void write_weather_csv(const CovariateHistory& history, const fs::path& path, const std::string& header) {
  std::string out = header_block(header) + join_header(weather_cols()) + "\n";
  auto field = [](double x) { return std::isnan(x) ? std::string() : format_number(x); };
  for (const auto& r : history.records) {
    out += format_iso8601(r.time_s) + "," + field(r.temp_c) + "," + field(r.rh_pct);
    for (double d : r.dosage) out += "," + field(d);
    out += "\n";
  }
  write_file(path, out);
}

std::vector<OutdoorRecord> ingest_outdoor(const fs::path& dir) {
  const auto spec = read_csv(dir / "outdoor_specimens.csv", kOutdoorSpecimenCols);
  std::vector<OutdoorRecord> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : spec.rows) {
    if (index.count(row.fields[0])) spec.fail(row.line, "duplicate specimen id '" + row.fields[0] + "'");
    index[row.fields[0]] = out.size();
    out.push_back({row.fields[0], row.fields[1], row.fields[2], {}, {}});
  }
  const auto meas = read_csv(dir / "outdoor_measurements.csv", kMeasurementCols);
  for (const auto& row : meas.rows) {
    const auto it = index.find(row.fields[0]);
    if (it == index.end()) meas.fail(row.line, "unknown specimen '" + row.fields[0] + "'");
    auto& r = out[it->second];
    const double t = meas.number(row, 1);
    if (!r.times_h.empty() && !(t > r.times_h.back()))
      meas.fail(row.line, "specimen '" + r.id + "': times not strictly increasing");
    r.times_h.push_back(t);
    r.damage.push_back(meas.number(row, 2));
  }
  return out;
}

void emit_outdoor(const std::vector<OutdoorRecord>& records, const fs::path& dir, const std::string& header) {
  const std::string head = header_block(header);
  std::string spec = head + join_header(kOutdoorSpecimenCols) + "\n";
  std::string meas = head + join_header(kMeasurementCols) + "\n";
  for (const auto& r : records) {
    spec += r.id + "," + r.weather + "," + r.group_id + "\n";
    for (std::size_t j = 0; j < r.times_h.size(); ++j)
      meas += r.id + "," + format_number(r.times_h[j]) + "," + format_number(r.damage[j]) + "\n";
  }
  fs::create_directories(dir);
  write_file(dir / "outdoor_specimens.csv", spec);
  write_file(dir / "outdoor_measurements.csv", meas);
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json config_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  j["command"] = config.command;
  for (const auto& [k, v] : config.to_map()) j[k] = v;
  return j;
}

nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(round12(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (j[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(n))
      throw ValidationError("fit document: covariance matrix is not square");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

nlohmann::ordered_json estimates_json(const std::vector<ParameterEstimate>& estimates) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : estimates) {
    nlohmann::ordered_json o;
    o["name"] = e.name;
    o["estimate"] = round12(e.estimate);
    o["se"] = round12(e.se);
    o["z"] = round12(e.z);
    o["p_value"] = round12(e.p_value);
    arr.push_back(o);
  }
  return arr;
}

nlohmann::ordered_json diagnostics_json(const FitDiagnostics& d) {
  nlohmann::ordered_json o;
  o["converged"] = d.converged;
  o["iterations"] = d.iterations;
  o["evaluations"] = d.evaluations;
  o["grad_inf"] = round12(d.grad_inf);
  o["starts"] = d.starts;
  o["best_start"] = d.best_start;
  o["hessian_pd"] = d.hessian_pd;
  o["pseudo_inverse"] = d.pseudo_inverse;
  o["warnings"] = d.warnings;
  return o;
}

}  // namespace

nlohmann::ordered_json fit_to_json(const CombinedFit& fit, const RunConfig& config) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormatVersion;
  doc["kind"] = "combined";
  doc["model"] = to_string(fit.kind);
  doc["config"] = config_json(config);
  doc["loglik"] = round12(fit.loglik);
  doc["n_params"] = fit.n_params;
  doc["aic"] = round12(fit.aic);
  nlohmann::ordered_json params;
  const auto fixed = fit.params.fixed();
  for (std::size_t i = 0; i < fixed.size(); ++i) params[std::string(CombinedParams::kFixedNames[i])] = round12(fixed[i]);
  params["sigma_v"] = round12(fit.params.sigma_v);
  params["sigma_u"] = round12(fit.params.sigma_u);
  params["sigma_eps"] = round12(fit.params.sigma_eps);
  doc["params"] = params;
  doc["estimates"] = estimates_json(fit.estimates);
  std::vector<std::string> names;
  for (const auto& e : fit.estimates) names.push_back(e.name);
  doc["covariance"] = {{"names", names}, {"matrix", matrix_json(fit.covariance)}};
  std::vector<std::string> fixed_names(CombinedParams::kFixedNames.begin(), CombinedParams::kFixedNames.end());
  doc["fixed_covariance"] = {{"names", fixed_names}, {"matrix", matrix_json(fit.fixed_covariance)}};
  doc["diagnostics"] = diagnostics_json(fit.diagnostics);
  return doc;
}

nlohmann::ordered_json fit_to_json(const CategoricalFit& fit, const RunConfig& config) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormatVersion;
  doc["kind"] = "categorical";
  doc["config"] = config_json(config);
  doc["loglik"] = round12(fit.loglik);
  doc["n_params"] = fit.n_params;
  doc["aic"] = round12(fit.aic);
  doc["estimates"] = estimates_json(fit.estimates);
  std::vector<std::string> names;
  for (const auto& e : fit.estimates) names.push_back(e.name);
  doc["covariance"] = {{"names", names}, {"matrix", matrix_json(fit.covariance)}};
  doc["diagnostics"] = diagnostics_json(fit.diagnostics);
  return doc;
}

CombinedFit combined_fit_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kFormatVersion)
      throw ValidationError("fit document: unsupported format " + doc.at("format").get<std::string>());
    if (doc.at("kind").get<std::string>() != "combined") throw ValidationError("fit document is not a combined fit");
    CombinedFit fit;
    fit.kind = parse_model_kind(doc.at("model").get<std::string>());
    fit.loglik = doc.at("loglik").get<double>();
    fit.n_params = doc.at("n_params").get<int>();
    fit.aic = doc.at("aic").get<double>();
    const auto& p = doc.at("params");
    std::array<double, CombinedParams::kFixedCount> fixed{};
    for (std::size_t i = 0; i < fixed.size(); ++i) fixed[i] = p.at(std::string(CombinedParams::kFixedNames[i])).get<double>();
    fit.params.set_fixed(fixed);
    fit.params.sigma_v = p.at("sigma_v").get<double>();
    fit.params.sigma_u = p.at("sigma_u").get<double>();
    fit.params.sigma_eps = p.at("sigma_eps").get<double>();
    for (const auto& e : doc.at("estimates")) {
      ParameterEstimate pe;
      pe.name = e.at("name").get<std::string>();
      pe.estimate = e.at("estimate").get<double>();
      pe.se = e.at("se").get<double>();
      pe.z = e.at("z").get<double>();
      pe.p_value = e.at("p_value").get<double>();
      fit.estimates.push_back(pe);
    }
    fit.covariance = matrix_from_json(doc.at("covariance").at("matrix"));
    fit.fixed_covariance = matrix_from_json(doc.at("fixed_covariance").at("matrix"));
    if (fit.fixed_covariance.rows() != static_cast<Eigen::Index>(CombinedParams::kFixedCount))
      throw ValidationError("fit document: fixed-effect covariance must be 11x11");
    const auto& d = doc.at("diagnostics");
    fit.diagnostics.converged = d.at("converged").get<bool>();
    fit.diagnostics.hessian_pd = d.at("hessian_pd").get<bool>();
    fit.diagnostics.pseudo_inverse = d.at("pseudo_inverse").get<bool>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fit document: ") + e.what());
  }
}

std::string fit_report(const std::vector<ParameterEstimate>& estimates, double loglik, double aic, int n_params,
                       const std::string& title, const RunConfig& config) {
  std::ostringstream os;
  os << config.header_line() << "\n";
  os << "# " << title << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %16s %14s %10s\n", "parameter", "estimate", "std_error", "p_value");
  os << buf;
  for (const auto& e : estimates) {
    const std::string p = e.p_value < 1e-4 ? "<0.0001" : format_number(e.p_value);
    std::snprintf(buf, sizeof buf, "%-22s %16s %14s %10s\n", e.name.c_str(), format_number(e.estimate).c_str(),
                  format_number(e.se).c_str(), p.c_str());
    os << buf;
  }
  os << "loglik = " << format_number(loglik) << "\n";
  os << "n_params = " << n_params << "\n";
  os << "aic = " << format_number(aic) << "\n";
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string prediction_csv(const PredictionBand& band, const std::string& header) {
  std::string out = header_block(header) + "timestamp,s_star_cum,point,lower,upper\n";
  for (std::size_t k = 0; k < band.size(); ++k) {
    out += format_iso8601(band.timestamps_s[k]) + "," + format_number(band.s_star_cum[k]) + "," +
           format_number(band.point[k]) + ",";
    if (band.has_band()) out += format_number(band.lower[k]) + "," + format_number(band.upper[k]);
    else out += ",";
    out += "\n";
  }
  return out;
}

std::string failure_csv(const std::vector<FailureRow>& rows, double threshold, const std::string& header) {
  std::string out = header_block(header) + "specimen_id,threshold,failure_time_h,failure_timestamp,multiple_crossings\n";
  for (const auto& r : rows) {
    out += r.specimen_id + "," + format_number(threshold) + ",";
    if (r.crossing) {
      out += format_number(r.crossing->time) + "," +
             format_iso8601(r.origin_s + static_cast<long long>(std::llround(r.crossing->time * 3600.0))) + "," +
             (r.crossing->multiple ? "1" : "0");
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

std::string overlay_csv(const std::vector<OverlayRow>& rows, const std::string& header) {
  std::string out = header_block(header) + "specimen_id,series,time_h,damage\n";
  for (const auto& r : rows)
    out += r.specimen_id + "," + r.series + "," + format_number(r.time_h) + "," + format_number(r.damage) + "\n";
  return out;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows, const std::string& header) {
  std::string out = header_block(header) + "model,loglik,n_params,aic,prediction,mse\n";
  for (const auto& r : rows) {
    out += r.model + "," + format_number(r.loglik) + "," + std::to_string(r.n_params) + "," +
           format_number(aic(r.loglik, r.n_params)) + "," + r.prediction + "," +
           (r.mse ? format_number(*r.mse) : std::string()) + "\n";
  }
  return out;
}

}  // namespace photodeg
