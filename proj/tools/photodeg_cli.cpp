// photodeg command-line front end.

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "photodeg/errors.hpp"
#include "photodeg/pipeline.hpp"

namespace {

using photodeg::ComparisonRow;
using photodeg::PipelineRequest;

ComparisonRow parse_entry(const std::string& text) {
  // NAME:LOGLIK:K
  std::stringstream ss(text);
  std::string name, loglik, k;
  if (!std::getline(ss, name, ':') || !std::getline(ss, loglik, ':') || !std::getline(ss, k))
    throw photodeg::ConfigurationError("--entry expects NAME:LOGLIK:N_PARAMS, got '" + text + "'");
  try {
    return {name, std::stod(loglik), std::stoi(k), "", std::nullopt};
  } catch (const std::exception&) {
    throw photodeg::ConfigurationError("--entry expects NAME:LOGLIK:N_PARAMS, got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated photodegradation models and outdoor damage prediction"};
  app.require_subcommand(1);

  std::string config_file, data_dir, out_dir, model, exclude;
  int quad_order = 0, bin_min = 0, draws = 0;
  double level = 0.0, threshold = 0.0, floor = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> fits, entries;
  PipelineRequest request;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value configuration file; flags override it");
    sub->add_option("--data", data_dir, "input directory");
    sub->add_option("--out", out_dir, "output directory (default: $PHOTODEG_OUT or ./out)");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    sub->add_option("--bin-min", bin_min, "prediction bin width in minutes");
    sub->add_option("--threshold", threshold, "failure threshold on the damage scale");
  };

  auto* sim = app.add_subcommand("simulate", "write synthetic accelerated and outdoor datasets");
  common(sim);
  sim->add_option("--outdoor", request.outdoor_specimens, "number of outdoor specimens");
  sim->add_option("--days", request.outdoor_days, "outdoor exposure length in days");
  sim->add_option("--sigma-v", request.sigma_v, "specimen random-effect SD");
  sim->add_option("--sigma-eps", request.sigma_eps, "measurement error SD");

  auto* fit = app.add_subcommand("fit", "categorical then combined model fit");
  common(fit);
  fit->add_option("--model", model, "combined model variant")->check(CLI::IsMember({"A", "B", "C"}));
  fit->add_option("--quad-order", quad_order, "Gauss-Hermite order");
  fit->add_option("--floor", floor, "drop measurements below this damage");
  fit->add_option("--exclude", exclude, "file with specimen ids to exclude");
  fit->add_flag("--keep-all-conditions", request.keep_all_conditions,
                "keep the 55 C / 75% RH specimens in the combined fit");

  auto* predict = app.add_subcommand("predict", "point predictions and failure times");
  common(predict);
  predict->add_option("--fit", fits, "combined fit document")->required();

  auto* interval = app.add_subcommand("interval", "calibrated prediction bands");
  common(interval);
  interval->add_option("--fit", fits, "combined fit document")->required();
  interval->add_option("--B", draws, "Monte Carlo draws");
  interval->add_option("--level", level, "nominal coverage");

  auto* adjust = app.add_subcommand("adjust", "random-effect adjusted predictions");
  common(adjust);
  adjust->add_option("--fit", fits, "combined fit document")->required();

  auto* compare = app.add_subcommand("compare", "AIC and prediction MSE table");
  common(compare);
  compare->add_option("--fit", fits, "combined fit documents");
  compare->add_option("--entry", entries, "extra row NAME:LOGLIK:N_PARAMS");

  auto* validate = app.add_subcommand("validate", "check input files");
  common(validate);
  validate->add_option("--floor", floor, "damage floor used for the cleaning summary");
  validate->add_option("--exclude", exclude, "file with specimen ids to exclude");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    photodeg::RunConfig& config = request.config;
    if (!config_file.empty()) config = photodeg::load_config(config_file, config);
    if (const char* env = std::getenv("PHOTODEG_OUT"); env && *env) config.out_dir = env;
    auto given = [&](const char* flag) { return sub->get_option_no_throw(flag) && sub->count(flag) > 0; };
    if (given("--data")) config.data_dir = data_dir;
    if (given("--out")) config.out_dir = out_dir;
    if (given("--seed")) config.seed = seed;
    if (given("--threads")) config.threads = threads;
    if (given("--bin-min")) config.bin_min = bin_min;
    if (given("--threshold")) config.threshold = threshold;
    if (given("--model")) config.model = model;
    if (given("--quad-order")) config.quad_order = quad_order;
    if (given("--floor")) config.floor = floor;
    if (given("--exclude")) config.exclude_file = exclude;
    if (given("--B")) config.draws = draws;
    if (given("--level")) config.level = level;
    config.command = command;
    for (const auto& f : fits) request.fits.emplace_back(f);
    for (const auto& e : entries) request.manual_rows.push_back(parse_entry(e));

    const auto result = photodeg::run_pipeline(request);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (!result.summary.empty()) std::cout << result.summary << (result.summary.back() == '\n' ? "" : "\n");
    for (const auto& a : result.artifacts) std::cout << "wrote " << a.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << photodeg::error_report(e, command).dump() << "\n";
    return photodeg::exit_code_for(e);
  }
}
