// crpsagg: online aggregation of probabilistic forecasts under CRPS.
//
//   crpsagg synth --seed 7 --out runs/synth
//   crpsagg aggregate --input data/sample_forecasts.csv --confidence --alpha 0 --out runs/agg
//   crpsagg report runs/agg --rounds 10,250

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "crpsagg/cli.hpp"

namespace {

struct Flags {
  crpsagg::RunConfig config;
  std::string rule = "aa";
  std::string method = "method1";
  std::string config_file;
  bool lenient = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App& cmd, Flags& flags) {
  cmd.add_option("--rule", flags.rule, "aggregation rule")
      ->check(CLI::IsMember({"aa", "wa"}, CLI::ignore_case));
  cmd.add_option("--a", flags.config.a, "lower end of the outcome interval");
  cmd.add_option("--b", flags.config.b, "upper end of the outcome interval");
  cmd.add_option("--grid", flags.config.grid, "number of grid cells");
  cmd.add_option("--alpha", flags.config.alpha, "Fixed Share parameter (0 disables)");
  cmd.add_flag("--confidence", flags.config.confidence, "use per-expert confidence levels");
  cmd.add_option("--seed", flags.seed, "random seed");
  cmd.add_option("--out", flags.config.out, "output directory");
  auto* strict = cmd.add_flag("--strict", "reject out-of-range outcomes (default)");
  cmd.add_flag("--lenient", flags.lenient, "clip out-of-range outcomes with a warning")
      ->excludes(strict);
  cmd.add_option("--config", flags.config_file, "JSON file; its fields override flags")
      ->check(CLI::ExistingFile);
}

crpsagg::RunConfig resolve(const CLI::App& cmd, Flags& flags) {
  crpsagg::RunConfig config = flags.config;
  config.rule = crpsagg::parse_rule(flags.rule);
  config.strict = !flags.lenient;
  config.scenario.method = crpsagg::parse_mixing_method(flags.method);
  if (cmd.count("--seed")) config.seed = flags.seed;
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    crpsagg::apply_json(config, nlohmann::json::parse(in));
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online aggregation of probabilistic forecasts under CRPS"};
  app.require_subcommand(1);

  Flags synth_flags;
  auto* synth = app.add_subcommand("synth", "run AA and WA on a synthetic triangular mixture");
  add_common(*synth, synth_flags);
  synth->add_option("--horizon", synth_flags.config.scenario.horizon, "number of rounds");
  synth->add_option("--segments", synth_flags.config.scenario.segments, "equal-length segments");
  synth->add_option("--method", synth_flags.method, "mixing schedule")
      ->check(CLI::IsMember({"method1", "method2", "1", "2"}));

  Flags aggregate_flags;
  auto* aggregate = app.add_subcommand("aggregate", "aggregate a forecast CSV stream");
  add_common(*aggregate, aggregate_flags);
  aggregate->add_option("--input", aggregate_flags.config.input, "forecast CSV");

  std::string run_dir;
  std::string report_out;
  std::vector<std::size_t> rounds;
  auto* report = app.add_subcommand("report", "export curves and snapshots for a run");
  report->add_option("run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--rounds", rounds, "rounds for CDF and density snapshots")->delimiter(',');
  report->add_option("--out", report_out, "output directory (default: the run directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json result;
    if (*synth) {
      result = crpsagg::cmd_synth(resolve(*synth, synth_flags));
    } else if (*aggregate) {
      result = crpsagg::cmd_aggregate(resolve(*aggregate, aggregate_flags));
    } else {
      std::optional<std::filesystem::path> out;
      if (!report_out.empty()) out = report_out;
      result = crpsagg::cmd_report(run_dir, rounds, out);
    }
    std::cout << result.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
