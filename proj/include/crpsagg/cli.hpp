// Run configuration, forecast CSV ingestion, run logs and the three commands
// behind the crpsagg executable.
//
// Forecast CSV: one header row, then one row per round
//
//   t,y,expert1_kind,expert1_params,expert1_conf,expert2_kind,...
//   1,0.42,tgm,0.5;0.4;0.1;0.5;0.6;0.1,1,triangular,0;0.5;1,0.25,...
//
// Rounds must be numbered 1, 2, ... without gaps. Kinds are point, uniform,
// triangular and tgm; parameters are separated by ';'.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crpsagg/aggregation.hpp"
#include "crpsagg/distributions.hpp"
#include "crpsagg/regret.hpp"
#include "crpsagg/synthetic.hpp"

#include <json.hpp>

namespace crpsagg {

inline constexpr int kSchemaVersion = 1;

/// Formats with 17 significant digits so the value reads back bit-exactly.
std::string format_real(double value);

struct RunConfig {
  double a = 0.0;
  double b = 1.0;
  std::size_t grid = kDefaultGridSize;
  Rule rule = Rule::AA;
  double alpha = kDefaultAlpha;
  bool confidence = false;
  /// Strict mode rejects out-of-range outcomes; lenient mode clips them.
  bool strict = true;
  std::optional<std::uint64_t> seed;
  MixtureScenario scenario;
  std::filesystem::path input;
  std::filesystem::path out = "run";

  GridDomain domain() const { return GridDomain(a, b, grid); }
  AggregatorConfig aggregator(std::size_t experts, Rule rule) const;

  /// Checks every field; throws std::invalid_argument with a readable message.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Overwrites the fields present in `j`, leaving the others untouched.
void apply_json(RunConfig& config, const nlohmann::json& j);

/// Malformed forecast file. line() is 1-based and counts the header.
class IngestError : public std::runtime_error {
public:
  IngestError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct ForecastRow {
  std::size_t t = 0;
  double y = 0.0;
  std::vector<ParametricDistribution> experts;
  std::vector<double> confidences;
  /// The outcome was outside [a, b] and clipped (lenient mode only).
  bool clipped = false;
};

/// Streams rows of a forecast CSV in order.
class ForecastReader {
public:
  ForecastReader(std::istream& in, Interval range, bool strict);

  std::size_t experts() const { return experts_; }
  /// Next row, or nullopt at end of file. Throws IngestError.
  std::optional<ForecastRow> next();

private:
  std::istream& in_;
  Interval range_;
  bool strict_;
  std::size_t experts_ = 0;
  std::size_t line_ = 1;
  std::size_t expected_round_ = 1;
};

/// Writes one forecast row in the format ForecastReader accepts.
void write_forecast_header(std::ostream& out, std::size_t experts);
void write_forecast_row(std::ostream& out, const ForecastRow& row);

/// Piecewise-linear confidence: 1 on [core_lo, core_hi], falling linearly to 0
/// over `ramp` on both sides. With `periodic`, x and the core live on the circle [0, 1).
double trapezoid_confidence(double x, double core_lo, double core_hi, double ramp,
                            bool periodic);

/// Bundled demo data: 500 rounds on [0, 1], four experts (one generalist, three
/// specialists with trapezoidal confidences over a cycle of 50 rounds).
void write_sample_forecasts(std::ostream& out, std::uint64_t seed, std::size_t rounds = 500);

struct RunResult {
  RegretLedger ledger;
  std::vector<std::pair<std::size_t, GridCdf>> snapshots;
  std::size_t clipped_outcomes = 0;
  std::size_t asleep_rounds = 0;
};

/// Runs one rule over a synthetic scenario; captures learner CDFs at `snapshot_rounds`.
RunResult run_synthetic(const RunConfig& config, Rule rule,
                        const std::vector<std::size_t>& snapshot_rounds = {});

/// Runs the configured rule over the forecast CSV at config.input.
RunResult run_forecast_file(const RunConfig& config,
                            const std::vector<std::size_t>& snapshot_rounds = {});

void write_rounds_csv(const std::filesystem::path& path, const RegretLedger& ledger);
void write_regret_csv(const std::filesystem::path& path, const RegretLedger& ledger);
nlohmann::json run_summary(const std::string& command, const RunConfig& config,
                           const RunResult& result);

/// Reads rounds.csv back into a ledger with the given configuration.
RegretLedger read_rounds_csv(const std::filesystem::path& path, const LedgerConfig& config);

/// synth: runs AA and WA over the same sampled sequence; writes aa/ and wa/
/// run directories plus outcomes.csv and a comparison summary.json.
nlohmann::json cmd_synth(const RunConfig& config);

/// aggregate: one online run over config.input.
nlohmann::json cmd_aggregate(const RunConfig& config);

/// report: loss curves, weights, regret curves with the bound line and CDF /
/// density snapshots at `rounds` for one run directory (or each run of a synth
/// directory). Outputs go to `out`, defaulting to the run directory.
nlohmann::json cmd_report(const std::filesystem::path& run_dir,
                          const std::vector<std::size_t>& rounds,
                          const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace crpsagg
