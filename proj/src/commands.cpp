#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "crpsagg/cli.hpp"

namespace crpsagg {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

void make_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
}

LedgerConfig ledger_config(const AggregatorConfig& config) {
  return {config.experts, config.rule, config.eta(), config.alpha};
}

void write_columns(std::ostream& out, const std::string& prefix, std::size_t n) {
  for (std::size_t i = 1; i <= n; ++i) out << ',' << prefix << i;
}

void write_values(std::ostream& out, std::span<const double> values) {
  for (double v : values) out << ',' << format_real(v);
}

std::vector<double> final_expert_losses(const RegretLedger& ledger) {
  if (ledger.empty()) return std::vector<double>(ledger.config().experts, 0.0);
  const auto rows = cumulative_losses(ledger);
  return {rows.back().begin() + 1, rows.back().end()};
}

double final_learner_loss(const RegretLedger& ledger) {
  return ledger.empty() ? 0.0 : cumulative_losses(ledger).back().front();
}

nlohmann::json bound_json(const RegretLedger& ledger) {
  const BoundReport report = verify_bounds(ledger);
  nlohmann::json j = {
      {"verdict", to_string(report.verdict)},
      {"bound", report.bound},
      {"tolerance", kBoundTolerance},
      {"max_prefix_discounted_regret", report.max_prefix_regret},
      {"worst_learner_minus_mix_loss", report.worst_mix_gap},
  };
  if (report.verdict == BoundVerdict::Advisory)
    j["note"] = "ln(N)/eta is proved without Fixed Share; shown for reference only (alpha > 0)";
  return j;
}

class SnapshotSet {
public:
  explicit SnapshotSet(const std::vector<std::size_t>& rounds)
      : wanted_(rounds.begin(), rounds.end()) {}
  bool contains(std::size_t t) const { return wanted_.count(t) != 0; }

private:
  std::set<std::size_t> wanted_;
};

std::vector<std::size_t> validated_rounds(const std::vector<std::size_t>& rounds,
                                          std::size_t horizon) {
  for (std::size_t t : rounds)
    if (t == 0 || t > horizon)
      throw std::invalid_argument("snapshot round " + std::to_string(t) + " outside 1.." +
                                  std::to_string(horizon));
  return rounds;
}

void write_run_directory(const fs::path& dir, const std::string& command,
                         const RunConfig& config, const RunResult& result) {
  make_directory(dir);
  write_rounds_csv(dir / "rounds.csv", result.ledger);
  write_regret_csv(dir / "regret.csv", result.ledger);
  auto out = open_output(dir / "summary.json");
  out << run_summary(command, config, result).dump(2) << '\n';
}

void write_snapshots(const fs::path& dir, const RunResult& result) {
  auto cdf = open_output(dir / "cdf_snapshots.csv");
  auto density = open_output(dir / "densities.csv");
  cdf << "t,u,cdf\n";
  density << "t,u_lo,u_hi,density\n";
  for (const auto& [t, forecast] : result.snapshots) {
    const GridDomain& domain = forecast.domain();
    double previous = 0.0;
    for (std::size_t s = 1; s <= domain.cells(); ++s) {
      const double f = forecast[s - 1];
      cdf << t << ',' << format_real(domain.point(s)) << ',' << format_real(f) << '\n';
      density << t << ',' << format_real(domain.point(s - 1)) << ','
              << format_real(domain.point(s)) << ','
              << format_real((f - previous) / domain.delta()) << '\n';
      previous = f;
    }
  }
}

nlohmann::json report_run(const fs::path& run_dir, const std::vector<std::size_t>& rounds,
                          const fs::path& out_dir) {
  nlohmann::json summary;
  {
    auto in = open_input(run_dir / "summary.json");
    try {
      in >> summary;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corrupt " + (run_dir / "summary.json").string() + ": " + e.what());
    }
  }
  RunConfig config;
  apply_json(config, summary.at("config"));
  const std::string command = summary.at("command").get<std::string>();
  const std::size_t experts = summary.at("experts").get<std::size_t>();
  const AggregatorConfig agg = config.aggregator(experts, config.rule);
  const RegretLedger ledger = read_rounds_csv(run_dir / "rounds.csv", ledger_config(agg));
  if (ledger.size() != summary.at("rounds").get<std::size_t>())
    throw std::runtime_error(run_dir.string() + ": rounds.csv has " +
                             std::to_string(ledger.size()) + " rounds, summary.json says " +
                             summary.at("rounds").dump());
  make_directory(out_dir);
  const double bound = theoretical_bound(ledger.config());

  {
    auto out = open_output(out_dir / "cumulative_loss.csv");
    out << "t,learner";
    write_columns(out, "expert_", experts);
    out << '\n';
    const auto rows = cumulative_losses(ledger);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out << k + 1;
      write_values(out, rows[k]);
      out << '\n';
    }
  }
  {
    auto out = open_output(out_dir / "weights.csv");
    out << "t";
    write_columns(out, "w_", experts);
    out << '\n';
    for (const auto& r : ledger.rounds()) {
      out << r.t;
      write_values(out, r.weights);
      out << '\n';
    }
  }
  std::vector<double> discounted(experts, 0.0);
  std::vector<double> cumulative(experts, 0.0);
  if (!ledger.empty()) {
    std::vector<std::vector<double>> curves;
    for (std::size_t i = 0; i < experts; ++i) {
      curves.push_back(discounted_regret_curve(ledger, i));
      discounted[i] = curves.back().back();
      cumulative[i] = cumulative_regret(ledger, i);
    }
    auto out = open_output(out_dir / "regret_curves.csv");
    out << "t";
    write_columns(out, "dr_", experts);
    out << ",bound\n";
    for (std::size_t k = 0; k < ledger.size(); ++k) {
      out << k + 1;
      for (std::size_t i = 0; i < experts; ++i) out << ',' << format_real(curves[i][k]);
      out << ',' << format_real(bound) << '\n';
    }
  }

  const auto& recorded = summary.at("discounted_regret");
  bool regret_matches = recorded.size() == experts;
  for (std::size_t i = 0; regret_matches && i < experts; ++i)
    regret_matches = recorded[i].get<double>() == discounted[i];

  nlohmann::json report = {
      {"schema_version", kSchemaVersion},
      {"run", run_dir.string()},
      {"rule", to_string(config.rule)},
      {"rounds", ledger.size()},
      {"final_learner_loss", final_learner_loss(ledger)},
      {"final_expert_losses", final_expert_losses(ledger)},
      {"cumulative_regret", cumulative},
      {"discounted_regret", discounted},
      {"summary_regret_matches", regret_matches},
      {"bound", bound},
      {"bound_check", bound_json(ledger)},
  };

  if (!rounds.empty()) {
    validated_rounds(rounds, ledger.size());
    const RunResult replay = command == "synth" ? run_synthetic(config, config.rule, rounds)
                                                : run_forecast_file(config, rounds);
    bool consistent = replay.ledger.size() == ledger.size();
    for (std::size_t k = 0; consistent && k < ledger.size(); ++k)
      consistent = replay.ledger.rounds()[k].learner_loss == ledger.rounds()[k].learner_loss;
    write_snapshots(out_dir, replay);
    report["snapshot_rounds"] = rounds;
    report["replay_consistent"] = consistent;
  }

  auto out = open_output(out_dir / "report.json");
  out << report.dump(2) << '\n';
  return report;
}

}  // namespace

RunResult run_synthetic(const RunConfig& config, Rule rule,
                        const std::vector<std::size_t>& snapshot_rounds) {
  if (!config.seed) throw std::invalid_argument("synthetic runs require an explicit --seed");
  MixtureScenario scenario = config.scenario;
  scenario.range = {config.a, config.b};
  scenario.seed = *config.seed;
  const GridDomain domain = config.domain();
  const auto schedule = make_schedule(scenario);
  const auto outcomes = sample_sequence(scenario, schedule);
  const auto pool = build_expert_pool(scenario, domain);
  const SnapshotSet snapshots(validated_rounds(snapshot_rounds, scenario.horizon));

  Aggregator aggregator(config.aggregator(pool.size(), rule));
  RunResult result{RegretLedger(ledger_config(aggregator.config())), {}, 0, 0};
  for (std::size_t t = 1; t <= scenario.horizon; ++t) {
    const PendingRound& pending = aggregator.predict(RoundForecasts::fully_confident(pool));
    if (snapshots.contains(t)) result.snapshots.emplace_back(t, pending.learner);
    result.ledger.append(aggregator.observe(outcomes[t - 1]));
  }
  return result;
}

RunResult run_forecast_file(const RunConfig& config,
                            const std::vector<std::size_t>& snapshot_rounds) {
  auto in = open_input(config.input);
  const GridDomain domain = config.domain();
  ForecastReader reader(in, {config.a, config.b}, config.strict);
  const SnapshotSet snapshots(snapshot_rounds);

  Aggregator aggregator(config.aggregator(reader.experts(), config.rule));
  RunResult result{RegretLedger(ledger_config(aggregator.config())), {}, 0, 0};
  while (auto row = reader.next()) {
    RoundForecasts forecasts;
    for (const auto& dist : row->experts) forecasts.cdfs.push_back(discretize(dist, domain));
    forecasts.confidences = row->confidences;
    const PendingRound& pending = aggregator.predict(std::move(forecasts));
    if (snapshots.contains(row->t)) result.snapshots.emplace_back(row->t, pending.learner);
    RoundRecord record = aggregator.observe(row->y);
    if (record.all_asleep) {
      ++result.asleep_rounds;
      std::cerr << "warning: round " << row->t
                << ": every expert is asleep; previous forecast reused, weights unchanged\n";
    }
    if (row->clipped) ++result.clipped_outcomes;
    result.ledger.append(std::move(record));
  }
  return result;
}

void write_rounds_csv(const fs::path& path, const RegretLedger& ledger) {
  const std::size_t n = ledger.config().experts;
  auto out = open_output(path);
  out << "t,y,h";
  write_columns(out, "l_", n);
  write_columns(out, "p_", n);
  write_columns(out, "w_", n);
  out << ",m\n";
  for (const auto& r : ledger.rounds()) {
    out << r.t << ',' << format_real(r.y) << ',' << format_real(r.learner_loss);
    write_values(out, r.expert_losses);
    write_values(out, r.confidences);
    write_values(out, r.weights);
    out << ',' << format_real(r.mix_loss) << '\n';
  }
}

void write_regret_csv(const fs::path& path, const RegretLedger& ledger) {
  const std::size_t n = ledger.config().experts;
  auto out = open_output(path);
  out << "t";
  write_columns(out, "dr_", n);
  out << ",bound\n";
  const std::string bound = format_real(theoretical_bound(ledger.config()));
  std::vector<double> running(n, 0.0);
  for (const auto& r : ledger.rounds()) {
    out << r.t;
    for (std::size_t i = 0; i < n; ++i) {
      running[i] += r.confidences[i] * (r.learner_loss - r.expert_losses[i]);
      out << ',' << format_real(running[i]);
    }
    out << ',' << bound << '\n';
  }
}

RegretLedger read_rounds_csv(const fs::path& path, const LedgerConfig& config) {
  auto in = open_input(path);
  const std::size_t n = config.experts;
  const std::size_t width = 4 + 3 * n;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  RegretLedger ledger(config);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": bad value '" + cell + "'");
      cells.push_back(v);
    }
    if (cells.size() != width)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " columns");
    RoundRecord r;
    r.t = static_cast<std::size_t>(cells[0]);
    r.y = cells[1];
    r.learner_loss = cells[2];
    r.expert_losses.assign(cells.begin() + 3, cells.begin() + 3 + n);
    r.confidences.assign(cells.begin() + 3 + n, cells.begin() + 3 + 2 * n);
    r.weights.assign(cells.begin() + 3 + 2 * n, cells.begin() + 3 + 3 * n);
    r.mix_loss = cells.back();
    ledger.append(std::move(r));
  }
  return ledger;
}

nlohmann::json run_summary(const std::string& command, const RunConfig& config,
                           const RunResult& result) {
  const RegretLedger& ledger = result.ledger;
  const std::size_t n = ledger.config().experts;
  std::vector<double> cumulative(n, 0.0);
  std::vector<double> discounted(n, 0.0);
  if (!ledger.empty())
    for (std::size_t i = 0; i < n; ++i) {
      cumulative[i] = cumulative_regret(ledger, i);
      discounted[i] = discounted_regret(ledger, i);
    }
  nlohmann::json j = {
      {"schema_version", kSchemaVersion},
      {"command", command},
      {"config", to_json(config)},
      {"experts", n},
      {"rounds", ledger.size()},
      {"eta", ledger.config().eta},
      {"final_learner_loss", final_learner_loss(ledger)},
      {"final_expert_losses", final_expert_losses(ledger)},
      {"cumulative_regret", cumulative},
      {"discounted_regret", discounted},
      {"bound_check", bound_json(ledger)},
      {"asleep_rounds", result.asleep_rounds},
      {"clipped_outcomes", result.clipped_outcomes},
  };
  if (command == "synth") j["rng"] = CounterRng::kAlgorithm;
  return j;
}

nlohmann::json cmd_synth(const RunConfig& config) {
  config.validate();
  if (!config.seed) throw std::invalid_argument("synth requires an explicit --seed");
  make_directory(config.out);

  MixtureScenario scenario = config.scenario;
  scenario.range = {config.a, config.b};
  scenario.seed = *config.seed;
  const auto schedule = make_schedule(scenario);
  const auto outcomes = sample_sequence(scenario, schedule);
  {
    auto out = open_output(config.out / "outcomes.csv");
    out << "t,y,mix_1,mix_2,mix_3\n";
    for (std::size_t t = 0; t < outcomes.size(); ++t) {
      out << t + 1 << ',' << format_real(outcomes[t]);
      write_values(out, schedule[t]);
      out << '\n';
    }
  }

  nlohmann::json runs = nlohmann::json::object();
  double learner_aa = 0.0;
  double learner_wa = 0.0;
  std::vector<double> experts;
  for (Rule rule : {Rule::AA, Rule::WA}) {
    RunConfig sub = config;
    sub.rule = rule;
    sub.out = config.out / to_string(rule);
    const RunResult result = run_synthetic(sub, rule);
    write_run_directory(sub.out, "synth", sub, result);
    const double loss = final_learner_loss(result.ledger);
    (rule == Rule::AA ? learner_aa : learner_wa) = loss;
    experts = final_expert_losses(result.ledger);
    runs[to_string(rule)] = {{"dir", to_string(rule)},
                             {"final_learner_loss", loss},
                             {"bound_check", bound_json(result.ledger)}};
  }

  nlohmann::json summary = {
      {"schema_version", kSchemaVersion},
      {"command", "synth"},
      {"config", to_json(config)},
      {"rng", CounterRng::kAlgorithm},
      {"rounds", outcomes.size()},
      {"runs", runs},
      {"final_expert_losses", experts},
      {"aa_loss_not_above_wa", learner_aa <= learner_wa},
  };
  auto out = open_output(config.out / "summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

nlohmann::json cmd_aggregate(const RunConfig& config) {
  config.validate();
  if (config.input.empty()) throw std::invalid_argument("aggregate requires --input");
  RunConfig resolved = config;
  resolved.input = fs::absolute(config.input);
  const RunResult result = run_forecast_file(resolved);
  write_run_directory(resolved.out, "aggregate", resolved, result);
  return run_summary("aggregate", resolved, result);
}

nlohmann::json cmd_report(const fs::path& run_dir, const std::vector<std::size_t>& rounds,
                          const std::optional<fs::path>& out) {
  nlohmann::json summary;
  {
    auto in = open_input(run_dir / "summary.json");
    try {
      in >> summary;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corrupt " + (run_dir / "summary.json").string() + ": " + e.what());
    }
  }
  const fs::path target = out.value_or(run_dir);
  if (!summary.contains("runs")) return report_run(run_dir, rounds, target);

  nlohmann::json combined = {{"schema_version", kSchemaVersion}, {"runs", nlohmann::json::object()}};
  for (const auto& [name, info] : summary.at("runs").items()) {
    const fs::path dir = info.at("dir").get<std::string>();
    combined["runs"][name] = report_run(run_dir / dir, rounds, target / dir);
  }
  auto file = open_output(target / "report.json");
  file << combined.dump(2) << '\n';
  return combined;
}

}  // namespace crpsagg
