#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "crpsagg/cli.hpp"

using namespace crpsagg;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    std::random_device device;
    path_ = fs::temp_directory_path() / ("crpsagg-test-" + std::to_string(device()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ignored;
    fs::remove_all(path_, ignored);
  }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::vector<double>> read_table(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) row.push_back(std::stod(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Rewrites the bundled sample with confidences chosen by `conf(t, i)`.
fs::path rewrite_sample(const fs::path& dir, const std::string& name,
                        double (*conf)(std::size_t, std::size_t)) {
  std::ifstream in(CRPSAGG_SAMPLE_CSV);
  ForecastReader reader(in, {0.0, 1.0}, true);
  const fs::path path = dir / name;
  std::ofstream out(path);
  write_forecast_header(out, reader.experts());
  while (auto row = reader.next()) {
    for (std::size_t i = 0; i < row->confidences.size(); ++i) row->confidences[i] = conf(row->t, i);
    write_forecast_row(out, *row);
  }
  return path;
}

std::optional<ForecastRow> first_row(const std::string& text, bool strict = true) {
  std::istringstream in(text);
  ForecastReader reader(in, {0.0, 1.0}, strict);
  return reader.next();
}

std::size_t ingest_error_line(const std::string& text) {
  try {
    std::istringstream in(text);
    ForecastReader reader(in, {0.0, 1.0}, true);
    while (reader.next()) {
    }
  } catch (const IngestError& e) {
    return e.line();
  }
  return 0;
}

const std::string kHeader =
    "t,y,expert1_kind,expert1_params,expert1_conf,expert2_kind,expert2_params,expert2_conf\n";

RunConfig aggregate_config(const fs::path& input, const fs::path& out) {
  RunConfig config;
  config.input = input;
  config.out = out;
  config.alpha = 0.0;
  config.confidence = true;
  config.grid = 256;
  return config;
}

}  // namespace

TEST_CASE("format_real round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-300, -7.0})
    CHECK(std::stod(format_real(v)) == v);
}

TEST_CASE("run config json") {
  RunConfig config;
  config.rule = Rule::WA;
  config.seed = 17;
  config.scenario.method = MixingMethod::Method2;
  config.scenario.horizon = 600;
  RunConfig copy;
  apply_json(copy, to_json(config));
  CHECK(to_json(copy) == to_json(config));
  CHECK(copy.rule == Rule::WA);
  CHECK(copy.seed == std::optional<std::uint64_t>(17));

  RunConfig partial;
  apply_json(partial, nlohmann::json{{"grid", 64}, {"confidence", true}});
  CHECK(partial.grid == 64);
  CHECK(partial.confidence);
  CHECK(partial.alpha == kDefaultAlpha);
  CHECK_THROWS(apply_json(partial, nlohmann::json::array()));
  CHECK_THROWS(apply_json(partial, nlohmann::json{{"rule", "median"}}));

  RunConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = RunConfig{};
  bad.b = bad.a;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("forecast csv parsing") {
  const auto row = first_row(kHeader + "1,0.4,uniform,0;1,1,tgm,0.5;0.3;0.1;0.5;0.7;0.1,0.25\n");
  REQUIRE(row);
  CHECK(row->t == 1);
  CHECK(row->y == 0.4);
  CHECK(row->experts.size() == 2);
  CHECK(row->confidences == std::vector<double>{1.0, 0.25});
  CHECK(eval_cdf(row->experts[0], 0.25) == 0.25);

  CHECK(ingest_error_line("t,y,kind\n") == 1);
  CHECK(ingest_error_line(kHeader + "1,0.4,uniform,0;1,1,point,0.5\n") == 2);
  CHECK(ingest_error_line(kHeader + "1,0.4,uniform,0;1,1,point,0.5,1\n3,0.4,uniform,0;1,1,point,0.5,1\n") == 3);
  CHECK(ingest_error_line(kHeader + "1,0.4,uniform,0;1,1,point,0.5,1\n2,x,uniform,0;1,1,point,0.5,1\n") == 3);
  CHECK(ingest_error_line(kHeader + "1,0.4,beta,1;1,1,point,0.5,1\n") == 2);
  CHECK(ingest_error_line(kHeader + "1,0.4,uniform,0;1,1.5,point,0.5,1\n") == 2);
  CHECK(ingest_error_line(kHeader + "1,0.4,triangular,0;0.9;0.5,1,point,0.5,1\n") == 2);
  CHECK(ingest_error_line(kHeader + "1,1.4,uniform,0;1,1,point,0.5,1\n") == 2);

  const auto clipped = first_row(kHeader + "1,1.4,uniform,0;1,1,point,0.5,1\n", false);
  REQUIRE(clipped);
  CHECK(clipped->clipped);
  CHECK(clipped->y == 1.0);
}

TEST_CASE("forecast rows round-trip") {
  std::ostringstream out;
  write_sample_forecasts(out, 3, 40);
  std::istringstream in(out.str());
  ForecastReader reader(in, {0.0, 1.0}, true);
  std::ostringstream again;
  write_forecast_header(again, reader.experts());
  std::size_t rows = 0;
  while (auto row = reader.next()) {
    write_forecast_row(again, *row);
    ++rows;
  }
  CHECK(rows == 40);
  CHECK(again.str() == out.str());
}

TEST_CASE("trapezoid confidence") {
  CHECK(trapezoid_confidence(0.5, 0.4, 0.6, 0.1, false) == 1.0);
  CHECK(trapezoid_confidence(0.35, 0.4, 0.6, 0.1, false) == doctest::Approx(0.5));
  CHECK(trapezoid_confidence(0.2, 0.4, 0.6, 0.1, false) == 0.0);
  CHECK(trapezoid_confidence(0.95, 0.0, 0.2, 0.1, true) == doctest::Approx(0.5));
  CHECK(trapezoid_confidence(0.95, 0.0, 0.2, 0.1, false) == 0.0);
}

TEST_CASE("aggregate over the bundled sample") {
  TempDir tmp;
  const auto summary = cmd_aggregate(aggregate_config(CRPSAGG_SAMPLE_CSV, tmp.path() / "run"));
  CHECK(summary.at("rounds") == 500);
  CHECK(summary.at("experts") == 4);
  CHECK(summary.at("bound_check").at("verdict") == "pass");
  CHECK(fs::exists(tmp.path() / "run" / "rounds.csv"));
  CHECK(fs::exists(tmp.path() / "run" / "regret.csv"));
  CHECK(fs::exists(tmp.path() / "run" / "summary.json"));

  const auto rerun = cmd_aggregate(aggregate_config(CRPSAGG_SAMPLE_CSV, tmp.path() / "again"));
  CHECK(slurp(tmp.path() / "run" / "rounds.csv") == slurp(tmp.path() / "again" / "rounds.csv"));
  CHECK(slurp(tmp.path() / "run" / "regret.csv") == slurp(tmp.path() / "again" / "regret.csv"));

  auto advisory = aggregate_config(CRPSAGG_SAMPLE_CSV, tmp.path() / "fs");
  advisory.alpha = 0.01;
  CHECK(cmd_aggregate(advisory).at("bound_check").at("verdict") == "advisory");

  CHECK_THROWS(cmd_aggregate(aggregate_config(tmp.path() / "missing.csv", tmp.path() / "x")));
}

TEST_CASE("full confidence matches the confidence-free run") {
  TempDir tmp;
  const auto ones = rewrite_sample(tmp.path(), "ones.csv", [](std::size_t, std::size_t) { return 1.0; });
  for (Rule rule : {Rule::AA, Rule::WA}) {
    auto with = aggregate_config(ones, tmp.path() / "with");
    with.rule = rule;
    auto without = aggregate_config(CRPSAGG_SAMPLE_CSV, tmp.path() / "without");
    without.rule = rule;
    without.confidence = false;
    cmd_aggregate(with);
    cmd_aggregate(without);
    CHECK(slurp(tmp.path() / "with" / "rounds.csv") == slurp(tmp.path() / "without" / "rounds.csv"));
    CHECK(slurp(tmp.path() / "with" / "regret.csv") == slurp(tmp.path() / "without" / "regret.csv"));
  }
}

TEST_CASE("a permanently asleep expert has zero discounted regret") {
  TempDir tmp;
  const auto path = rewrite_sample(tmp.path(), "sleeper.csv",
                                   [](std::size_t, std::size_t i) { return i == 3 ? 0.0 : 1.0; });
  const auto summary = cmd_aggregate(aggregate_config(path, tmp.path() / "run"));
  CHECK(summary.at("discounted_regret")[3].get<double>() == 0.0);
  CHECK(summary.at("bound_check").at("verdict") == "pass");
  for (const auto& row : read_table(tmp.path() / "run" / "regret.csv")) CHECK(row[4] == 0.0);
}

TEST_CASE("all experts asleep falls back without updating") {
  TempDir tmp;
  const auto path = rewrite_sample(tmp.path(), "nap.csv",
                                   [](std::size_t t, std::size_t) { return t == 3 ? 0.0 : 1.0; });
  const auto summary = cmd_aggregate(aggregate_config(path, tmp.path() / "run"));
  CHECK(summary.at("asleep_rounds") == 1);
  CHECK(summary.at("bound_check").at("verdict") == "pass");
  const auto rows = read_table(tmp.path() / "run" / "rounds.csv");
  // Columns: t, y, h, l_1..l_4, p_1..p_4, w_1..w_4, m. Weights unchanged across round 3.
  for (std::size_t c = 11; c < 15; ++c) CHECK(rows[3][c] == rows[2][c]);
}

TEST_CASE("single expert file") {
  TempDir tmp;
  const fs::path path = tmp.path() / "one.csv";
  {
    std::ofstream out(path);
    out << "t,y,expert1_kind,expert1_params,expert1_conf\n";
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 1; t <= 100; ++t)
      out << t << ',' << format_real(unit(rng)) << ",triangular,0;" << format_real(unit(rng))
          << ";1,1\n";
  }
  for (Rule rule : {Rule::AA, Rule::WA}) {
    auto config = aggregate_config(path, tmp.path() / "run");
    config.rule = rule;
    const auto summary = cmd_aggregate(config);
    CHECK(std::abs(summary.at("cumulative_regret")[0].get<double>()) <= 1e-12);
    CHECK(summary.at("bound_check").at("bound") == 0.0);
    for (const auto& row : read_table(tmp.path() / "run" / "rounds.csv"))
      CHECK(std::abs(row[2] - row[3]) <= 1e-12);
  }
}

TEST_CASE("synth is deterministic") {
  TempDir tmp;
  RunConfig config;
  config.seed = 11;
  config.grid = 128;
  config.scenario.horizon = 600;
  config.out = tmp.path() / "one";
  const auto first = cmd_synth(config);
  config.out = tmp.path() / "two";
  const auto second = cmd_synth(config);
  CHECK(first.at("runs") == second.at("runs"));
  CHECK(first.at("rng") == "splitmix64-counter");
  for (const char* file : {"outcomes.csv", "aa/rounds.csv", "aa/regret.csv", "wa/rounds.csv"})
    CHECK(slurp(tmp.path() / "one" / file) == slurp(tmp.path() / "two" / file));

  config.seed = 12;
  config.out = tmp.path() / "three";
  cmd_synth(config);
  CHECK(slurp(tmp.path() / "one" / "outcomes.csv") != slurp(tmp.path() / "three" / "outcomes.csv"));

  RunConfig unseeded;
  unseeded.out = tmp.path() / "none";
  CHECK_THROWS_AS(cmd_synth(unseeded), std::invalid_argument);
}

TEST_CASE("synth with identical components") {
  TempDir tmp;
  RunConfig config;
  config.seed = 3;
  config.grid = 128;
  config.scenario.horizon = 300;
  config.scenario.components.fill(Triangular{0.1, 0.4, 0.9});
  config.out = tmp.path();
  const auto summary = cmd_synth(config);
  const auto experts = summary.at("final_expert_losses").get<std::vector<double>>();
  for (const char* rule : {"aa", "wa"})
    CHECK(summary.at("runs").at(rule).at("final_learner_loss").get<double>() ==
          doctest::Approx(experts[0]).epsilon(1e-12));
}

TEST_CASE("report") {
  TempDir tmp;
  RunConfig config;
  config.seed = 5;
  config.grid = 128;
  config.scenario.horizon = 600;
  config.alpha = 0.0;
  config.out = tmp.path() / "synth";
  cmd_synth(config);
  const auto report = cmd_report(config.out, {1, 300, 600});
  for (const char* rule : {"aa", "wa"}) {
    const auto& run = report.at("runs").at(rule);
    CHECK(run.at("summary_regret_matches") == true);
    CHECK(run.at("replay_consistent") == true);
    CHECK(run.at("bound_check").at("verdict") == "pass");
  }

  const fs::path aa = config.out / "aa";
  for (const char* file : {"cumulative_loss.csv", "weights.csv", "regret_curves.csv",
                           "cdf_snapshots.csv", "densities.csv", "report.json"})
    CHECK(fs::exists(aa / file));

  const double bound = theoretical_bound(3, learning_rate(Rule::AA, 1.0));
  for (const auto& row : read_table(aa / "regret_curves.csv")) CHECK(row.back() == bound);

  std::map<double, double> mass;
  for (const auto& row : read_table(aa / "densities.csv")) {
    CHECK(row[3] >= 0.0);
    mass[row[0]] += row[3] * (row[2] - row[1]);
  }
  CHECK(mass.size() == 3);
  for (const auto& [t, total] : mass) CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

  const auto cdf = read_table(aa / "cdf_snapshots.csv");
  CHECK(cdf.size() == 3 * 128);
  CHECK(cdf.back()[2] == 1.0);

  CHECK_THROWS(cmd_report(config.out, {601}));
  CHECK_THROWS(cmd_report(tmp.path() / "nowhere", {}));

  TempDir elsewhere;
  cmd_report(config.out / "wa", {}, elsewhere.path());
  CHECK(fs::exists(elsewhere.path() / "report.json"));
  CHECK_FALSE(fs::exists(elsewhere.path() / "densities.csv"));
}

TEST_CASE("report on an aggregate run") {
  TempDir tmp;
  cmd_aggregate(aggregate_config(CRPSAGG_SAMPLE_CSV, tmp.path() / "run"));
  const auto report = cmd_report(tmp.path() / "run", {50});
  CHECK(report.at("summary_regret_matches") == true);
  CHECK(report.at("replay_consistent") == true);
  const auto weights = read_table(tmp.path() / "run" / "weights.csv");
  CHECK(weights.size() == 500);
  for (const auto& row : weights) {
    double sum = 0.0;
    for (std::size_t c = 1; c < row.size(); ++c) sum += row[c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}
