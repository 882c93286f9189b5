#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <istream>
#include <ostream>
#include <string_view>

#include "crpsagg/cli.hpp"

namespace crpsagg {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::string join_reals(std::span<const double> values, char sep) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += sep;
    out += format_real(values[k]);
  }
  return out;
}

}  // namespace

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

AggregatorConfig RunConfig::aggregator(std::size_t experts, Rule which) const {
  AggregatorConfig c;
  c.rule = which;
  c.domain = domain();
  c.experts = experts;
  c.alpha = alpha;
  c.confidence_enabled = confidence;
  c.sleep_policy = SleepPolicy::HoldPrevious;
  return c;
}

void RunConfig::validate() const {
  const GridDomain checked(a, b, grid);
  (void)checked;
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("--alpha must lie in [0, 1], got " + format_real(alpha));
  if (out.empty()) throw std::invalid_argument("output directory is empty");
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json components = nlohmann::json::array();
  for (const auto& c : config.scenario.components)
    components.push_back({c.left, c.peak, c.right});
  nlohmann::json j = {
      {"a", config.a},
      {"b", config.b},
      {"grid", config.grid},
      {"rule", to_string(config.rule)},
      {"alpha", config.alpha},
      {"confidence", config.confidence},
      {"strict", config.strict},
      {"out", config.out.string()},
      {"scenario",
       {{"horizon", config.scenario.horizon},
        {"segments", config.scenario.segments},
        {"method", to_string(config.scenario.method)},
        {"components", components}}},
  };
  j["seed"] = config.seed ? nlohmann::json(*config.seed) : nlohmann::json(nullptr);
  j["input"] = config.input.empty() ? nlohmann::json(nullptr) : nlohmann::json(config.input.string());
  return j;
}

void apply_json(RunConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  if (j.contains("a")) config.a = j.at("a").get<double>();
  if (j.contains("b")) config.b = j.at("b").get<double>();
  if (j.contains("grid")) config.grid = j.at("grid").get<std::size_t>();
  if (j.contains("rule")) config.rule = parse_rule(j.at("rule").get<std::string>());
  if (j.contains("alpha")) config.alpha = j.at("alpha").get<double>();
  if (j.contains("confidence")) config.confidence = j.at("confidence").get<bool>();
  if (j.contains("strict")) config.strict = j.at("strict").get<bool>();
  if (j.contains("out")) config.out = j.at("out").get<std::string>();
  if (j.contains("seed") && !j.at("seed").is_null())
    config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("input") && !j.at("input").is_null())
    config.input = j.at("input").get<std::string>();
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    auto& scenario = config.scenario;
    if (s.contains("horizon")) scenario.horizon = s.at("horizon").get<std::size_t>();
    if (s.contains("segments")) scenario.segments = s.at("segments").get<std::size_t>();
    if (s.contains("method"))
      scenario.method = parse_mixing_method(s.at("method").get<std::string>());
    if (s.contains("components")) {
      const auto& list = s.at("components");
      if (!list.is_array() || list.size() != 3)
        throw std::invalid_argument("scenario.components must list three triangles");
      for (std::size_t k = 0; k < 3; ++k) {
        const auto v = list[k].get<std::vector<double>>();
        if (v.size() != 3)
          throw std::invalid_argument("each triangle is [left, peak, right]");
        scenario.components[k] = Triangular{v[0], v[1], v[2]};
      }
    }
  }
}

IngestError::IngestError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

ForecastReader::ForecastReader(std::istream& in, Interval range, bool strict)
    : in_(in), range_(range), strict_(strict) {
  std::string header;
  if (!std::getline(in_, header)) throw IngestError(1, "missing header row");
  const auto columns = split(header, ',');
  if (columns.size() < 5 || (columns.size() - 2) % 3 != 0 || columns[0] != "t" ||
      columns[1] != "y")
    throw IngestError(1, "header must be t,y followed by expert<k>_kind,expert<k>_params,"
                         "expert<k>_conf triples");
  experts_ = (columns.size() - 2) / 3;
  for (std::size_t k = 0; k < experts_; ++k) {
    const std::string prefix = "expert" + std::to_string(k + 1) + "_";
    if (columns[2 + 3 * k] != prefix + "kind" || columns[3 + 3 * k] != prefix + "params" ||
        columns[4 + 3 * k] != prefix + "conf")
      throw IngestError(1, "unexpected column names for expert " + std::to_string(k + 1));
  }
}

std::optional<ForecastRow> ForecastReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (trim(text).empty()) continue;
    const auto fields = split(text, ',');
    if (fields.size() != 2 + 3 * experts_)
      throw IngestError(line_, "expected " + std::to_string(2 + 3 * experts_) +
                                   " fields, found " + std::to_string(fields.size()));
    ForecastRow row;
    const auto t = parse_number<std::size_t>(fields[0]);
    if (!t) throw IngestError(line_, "round index '" + std::string(fields[0]) + "' is not an integer");
    if (*t != expected_round_)
      throw IngestError(line_, "round " + std::to_string(*t) + " found where round " +
                                   std::to_string(expected_round_) + " was expected");
    row.t = *t;
    const auto y = parse_number<double>(fields[1]);
    if (!y || !std::isfinite(*y))
      throw IngestError(line_, "outcome '" + std::string(fields[1]) + "' is not a number");
    row.y = *y;
    if (row.y < range_.lower || row.y > range_.upper) {
      if (strict_)
        throw IngestError(line_, "outcome " + format_real(row.y) + " outside [" +
                                     format_real(range_.lower) + ", " +
                                     format_real(range_.upper) + "]");
      const double clipped = std::clamp(row.y, range_.lower, range_.upper);
      std::cerr << "warning: line " << line_ << ": outcome " << format_real(row.y)
                << " clipped to " << format_real(clipped) << '\n';
      row.y = clipped;
      row.clipped = true;
    }
    for (std::size_t k = 0; k < experts_; ++k) {
      const std::string kind(fields[2 + 3 * k]);
      std::vector<double> params;
      for (auto part : split(fields[3 + 3 * k], ';')) {
        const auto v = parse_number<double>(part);
        if (!v)
          throw IngestError(line_, "expert " + std::to_string(k + 1) + " parameter '" +
                                       std::string(part) + "' is not a number");
        params.push_back(*v);
      }
      try {
        row.experts.push_back(ParametricDistribution::from_spec(range_, kind, params));
      } catch (const std::invalid_argument& e) {
        throw IngestError(line_, "expert " + std::to_string(k + 1) + ": " + e.what());
      }
      const auto p = parse_number<double>(fields[4 + 3 * k]);
      if (!p || !(*p >= 0.0 && *p <= 1.0))
        throw IngestError(line_, "expert " + std::to_string(k + 1) + " confidence '" +
                                     std::string(fields[4 + 3 * k]) + "' outside [0, 1]");
      row.confidences.push_back(*p);
    }
    ++expected_round_;
    return row;
  }
  return std::nullopt;
}

void write_forecast_header(std::ostream& out, std::size_t experts) {
  out << "t,y";
  for (std::size_t k = 1; k <= experts; ++k)
    out << ",expert" << k << "_kind,expert" << k << "_params,expert" << k << "_conf";
  out << '\n';
}

void write_forecast_row(std::ostream& out, const ForecastRow& row) {
  out << row.t << ',' << format_real(row.y);
  for (std::size_t k = 0; k < row.experts.size(); ++k)
    out << ',' << row.experts[k].kind() << ',' << join_reals(row.experts[k].params(), ';') << ','
        << format_real(row.confidences[k]);
  out << '\n';
}

double trapezoid_confidence(double x, double core_lo, double core_hi, double ramp,
                            bool periodic) {
  auto gap = [periodic](double u, double v) {
    const double d = std::abs(u - v);
    return periodic ? std::min(d, 1.0 - d) : d;
  };
  if (x >= core_lo && x <= core_hi) return 1.0;
  const double distance = std::min(gap(x, core_lo), gap(x, core_hi));
  if (ramp <= 0.0) return 0.0;
  return std::max(0.0, 1.0 - distance / ramp);
}

void write_sample_forecasts(std::ostream& out, std::uint64_t seed, std::size_t rounds) {
  constexpr std::size_t kCycle = 50;
  constexpr std::array<double, 3> kCenters{0.25, 0.5, 0.75};
  const Interval range{0.0, 1.0};
  const CounterRng rng(seed);
  const CounterRng regime_noise = rng.split(1);
  const CounterRng draw = rng.split(2);

  const auto generalist = ParametricDistribution::truncated_gaussian_mixture(
      range, {{0.4, 0.35, 0.15}, {0.6, 0.6, 0.18}});

  write_forecast_header(out, 4);
  for (std::size_t t = 1; t <= rounds; ++t) {
    const double phase = (static_cast<double>((t - 1) % kCycle) + 0.5) / kCycle;
    const auto regime = static_cast<std::size_t>(phase * 3.0);
    // Occasional excursions keep the generalist competitive.
    const double centre = regime_noise.uniform(t) < 0.1 ? 0.5 : kCenters[regime];
    const Triangular truth{std::max(0.0, centre - 0.2), centre, std::min(1.0, centre + 0.2)};

    ForecastRow row;
    row.t = t;
    row.y = triangular_quantile(truth, draw.uniform(t));
    row.experts.push_back(generalist);
    row.confidences.push_back(1.0);
    for (std::size_t k = 0; k < 3; ++k) {
      const double c = kCenters[k];
      row.experts.push_back(ParametricDistribution::truncated_gaussian_mixture(
          range, {{0.7, c, 0.07}, {0.3, c + 0.04, 0.12}}));
      const double lo = static_cast<double>(k) / 3.0;
      const double hi = static_cast<double>(k + 1) / 3.0;
      row.confidences.push_back(trapezoid_confidence(phase, lo, hi, 0.1, true));
    }
    write_forecast_row(out, row);
  }
}

}  // namespace crpsagg
