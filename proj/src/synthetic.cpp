#include "crpsagg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crpsagg {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix(key_ + (counter + 1) * kGamma);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

CounterRng CounterRng::split(std::uint64_t label) const {
  CounterRng child(0);
  child.key_ = mix(key_ ^ mix(label + kGamma));
  return child;
}

std::string to_string(MixingMethod method) {
  return method == MixingMethod::Method1 ? "method1" : "method2";
}

MixingMethod parse_mixing_method(const std::string& text) {
  if (text == "method1" || text == "1") return MixingMethod::Method1;
  if (text == "method2" || text == "2") return MixingMethod::Method2;
  throw std::invalid_argument("unknown mixing method '" + text + "'");
}

void MixtureScenario::validate() const {
  if (segments == 0 || horizon == 0 || horizon % segments != 0)
    throw std::invalid_argument("horizon " + std::to_string(horizon) +
                                " is not a positive multiple of " + std::to_string(segments) +
                                " segments");
  for (const auto& c : components)
    ParametricDistribution::triangular(range, c.left, c.peak, c.right);
}

std::size_t leader_at(const MixtureScenario& scenario, std::size_t t) {
  return (t / scenario.segment_length()) % 3;
}

WeightSchedule schedule_method1(const MixtureScenario& scenario) {
  scenario.validate();
  WeightSchedule rows(scenario.horizon, {0.0, 0.0, 0.0});
  for (std::size_t t = 0; t < scenario.horizon; ++t) rows[t][leader_at(scenario, t)] = 1.0;
  return rows;
}

WeightSchedule schedule_method2(const MixtureScenario& scenario) {
  scenario.validate();
  const std::size_t length = scenario.segment_length();
  // Segment k is centred at k * length + length / 2; between two centres the
  // weight moves linearly from one leader to the next.
  const std::size_t first_center = length / 2;
  const std::size_t last_center = (scenario.segments - 1) * length + length / 2;
  WeightSchedule rows(scenario.horizon, {0.0, 0.0, 0.0});
  for (std::size_t t = 0; t < scenario.horizon; ++t) {
    if (t <= first_center || t >= last_center) {
      rows[t][leader_at(scenario, t)] = 1.0;
      continue;
    }
    const std::size_t k = (t - first_center) / length;
    const double lambda =
        static_cast<double>(t - (k * length + first_center)) / static_cast<double>(length);
    rows[t][k % 3] += 1.0 - lambda;
    rows[t][(k + 1) % 3] += lambda;
  }
  return rows;
}

WeightSchedule make_schedule(const MixtureScenario& scenario) {
  return scenario.method == MixingMethod::Method1 ? schedule_method1(scenario)
                                                  : schedule_method2(scenario);
}

double triangular_quantile(const Triangular& tri, double u) {
  const double base = tri.right - tri.left;
  const double split = (tri.peak - tri.left) / base;
  if (u < split) return tri.left + std::sqrt(u * base * (tri.peak - tri.left));
  return tri.right - std::sqrt((1.0 - u) * base * (tri.right - tri.peak));
}

std::vector<double> sample_sequence(const MixtureScenario& scenario,
                                    const WeightSchedule& schedule) {
  scenario.validate();
  if (schedule.size() != scenario.horizon)
    throw std::invalid_argument("schedule length differs from the scenario horizon");
  const CounterRng rng(scenario.seed);
  const CounterRng pick = rng.split(1);
  const CounterRng draw = rng.split(2);
  std::vector<double> outcomes(scenario.horizon);
  for (std::size_t t = 0; t < scenario.horizon; ++t) {
    const double u = pick.uniform(t);
    const auto& row = schedule[t];
    std::size_t component = 0;
    double cumulative = row[0];
    while (component < 2 && u >= cumulative) cumulative += row[++component];
    // A row summing to slightly less than 1 can overshoot onto a zero-weight component.
    while (row[component] == 0.0 && component > 0) --component;
    const double y = triangular_quantile(scenario.components[component], draw.uniform(t));
    outcomes[t] = std::clamp(y, scenario.range.lower, scenario.range.upper);
  }
  return outcomes;
}

std::vector<GridCdf> build_expert_pool(const MixtureScenario& scenario, const GridDomain& domain) {
  scenario.validate();
  std::vector<GridCdf> pool;
  for (const auto& c : scenario.components)
    pool.push_back(discretize(
        ParametricDistribution::triangular(scenario.range, c.left, c.peak, c.right), domain));
  return pool;
}

}  // namespace crpsagg
