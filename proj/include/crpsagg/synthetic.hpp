// Synthetic outcome streams drawn from a time-varying mixture of three
// triangular distributions, and the matching pool of fixed-distribution experts.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "crpsagg/distributions.hpp"

namespace crpsagg {

/// Counter-based generator: the n-th draw of stream `key` is splitmix64(key + n * gamma).
/// Any draw can be computed independently of the others, and split() derives
/// a child stream from a label.
class CounterRng {
public:
  static constexpr const char* kAlgorithm = "splitmix64-counter";

  explicit CounterRng(std::uint64_t seed) : key_(mix(seed)) {}

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const;
  CounterRng split(std::uint64_t label) const;

private:
  static std::uint64_t mix(std::uint64_t z);
  std::uint64_t key_;
};

enum class MixingMethod {
  /// One leader per segment with weight 1.
  Method1,
  /// Linear cross-fade between the leaders of consecutive segments.
  Method2,
};

std::string to_string(MixingMethod method);
MixingMethod parse_mixing_method(const std::string& text);

struct MixtureScenario {
  std::array<Triangular, 3> components{
      Triangular{0.0, 0.25, 0.5}, Triangular{0.25, 0.5, 0.75}, Triangular{0.5, 0.75, 1.0}};
  Interval range{0.0, 1.0};
  std::size_t horizon = 3000;
  std::size_t segments = 6;
  MixingMethod method = MixingMethod::Method1;
  std::uint64_t seed = 0;

  std::size_t segment_length() const { return horizon / segments; }

  /// Throws std::invalid_argument when T is not a positive multiple of the
  /// segment count or a component is invalid on the range.
  void validate() const;
};

/// One probability vector over the three components per round.
using WeightSchedule = std::vector<std::array<double, 3>>;

WeightSchedule schedule_method1(const MixtureScenario& scenario);
WeightSchedule schedule_method2(const MixtureScenario& scenario);
WeightSchedule make_schedule(const MixtureScenario& scenario);

/// Index of the component leading round t (zero-based) under Method 1.
std::size_t leader_at(const MixtureScenario& scenario, std::size_t t);

/// Inverse CDF of a triangular distribution at probability u in [0, 1].
double triangular_quantile(const Triangular& tri, double u);

std::vector<double> sample_sequence(const MixtureScenario& scenario,
                                    const WeightSchedule& schedule);

/// Expert i forecasts the discretized i-th component every round.
std::vector<GridCdf> build_expert_pool(const MixtureScenario& scenario, const GridDomain& domain);

}  // namespace crpsagg
