// Online aggregation of CDF forecasts with expert weights kept in log space.
//
// One round:
//   1. normalized_weights: w*_i = p_i w_i / sum_j p_j w_j
//   2. substitute_aa / substitute_wa: learner CDF from the expert CDFs and w*
//   3. update_weights: log w_i -= eta * (p_i l_i + (1 - p_i) h)
//   4. fixed_share (alpha > 0): w_i <- alpha / N + (1 - alpha) * normalized(w)_i

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "crpsagg/distributions.hpp"
#include "crpsagg/regret.hpp"
#include "crpsagg/rule.hpp"

namespace crpsagg {

/// Every expert has p_i w_i = 0, so there is nothing to aggregate.
class AllExpertsAsleep : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Fixed Share parameter used in the experiments.
inline constexpr double kDefaultAlpha = 0.001;

enum class SleepPolicy {
  /// Reuse the previous learner CDF (uniform on the first round) and skip the update.
  HoldPrevious,
  /// Let AllExpertsAsleep propagate to the caller.
  Throw,
};

struct AggregatorConfig {
  Rule rule = Rule::AA;
  GridDomain domain{0.0, 1.0};
  std::size_t experts = 1;
  double alpha = 0.0;
  bool confidence_enabled = false;
  SleepPolicy sleep_policy = SleepPolicy::HoldPrevious;

  double eta() const { return learning_rate(rule, domain.width()); }

  /// Throws std::invalid_argument on N = 0 or alpha outside [0, 1].
  void validate() const;
};

/// Unnormalized log weights and the index of the next round (starting at 1).
struct AggregatorState {
  std::vector<double> log_weights;
  std::size_t round = 1;

  static AggregatorState initial(std::size_t experts);
};

/// Expert CDFs and confidence levels for one round, indexed by expert.
struct RoundForecasts {
  std::vector<GridCdf> cdfs;
  std::vector<double> confidences;

  /// All confidences set to 1.
  static RoundForecasts fully_confident(std::vector<GridCdf> cdfs);
};

/// w*_i = p_i w_i / sum_j p_j w_j, computed with a max shift in log space.
std::vector<double> normalized_weights(const AggregatorState& state,
                                       std::span<const double> confidences);

/// f_s = 1/2 - 1/4 ln( sum_i q_i exp(-2 f_is^2) / sum_i q_i exp(-2 (1 - f_is)^2) ).
GridCdf substitute_aa(std::span<const GridCdf> forecasts, std::span<const double> q);

/// f_s = sum_i q_i f_is.
GridCdf substitute_wa(std::span<const GridCdf> forecasts, std::span<const double> q);

struct RoundLosses {
  double learner = 0.0;
  std::vector<double> experts;
};

RoundLosses score_round(std::span<const GridCdf> forecasts, const GridCdf& learner, double y);

/// Loss update of the (virtual) expert weights; advances the round counter.
/// With every p_i = 1 this is the plain exponential-weights update.
AggregatorState update_weights(const AggregatorState& state, const RoundLosses& losses,
                               std::span<const double> confidences,
                               const AggregatorConfig& config);

AggregatorState update_weights(const AggregatorState& state, const RoundForecasts& forecasts,
                               const GridCdf& learner, double y, const AggregatorConfig& config);

/// Mixes the normalized weights with the uniform vector. The result is stored
/// as logs of a probability vector.
AggregatorState fixed_share(const AggregatorState& state, const AggregatorConfig& config);

/// The learner forecast for a round together with the context observe() needs.
struct PendingRound {
  std::size_t round = 0;
  std::vector<double> confidences;
  std::vector<double> weights;
  GridCdf learner;
  bool all_asleep = false;
};

/// Confidence-normalizes, then dispatches to the configured substitution rule.
/// Throws AllExpertsAsleep when no expert carries weight.
PendingRound step(const AggregatorState& state, const RoundForecasts& forecasts,
                  const AggregatorConfig& config);

struct SuperpredictionResult {
  bool pass = false;
  /// ln(exp(-eta h)) - ln(sum_i q_i exp(-eta l_i)); non-negative when the learner
  /// forecast is dominated by the superprediction.
  double slack = 0.0;
};

inline constexpr double kSuperpredictionTolerance = 1e-9;

SuperpredictionResult superprediction_check(const GridCdf& learner,
                                            std::span<const GridCdf> forecasts,
                                            std::span<const double> q, double y, double eta);

/// Worst case of superprediction_check over the outcomes z_1..z_d, which
/// realize every distinct step vector on the grid.
SuperpredictionResult superprediction_check_grid(const GridCdf& learner,
                                                 std::span<const GridCdf> forecasts,
                                                 std::span<const double> q, double eta);

/// Sequential driver owning one state. predict() and observe() alternate.
class Aggregator {
public:
  explicit Aggregator(AggregatorConfig config);

  const PendingRound& predict(RoundForecasts forecasts);
  RoundRecord observe(double y);

  const AggregatorConfig& config() const { return config_; }
  const AggregatorState& state() const { return state_; }

private:
  AggregatorConfig config_;
  AggregatorState state_;
  std::optional<RoundForecasts> forecasts_;
  std::optional<PendingRound> pending_;
  std::optional<GridCdf> previous_learner_;
};

}  // namespace crpsagg
