// Per-round loss records, cumulative and discounted regrets, and checks of
// the regret bounds ln(N) / eta that hold without Fixed Share.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "crpsagg/rule.hpp"

namespace crpsagg {

/// Absolute slack allowed above ln(N) / eta.
inline constexpr double kBoundTolerance = 1e-6;
/// Slack allowed for the per-round check h_t <= m_t.
inline constexpr double kMixLossTolerance = 1e-9;

struct RoundRecord {
  std::size_t t = 0;
  double y = 0.0;
  double learner_loss = 0.0;
  std::vector<double> expert_losses;
  std::vector<double> confidences;
  /// Normalized weights w*_{i,t} used to build the learner forecast.
  std::vector<double> weights;
  /// m_t = -(1/eta) ln sum_i (w_i / W) exp(-eta (p_i l_i + (1 - p_i) h_t)), with the
  /// weights before confidence adjustment.
  double mix_loss = 0.0;
  /// No expert carried weight; the learner forecast was a fallback.
  bool all_asleep = false;
};

struct LedgerConfig {
  std::size_t experts = 1;
  Rule rule = Rule::AA;
  double eta = 2.0;
  double alpha = 0.0;
};

/// Append-only sequence of rounds numbered 1, 2, ...
class RegretLedger {
public:
  explicit RegretLedger(LedgerConfig config);

  /// Throws std::invalid_argument if the round index is not the next one or
  /// the record has the wrong number of experts.
  void append(RoundRecord record);

  const LedgerConfig& config() const { return config_; }
  const std::vector<RoundRecord>& rounds() const { return rounds_; }
  std::size_t size() const { return rounds_.size(); }
  bool empty() const { return rounds_.empty(); }

private:
  LedgerConfig config_;
  std::vector<RoundRecord> rounds_;
};

/// H_T - L^i_T over the whole ledger. Expert index is zero-based.
double cumulative_regret(const RegretLedger& ledger, std::size_t expert);

/// sum_t p_{i,t} (h_t - l_{i,t}).
double discounted_regret(const RegretLedger& ledger, std::size_t expert);

/// Running value of discounted_regret after each round.
std::vector<double> discounted_regret_curve(const RegretLedger& ledger, std::size_t expert);

/// Running sums (H_t, L^1_t, ..., L^N_t) after each round.
std::vector<std::vector<double>> cumulative_losses(const RegretLedger& ledger);

/// ln(N) / eta: (b - a)/2 ln N for AA, 2 (b - a) ln N for WA.
double theoretical_bound(std::size_t experts, double eta);
double theoretical_bound(const LedgerConfig& config);

enum class BoundVerdict { Pass, Fail, Advisory };

const char* to_string(BoundVerdict verdict);

struct BoundReport {
  std::vector<double> max_prefix_regret;
  double bound = 0.0;
  /// Largest h_t - m_t over all rounds.
  double worst_mix_gap = 0.0;
  BoundVerdict verdict = BoundVerdict::Advisory;
};

/// Pass iff every prefix discounted regret stays within bound + kBoundTolerance
/// and h_t <= m_t + kMixLossTolerance on every round. Ledgers with alpha > 0
/// get an Advisory verdict: the bound does not cover Fixed Share.
BoundReport verify_bounds(const RegretLedger& ledger);

}  // namespace crpsagg
