#include "crpsagg/regret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace crpsagg {

namespace {

void check_expert(const RegretLedger& ledger, std::size_t expert) {
  if (expert >= ledger.config().experts)
    throw std::out_of_range("unknown expert " + std::to_string(expert + 1) + " (ledger has " +
                            std::to_string(ledger.config().experts) + ")");
  if (ledger.empty()) throw std::invalid_argument("regret of an empty ledger");
}

}  // namespace

RegretLedger::RegretLedger(LedgerConfig config) : config_(config) {
  if (config_.experts == 0) throw std::invalid_argument("ledger needs at least one expert");
}

void RegretLedger::append(RoundRecord record) {
  if (record.t != rounds_.size() + 1)
    throw std::invalid_argument("round " + std::to_string(record.t) + " appended after round " +
                                std::to_string(rounds_.size()));
  const std::size_t n = config_.experts;
  if (record.expert_losses.size() != n || record.confidences.size() != n ||
      record.weights.size() != n)
    throw std::invalid_argument("round " + std::to_string(record.t) + " does not have " +
                                std::to_string(n) + " experts");
  rounds_.push_back(std::move(record));
}

double cumulative_regret(const RegretLedger& ledger, std::size_t expert) {
  check_expert(ledger, expert);
  // Summed per round so that it matches discounted_regret exactly when p = 1.
  double total = 0.0;
  for (const auto& r : ledger.rounds()) total += r.learner_loss - r.expert_losses[expert];
  return total;
}

double discounted_regret(const RegretLedger& ledger, std::size_t expert) {
  check_expert(ledger, expert);
  double total = 0.0;
  for (const auto& r : ledger.rounds())
    total += r.confidences[expert] * (r.learner_loss - r.expert_losses[expert]);
  return total;
}

std::vector<double> discounted_regret_curve(const RegretLedger& ledger, std::size_t expert) {
  check_expert(ledger, expert);
  std::vector<double> curve;
  curve.reserve(ledger.size());
  double total = 0.0;
  for (const auto& r : ledger.rounds()) {
    total += r.confidences[expert] * (r.learner_loss - r.expert_losses[expert]);
    curve.push_back(total);
  }
  return curve;
}

std::vector<std::vector<double>> cumulative_losses(const RegretLedger& ledger) {
  const std::size_t n = ledger.config().experts;
  std::vector<std::vector<double>> rows;
  rows.reserve(ledger.size());
  std::vector<double> running(n + 1, 0.0);
  for (const auto& r : ledger.rounds()) {
    running[0] += r.learner_loss;
    for (std::size_t i = 0; i < n; ++i) running[i + 1] += r.expert_losses[i];
    rows.push_back(running);
  }
  return rows;
}

double theoretical_bound(std::size_t experts, double eta) {
  if (experts == 0) throw std::invalid_argument("bound needs at least one expert");
  if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be positive");
  return std::log(static_cast<double>(experts)) / eta;
}

double theoretical_bound(const LedgerConfig& config) {
  return theoretical_bound(config.experts, config.eta);
}

const char* to_string(BoundVerdict verdict) {
  switch (verdict) {
    case BoundVerdict::Pass: return "pass";
    case BoundVerdict::Fail: return "fail";
    case BoundVerdict::Advisory: return "advisory";
  }
  return "unknown";
}

BoundReport verify_bounds(const RegretLedger& ledger) {
  const std::size_t n = ledger.config().experts;
  BoundReport report;
  report.bound = theoretical_bound(ledger.config());
  report.max_prefix_regret.assign(n, -std::numeric_limits<double>::infinity());
  report.worst_mix_gap = -std::numeric_limits<double>::infinity();

  std::vector<double> running(n, 0.0);
  for (const auto& r : ledger.rounds()) {
    for (std::size_t i = 0; i < n; ++i) {
      running[i] += r.confidences[i] * (r.learner_loss - r.expert_losses[i]);
      report.max_prefix_regret[i] = std::max(report.max_prefix_regret[i], running[i]);
    }
    report.worst_mix_gap = std::max(report.worst_mix_gap, r.learner_loss - r.mix_loss);
  }

  if (ledger.empty()) {
    std::fill(report.max_prefix_regret.begin(), report.max_prefix_regret.end(), 0.0);
    report.worst_mix_gap = 0.0;
  }

  if (ledger.config().alpha > 0.0) {
    report.verdict = BoundVerdict::Advisory;
    return report;
  }
  bool ok = report.worst_mix_gap <= kMixLossTolerance;
  for (double m : report.max_prefix_regret) ok = ok && m <= report.bound + kBoundTolerance;
  report.verdict = ok ? BoundVerdict::Pass : BoundVerdict::Fail;
  return report;
}

}  // namespace crpsagg
