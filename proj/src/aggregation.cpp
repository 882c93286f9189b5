#include "crpsagg/aggregation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace crpsagg {

std::string to_string(Rule rule) { return rule == Rule::AA ? "aa" : "wa"; }

Rule parse_rule(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "aa") return Rule::AA;
  if (lower == "wa") return Rule::WA;
  throw std::invalid_argument("unknown aggregation rule '" + std::string(text) + "'");
}

double learning_rate(Rule rule, double width) {
  return rule == Rule::AA ? 2.0 / width : 1.0 / (2.0 * width);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_forecasts(std::span<const GridCdf> forecasts, std::span<const double> q) {
  if (forecasts.empty()) throw std::invalid_argument("no expert forecasts");
  if (forecasts.size() != q.size())
    throw std::invalid_argument("got " + std::to_string(forecasts.size()) + " forecasts and " +
                                std::to_string(q.size()) + " weights");
  for (const auto& f : forecasts)
    if (f.domain() != forecasts.front().domain())
      throw DomainMismatch("expert forecasts are on different grids");
  double total = 0.0;
  for (double w : q) {
    if (!(w >= 0.0)) throw std::invalid_argument("negative or NaN aggregation weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("aggregation weights sum to " + std::to_string(total));
}

void check_confidences(std::span<const double> confidences, std::size_t experts) {
  if (confidences.size() != experts)
    throw std::invalid_argument("expected " + std::to_string(experts) + " confidences, got " +
                                std::to_string(confidences.size()));
  for (double p : confidences)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("confidence " + std::to_string(p) + " outside [0, 1]");
}

// ln sum_i exp(x_i), ignoring -inf terms.
double log_sum_exp(std::span<const double> x) {
  double top = kNegInf;
  for (double v : x) top = std::max(top, v);
  if (top == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - top);
  return top + std::log(sum);
}

AggregatorState shifted(std::vector<double> log_weights, std::size_t round) {
  double top = kNegInf;
  for (double v : log_weights) top = std::max(top, v);
  if (std::isfinite(top))
    for (double& v : log_weights) v -= top;
  return {std::move(log_weights), round};
}

}  // namespace

void AggregatorConfig::validate() const {
  if (experts == 0) throw std::invalid_argument("at least one expert is required");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("fixed share alpha " + std::to_string(alpha) +
                                " outside [0, 1]");
}

AggregatorState AggregatorState::initial(std::size_t experts) {
  if (experts == 0) throw std::invalid_argument("at least one expert is required");
  return {std::vector<double>(experts, -std::log(static_cast<double>(experts))), 1};
}

RoundForecasts RoundForecasts::fully_confident(std::vector<GridCdf> cdfs) {
  std::vector<double> ones(cdfs.size(), 1.0);
  return {std::move(cdfs), std::move(ones)};
}

std::vector<double> normalized_weights(const AggregatorState& state,
                                       std::span<const double> confidences) {
  const std::size_t n = state.log_weights.size();
  check_confidences(confidences, n);
  std::vector<double> logs(n, kNegInf);
  for (std::size_t i = 0; i < n; ++i)
    if (confidences[i] > 0.0) logs[i] = state.log_weights[i] + std::log(confidences[i]);
  double top = kNegInf;
  for (double v : logs) top = std::max(top, v);
  if (!std::isfinite(top))
    throw AllExpertsAsleep("no expert has positive confidence-weighted weight in round " +
                           std::to_string(state.round));
  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = std::exp(logs[i] - top);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  return weights;
}

GridCdf substitute_aa(std::span<const GridCdf> forecasts, std::span<const double> q) {
  check_forecasts(forecasts, q);
  const GridDomain& domain = forecasts.front().domain();
  std::vector<double> values(domain.cells());
  // Exponents lie in [-2, 0], so the plain weighted sums cannot underflow to zero
  // unless every weight does.
  for (std::size_t s = 0; s < values.size(); ++s) {
    double low = 0.0;
    double high = 0.0;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
      if (q[i] == 0.0) continue;
      const double f = forecasts[i][s];
      low += q[i] * std::exp(-2.0 * f * f);
      high += q[i] * std::exp(-2.0 * (1.0 - f) * (1.0 - f));
    }
    values[s] = 0.5 - 0.25 * (std::log(low) - std::log(high));
  }
  return GridCdf::from_values(domain, std::move(values));
}

GridCdf substitute_wa(std::span<const GridCdf> forecasts, std::span<const double> q) {
  check_forecasts(forecasts, q);
  const GridDomain& domain = forecasts.front().domain();
  std::vector<double> values(domain.cells(), 0.0);
  for (std::size_t s = 0; s < values.size(); ++s)
    for (std::size_t i = 0; i < forecasts.size(); ++i) values[s] += q[i] * forecasts[i][s];
  return GridCdf::from_values(domain, std::move(values));
}

RoundLosses score_round(std::span<const GridCdf> forecasts, const GridCdf& learner, double y) {
  RoundLosses losses;
  losses.learner = crps(learner, y);
  losses.experts.reserve(forecasts.size());
  for (const auto& f : forecasts) {
    if (f.domain() != learner.domain())
      throw DomainMismatch("expert forecast grid differs from the learner grid");
    losses.experts.push_back(crps(f, y));
  }
  return losses;
}

AggregatorState update_weights(const AggregatorState& state, const RoundLosses& losses,
                               std::span<const double> confidences,
                               const AggregatorConfig& config) {
  const std::size_t n = state.log_weights.size();
  if (losses.experts.size() != n)
    throw std::invalid_argument("loss vector does not match the number of experts");
  check_confidences(confidences, n);
  const double eta = config.eta();
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = confidences[i];
    next[i] = state.log_weights[i] - eta * (p * losses.experts[i] + (1.0 - p) * losses.learner);
  }
  return shifted(std::move(next), state.round + 1);
}

AggregatorState update_weights(const AggregatorState& state, const RoundForecasts& forecasts,
                               const GridCdf& learner, double y, const AggregatorConfig& config) {
  if (learner.domain() != config.domain)
    throw DomainMismatch("learner forecast grid differs from the configured grid");
  return update_weights(state, score_round(forecasts.cdfs, learner, y), forecasts.confidences,
                        config);
}

AggregatorState fixed_share(const AggregatorState& state, const AggregatorConfig& config) {
  const std::size_t n = state.log_weights.size();
  const std::vector<double> ones(n, 1.0);
  const std::vector<double> mu = normalized_weights(state, ones);
  const double floor = config.alpha / static_cast<double>(n);
  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(floor + (1.0 - config.alpha) * mu[i]);
  return {std::move(logs), state.round};
}

PendingRound step(const AggregatorState& state, const RoundForecasts& forecasts,
                  const AggregatorConfig& config) {
  const std::size_t n = state.log_weights.size();
  if (forecasts.cdfs.size() != n)
    throw std::invalid_argument("expected " + std::to_string(n) + " expert forecasts, got " +
                                std::to_string(forecasts.cdfs.size()));
  for (const auto& f : forecasts.cdfs)
    if (f.domain() != config.domain)
      throw DomainMismatch("expert forecast grid differs from the configured grid");
  std::vector<double> confidences =
      config.confidence_enabled ? forecasts.confidences : std::vector<double>(n, 1.0);
  std::vector<double> weights = normalized_weights(state, confidences);
  GridCdf learner = config.rule == Rule::AA ? substitute_aa(forecasts.cdfs, weights)
                                            : substitute_wa(forecasts.cdfs, weights);
  return {state.round, std::move(confidences), std::move(weights), std::move(learner), false};
}

SuperpredictionResult superprediction_check(const GridCdf& learner,
                                            std::span<const GridCdf> forecasts,
                                            std::span<const double> q, double y, double eta) {
  check_forecasts(forecasts, q);
  std::vector<double> terms(forecasts.size(), kNegInf);
  for (std::size_t i = 0; i < forecasts.size(); ++i)
    if (q[i] > 0.0) terms[i] = std::log(q[i]) - eta * crps(forecasts[i], y);
  const double slack = -eta * crps(learner, y) - log_sum_exp(terms);
  return {slack >= -kSuperpredictionTolerance, slack};
}

SuperpredictionResult superprediction_check_grid(const GridCdf& learner,
                                                 std::span<const GridCdf> forecasts,
                                                 std::span<const double> q, double eta) {
  const GridDomain& domain = learner.domain();
  SuperpredictionResult worst{true, std::numeric_limits<double>::infinity()};
  for (std::size_t s = 1; s <= domain.cells(); ++s) {
    const auto r = superprediction_check(learner, forecasts, q, domain.point(s), eta);
    if (r.slack < worst.slack) worst = r;
  }
  return worst;
}

Aggregator::Aggregator(AggregatorConfig config)
    : config_(std::move(config)), state_(AggregatorState::initial(config_.experts)) {
  config_.validate();
}

const PendingRound& Aggregator::predict(RoundForecasts forecasts) {
  if (pending_) throw std::logic_error("predict called twice without observe");
  if (forecasts.confidences.size() != forecasts.cdfs.size())
    throw std::invalid_argument("one confidence per expert forecast is required");
  try {
    pending_ = step(state_, forecasts, config_);
  } catch (const AllExpertsAsleep&) {
    if (config_.sleep_policy == SleepPolicy::Throw) throw;
    GridCdf fallback = previous_learner_ ? *previous_learner_ : GridCdf::uniform(config_.domain);
    const std::vector<double> ones(config_.experts, 1.0);
    pending_ = PendingRound{state_.round, std::vector<double>(config_.experts, 0.0),
                            normalized_weights(state_, ones), std::move(fallback), true};
  }
  forecasts_ = std::move(forecasts);
  return *pending_;
}

RoundRecord Aggregator::observe(double y) {
  if (!pending_) throw std::logic_error("observe called before predict");
  const PendingRound& round = *pending_;
  const RoundLosses losses = score_round(forecasts_->cdfs, round.learner, y);

  RoundRecord record;
  record.t = round.round;
  record.y = y;
  record.learner_loss = losses.learner;
  record.expert_losses = losses.experts;
  record.confidences = round.confidences;
  record.weights = round.weights;
  record.all_asleep = round.all_asleep;

  if (round.all_asleep) {
    record.mix_loss = losses.learner;
    state_.round += 1;
  } else {
    // m_t telescopes with the unadjusted weights w_i / W_t; the confidence-adjusted
    // w* only enter through the learner forecast.
    const double eta = config_.eta();
    const std::vector<double> ones(config_.experts, 1.0);
    const std::vector<double> plain = normalized_weights(state_, ones);
    std::vector<double> terms(config_.experts, kNegInf);
    for (std::size_t i = 0; i < config_.experts; ++i) {
      if (plain[i] == 0.0) continue;
      const double p = round.confidences[i];
      const double virtual_loss = p * losses.experts[i] + (1.0 - p) * losses.learner;
      terms[i] = std::log(plain[i]) - eta * virtual_loss;
    }
    record.mix_loss = -log_sum_exp(terms) / eta;
    state_ = update_weights(state_, losses, round.confidences, config_);
    if (config_.alpha > 0.0) state_ = fixed_share(state_, config_);
  }

  previous_learner_ = round.learner;
  pending_.reset();
  forecasts_.reset();
  return record;
}

}  // namespace crpsagg
