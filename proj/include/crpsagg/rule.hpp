#pragma once

#include <string>
#include <string_view>

namespace crpsagg {

/// How expert CDFs are merged into the learner forecast.
///   AA - Aggregating Algorithm substitution, learning rate 2 / (b - a)
///   WA - pointwise weighted average, learning rate 1 / (2 (b - a))
enum class Rule { AA, WA };

std::string to_string(Rule rule);

/// Accepts "aa" / "wa" in any case; throws std::invalid_argument otherwise.
Rule parse_rule(std::string_view text);

/// Learning rate for CRPS on an interval of the given width.
double learning_rate(Rule rule, double width);

}  // namespace crpsagg
