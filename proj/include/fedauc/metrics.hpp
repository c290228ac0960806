#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "fedauc/core.hpp"
#include "fedauc/error.hpp"
#include "fedauc/losses.hpp"
#include "fedauc/model.hpp"

namespace fedauc {

// Mann-Whitney estimate of Pr(h(x+) > h(x-)), ties counted as one half.
// Win and tie counts are exact integers, so the only rounding is the final
// division.
inline double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  detail::require_data(!pos_scores.empty() && !neg_scores.empty(), "auc: both classes must be non-empty");
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(neg.begin(), neg.end());
  std::uint64_t wins = 0, ties = 0;
  for (double s : pos_scores) {
    auto [lo, hi] = std::equal_range(neg.begin(), neg.end(), s);
    wins += static_cast<std::uint64_t>(lo - neg.begin());
    ties += static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(pos_scores.size()) * static_cast<double>(neg.size());
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / pairs;
}

inline double evaluate(const ScoringModel& model, std::span<const Example> eval_pos,
                       std::span<const Example> eval_neg) {
  detail::require_data(!eval_pos.empty() && !eval_neg.empty(), "evaluate: both classes must be non-empty");
  return auc(scores(model, eval_pos), scores(model, eval_neg));
}

// One line of the round log.
struct RoundRecord {
  int stage = 1;
  int epoch = 1;
  int group = 0;
  long round = 0;
  std::optional<double> wall_ms;
  double objective = 0.0;
  double auc = 0.0;
  double eta = 0.0;
  int local_steps = 0;
};

}  // namespace fedauc
