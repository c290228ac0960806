#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedauc/core.hpp"
#include "fedauc/error.hpp"
#include "fedauc/model.hpp"
#include "fedauc/parallel.hpp"

namespace fedauc {

// Seed and execution mode shared by every trainer. All per-client randomness
// is derived from (seed, stage, epoch, group, client, purpose).
struct EngineContext {
  std::uint64_t seed = 0;
  Execution execution = Execution::kSerial;
};

// Which iterate a stage hands to the next one.
enum class Handoff { kAverage, kLast };

struct CycpOptions {
  Handoff handoff = Handoff::kAverage;
  long epoch_budget = 0;  // 0: run every stage in full
};

struct RoundEvent {
  int stage = 1;
  int epoch = 1;
  int group = 0;
  long round = 0;  // 1-based, counted across the whole run
  double eta = 0.0;
  int local_steps = 0;
  std::span<const int> clients;
};

using ModelObserver = std::function<void(const RoundEvent&, const ScoringModel&)>;

// Geometric stage schedule: eta_s = eta0 * decay^(s-1), E_s = ceil(E0 * growth^(s-1)).
struct PracticalSchedule {
  double eta0 = 0.1;
  double decay = 0.5;
  int epochs0 = 10;
  double growth = 1.0;
  int stages = 1;
  int local_steps = 1;

  void validate() const {
    detail::require(eta0 >= 0.0, "schedule: eta0 must be >= 0");
    detail::require(decay > 0.0 && decay <= 1.0, "schedule: decay must lie in (0,1]");
    detail::require(epochs0 >= 1, "schedule: E0 must be >= 1");
    detail::require(growth >= 1.0, "schedule: growth must be >= 1");
    detail::require(stages >= 1, "schedule: S must be >= 1");
    detail::require(local_steps >= 1, "schedule: I must be >= 1");
  }

  double eta(int s) const { return eta0 * std::pow(decay, s - 1); }
  int steps(int) const { return local_steps; }
  int epochs(int s) const {
    // Guard against ceil(10 * 2^k) picking up a ulp above an integer.
    const double raw = static_cast<double>(epochs0) * std::pow(growth, s - 1);
    return static_cast<int>(std::ceil(raw - 1e-9 * raw));
  }
};

// Per-stage step size, epoch count and local steps after any budget cap.
struct StagePlan {
  int stage = 1;
  double eta = 0.0;
  int epochs = 1;
  int local_steps = 1;
};

// Truncates a sequence of stage plans so the total epoch count stays within
// `budget` (0 means unlimited).
inline std::vector<StagePlan> apply_epoch_budget(std::vector<StagePlan> plans, long budget) {
  if (budget <= 0) return plans;
  std::vector<StagePlan> out;
  long used = 0;
  for (auto sp : plans) {
    if (used >= budget) break;
    if (used + sp.epochs > budget) sp.epochs = static_cast<int>(budget - used);
    used += sp.epochs;
    out.push_back(sp);
  }
  return out;
}

// Ticket members sorted ascending, validated, with empty clients dropped.
// Skewed partitions can leave a client with no data at all; it has nothing to
// contribute to the round average.
inline std::vector<int> participating(std::span<const int> ticket_clients, std::span<const ClientDataset> clients) {
  detail::require(!ticket_clients.empty(), "round: ticket has no clients");
  std::vector<int> ids;
  for (int id : ticket_clients) {
    detail::require(id >= 0 && static_cast<std::size_t>(id) < clients.size(), "round: unknown client id");
    if (!clients[static_cast<std::size_t>(id)].empty()) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline void check_finite(const ScoringModel& m, const char* where) {
  if (!all_finite(m.params())) throw NumericError(std::string(where) + ": non-finite model parameters");
}

// Arithmetic mean of same-shaped models, summed in the given order.
inline ScoringModel average_models(std::span<const ScoringModel> models) {
  detail::require(!models.empty(), "average_models: empty set");
  ScoringModel avg = models.front();
  auto acc = avg.params();
  for (std::size_t i = 1; i < models.size(); ++i) {
    detail::require(models[i].same_shape(avg), "average_models: shape mismatch");
    const auto p = models[i].params();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  for (auto& v : acc) v *= inv;
  return avg;
}

// Running sum of models for the (e,k)-averaged output.
class ModelAccumulator {
 public:
  void add(const ScoringModel& m) {
    if (count_ == 0) {
      sum_ = m;
    } else {
      auto acc = sum_.params();
      const auto p = m.params();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
    }
    ++count_;
  }
  long count() const { return count_; }
  ScoringModel mean() const {
    detail::require(count_ > 0, "ModelAccumulator: nothing accumulated");
    ScoringModel out = sum_;
    for (auto& v : out.params()) v /= static_cast<double>(count_);
    return out;
  }

 private:
  ScoringModel sum_;
  long count_ = 0;
};

}  // namespace fedauc
