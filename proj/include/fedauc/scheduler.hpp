#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "fedauc/core.hpp"
#include "fedauc/error.hpp"
#include "fedauc/rng.hpp"

namespace fedauc {

enum class SchedulerMode { kCyclic, kRandomSampling };

inline const char* to_string(SchedulerMode m) { return m == SchedulerMode::kCyclic ? "cyclic" : "random"; }

struct ParticipationPlan {
  SchedulerMode mode = SchedulerMode::kCyclic;
  FederationLayout layout;
  std::vector<int> group_order;  // permutation of [0, K)

  static ParticipationPlan cyclic(FederationLayout layout) {
    return make(SchedulerMode::kCyclic, std::move(layout), {});
  }
  static ParticipationPlan random_sampling(FederationLayout layout) {
    return make(SchedulerMode::kRandomSampling, std::move(layout), {});
  }

  static ParticipationPlan make(SchedulerMode mode, FederationLayout layout, std::vector<int> order) {
    layout.validate();
    if (order.empty()) {
      order.resize(static_cast<std::size_t>(layout.num_groups));
      std::iota(order.begin(), order.end(), 0);
    }
    ParticipationPlan plan{mode, std::move(layout), std::move(order)};
    plan.validate();
    return plan;
  }

  int num_groups() const { return layout.num_groups; }
  int per_round() const { return layout.per_round; }

  void validate() const {
    layout.validate();
    detail::require(group_order.size() == static_cast<std::size_t>(layout.num_groups),
                    "plan: group order must list every group once");
    std::vector<int> sorted = group_order;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < layout.num_groups; ++i) {
      detail::require(sorted[static_cast<std::size_t>(i)] == i, "plan: group order must be a permutation of [0,K)");
    }
  }
};

// One communication round: which group is visited and which clients join.
// `clients` is sorted ascending, which is also the averaging order.
struct RoundTicket {
  int epoch = 1;
  int group = 0;
  std::vector<int> clients;
};

namespace detail {

inline std::vector<int> sample_without_replacement(std::vector<int> pool, int m, RngStream& rng) {
  require(m >= 1 && static_cast<std::size_t>(m) <= pool.size(),
          "plan: M=" + std::to_string(m) + " exceeds pool size " + std::to_string(pool.size()));
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

// The K tickets of epoch e. Cyclic mode visits groups in `group_order` and
// draws a fresh M-client sample on every visit; random-sampling mode draws M
// clients from the whole population for each of the K rounds.
inline std::vector<RoundTicket> plan_epoch(const ParticipationPlan& plan, int e, const RngStream& rng) {
  const auto groups = plan.layout.groups();
  std::vector<int> everyone(static_cast<std::size_t>(plan.layout.num_clients));
  std::iota(everyone.begin(), everyone.end(), 0);

  std::vector<RoundTicket> tickets;
  tickets.reserve(static_cast<std::size_t>(plan.num_groups()));
  for (int j = 0; j < plan.num_groups(); ++j) {
    RngStream r = rng.fork(static_cast<std::uint64_t>(j));
    RoundTicket t;
    t.epoch = e;
    if (plan.mode == SchedulerMode::kCyclic) {
      t.group = plan.group_order[static_cast<std::size_t>(j)];
      t.clients = detail::sample_without_replacement(groups[static_cast<std::size_t>(t.group)], plan.per_round(), r);
    } else {
      t.group = j;
      t.clients = detail::sample_without_replacement(everyone, plan.per_round(), r);
    }
    tickets.push_back(std::move(t));
  }
  return tickets;
}

inline long rounds_total(long epochs, long groups) {
  detail::require(epochs >= 1 && groups >= 1, "rounds_total: E and K must be >= 1");
  return epochs * groups;
}

}  // namespace fedauc
