#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "fedauc/core.hpp"
#include "fedauc/engine_common.hpp"
#include "fedauc/losses.hpp"
#include "fedauc/model.hpp"
#include "fedauc/parallel.hpp"
#include "fedauc/rng.hpp"
#include "fedauc/scheduler.hpp"

namespace fedauc {

// Logistic classification loss log(1 + exp(-y h)) and its derivative in h.
inline double logistic_loss(Label y, double h) { return detail::softplus(-sign(y) * h); }
inline double logistic_loss_dh(Label y, double h) {
  const double s = sign(y);
  return -s * detail::stable_sigmoid(-s * h);
}

inline double mean_logistic_loss(const ScoringModel& model, std::span<const ClientDataset> datasets) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& c : datasets) {
    for (const auto* pool : {&c.pos, &c.neg}) {
      for (const auto& z : *pool) {
        acc += logistic_loss(z.label, score(model, z.features));
        ++n;
      }
    }
  }
  detail::require_data(n > 0, "mean_logistic_loss: empty federation");
  return acc / static_cast<double>(n);
}

// I single-example SGD steps on the logistic loss, sampling uniformly from
// the client's combined pool.
inline ScoringModel fedavg_local_update(ScoringModel model, const ClientDataset& client, int I, double eta,
                                        RngStream rng) {
  detail::require(I >= 1, "fedavg: I must be >= 1");
  detail::require(eta >= 0.0, "fedavg: eta must be >= 0");
  detail::require_data(!client.empty(), "client " + std::to_string(client.client_id) + " has no examples");
  ParamVector g;
  for (int t = 0; t < I; ++t) {
    const Example& z = client.at(rng.index(client.size()));
    const double h = score_grad_into(model, z.features, g);
    axpy_update(model, g, eta * logistic_loss_dh(z.label, h));
  }
  return model;
}

struct FedAvgResult {
  ScoringModel final_model;  // last iterate
  ScoringModel average;      // mean over all (e,k) rounds
  long rounds = 0;
  long local_steps = 0;
};

// CyCp-FedAVG: the same epoch and group-round structure as the AUC engines,
// chaining averaged models through the cycle.
inline FedAvgResult run_cycp_fedavg(const ScoringModel& init, const ParticipationPlan& plan,
                                    std::span<const ClientDataset> clients, int epochs, int I, double eta,
                                    const EngineContext& ctx, const ModelObserver& observer = {}) {
  detail::require(epochs >= 1, "fedavg: E must be >= 1");
  plan.validate();
  constexpr int kStage = 1;
  ScoringModel model = init;
  ModelAccumulator avg;
  FedAvgResult out;
  for (int e = 1; e <= epochs; ++e) {
    const auto tickets =
        plan_epoch(plan, e, RngStream::at(ctx.seed, kStage, static_cast<std::uint64_t>(e), 0, 0, Purpose::kPlan));
    for (const auto& ticket : tickets) {
      const std::vector<int> ids = participating(ticket.clients, clients);
      std::vector<ScoringModel> results(ids.size());
      for_each_client(ctx.execution, ids.size(), [&](std::size_t i) {
        const int id = ids[i];
        results[i] = fedavg_local_update(model, clients[static_cast<std::size_t>(id)], I, eta,
                                         RngStream::at(ctx.seed, kStage, static_cast<std::uint64_t>(e),
                                                       static_cast<std::uint64_t>(ticket.group),
                                                       static_cast<std::uint64_t>(id), Purpose::kLocalSample));
      });
      if (!results.empty()) model = average_models(results);
      check_finite(model, "fedavg");
      avg.add(model);
      ++out.rounds;
      out.local_steps += static_cast<long>(ticket.clients.size()) * I;
      if (observer) observer(RoundEvent{kStage, e, ticket.group, out.rounds, eta, I, ticket.clients}, model);
    }
  }
  out.average = avg.mean();
  out.final_model = std::move(model);
  return out;
}

}  // namespace fedauc
