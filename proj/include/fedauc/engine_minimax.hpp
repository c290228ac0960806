#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "fedauc/core.hpp"
#include "fedauc/engine_common.hpp"
#include "fedauc/losses.hpp"
#include "fedauc/model.hpp"
#include "fedauc/parallel.hpp"
#include "fedauc/rng.hpp"
#include "fedauc/scheduler.hpp"

namespace fedauc {

// Fixed hyperparameters of one stage.
struct StageConfig {
  double eta = 0.1;
  int epochs = 1;
  int local_steps = 1;
  double gamma = 0.0;
  int batch = 1;  // examples averaged per local step
  bool freeze_model = false;  // step only a, b, alpha

  void validate() const {
    detail::require(eta >= 0.0 && std::isfinite(eta), "stage: eta must be finite and >= 0");
    detail::require(epochs >= 1, "stage: epochs must be >= 1");
    detail::require(local_steps >= 1, "stage: local steps must be >= 1");
    detail::require(gamma >= 0.0, "stage: gamma must be >= 0");
    detail::require(batch >= 1, "stage: batch must be >= 1");
  }
};

// Parameter schedule tied to the convergence analysis:
//   L_hat = L + 2 ell,  c = (mu/L_hat) / (5 + mu/L_hat),  gamma = 2 ell,
//   eta_s = eta0 exp(-(s-1) c),
//   T_s   = 212 / (eta0 min(ell, mu2)) exp((s-1) c),  mu2 = 2 p (1-p),
//   I_s   = max(1, round(c_I / (K sqrt(M eta_s)))),
//   E_s   = ceil(T_s / (K I_s)).
struct TheorySchedule {
  double eta0 = 0.1;
  double ell = 1.0;
  double mu = 1.0;
  double L = 1.0;
  int M = 1;
  int K = 1;
  double c_I = 1.0;
  int stages = 1;

  void validate() const {
    detail::require(eta0 > 0.0, "theory schedule: eta0 must be > 0");
    detail::require(ell > 0.0 && mu > 0.0 && L >= 0.0, "theory schedule: ell, mu must be > 0 and L >= 0");
    detail::require(M >= 1 && K >= 1, "theory schedule: M, K must be >= 1");
    detail::require(c_I > 0.0, "theory schedule: c_I must be > 0");
    detail::require(stages >= 1, "theory schedule: S must be >= 1");
  }

  double mu2(double p) const { return 2.0 * p * (1.0 - p); }
  double L_hat() const { return L + 2.0 * ell; }
  double c() const {
    const double r = mu / L_hat();
    return r / (5.0 + r);
  }
  double gamma() const { return 2.0 * ell; }
  double eta(int s) const { return eta0 * std::exp(-(s - 1) * c()); }
  double total_iterations(int s, double p) const {
    return 212.0 / (eta0 * std::min(ell, mu2(p))) * std::exp((s - 1) * c());
  }
  int local_steps(int s) const {
    const double raw = c_I / (static_cast<double>(K) * std::sqrt(static_cast<double>(M) * eta(s)));
    return std::max(1, static_cast<int>(std::llround(raw)));
  }
  int epochs(int s, double p) const {
    const double t = total_iterations(s, p);
    return static_cast<int>(std::ceil(t / (static_cast<double>(K) * local_steps(s))));
  }
};

struct MinimaxSchedule {
  std::variant<PracticalSchedule, TheorySchedule> mode;
  double gamma = 0.0;  // practical mode only; theory mode uses 2 ell

  int stages() const {
    return std::visit([](const auto& m) { return m.stages; }, mode);
  }

  StageConfig stage(int s, double p) const {
    StageConfig cfg;
    if (const auto* pr = std::get_if<PracticalSchedule>(&mode)) {
      pr->validate();
      cfg.eta = pr->eta(s);
      cfg.epochs = pr->epochs(s);
      cfg.local_steps = pr->local_steps;
      cfg.gamma = gamma;
    } else {
      const auto& th = std::get<TheorySchedule>(mode);
      th.validate();
      cfg.eta = th.eta(s);
      cfg.epochs = th.epochs(s, p);
      cfg.local_steps = th.local_steps(s);
      cfg.gamma = th.gamma();
    }
    return cfg;
  }
};

struct StageOutput {
  MinimaxState average;  // mean over all (e,k) of the group averages
  MinimaxState last;
  long rounds = 0;
  long local_steps = 0;  // summed over participating clients
};

using MinimaxObserver = std::function<void(const RoundEvent&, const MinimaxState&)>;

namespace detail {

inline std::size_t check_client(const ClientDataset& client) {
  require_data(!client.empty(), "client " + std::to_string(client.client_id) + " has no examples");
  return client.size();
}

inline void check_finite(const MinimaxState& s, const char* where) {
  fedauc::check_finite(s.model, where);
  if (!std::isfinite(s.a) || !std::isfinite(s.b) || !std::isfinite(s.alpha)) {
    throw NumericError(std::string(where) + ": non-finite a, b or alpha");
  }
}

inline MinimaxState average_states(std::span<const MinimaxState> states) {
  std::vector<ScoringModel> models;
  models.reserve(states.size());
  double a = 0.0, b = 0.0, alpha = 0.0;
  for (const auto& s : states) {
    models.push_back(s.model);
    a += s.a;
    b += s.b;
    alpha += s.alpha;
  }
  const double n = static_cast<double>(states.size());
  return {average_models(models), a / n, b / n, alpha / n};
}

class StateAccumulator {
 public:
  void add(const MinimaxState& s) {
    models_.add(s.model);
    a_ += s.a;
    b_ += s.b;
    alpha_ += s.alpha;
  }
  MinimaxState mean() const {
    const double n = static_cast<double>(models_.count());
    return {models_.mean(), a_ / n, b_ / n, alpha_ / n};
  }

 private:
  ModelAccumulator models_;
  double a_ = 0.0, b_ = 0.0, alpha_ = 0.0;
};

}  // namespace detail

// I steps of simultaneous descent on v = (w, a, b) and ascent on alpha, each on
// examples drawn uniformly from the client's combined pool.
inline MinimaxState local_update_minimax(MinimaxState state, const ClientDataset& client, const StageConfig& cfg,
                                         const ProxTerm& prox, double p, RngStream rng) {
  cfg.validate();
  const std::size_t n = detail::check_client(client);
  MinimaxGrad g, step;
  for (int t = 0; t < cfg.local_steps; ++t) {
    for (int j = 0; j < cfg.batch; ++j) {
      const Example& z = client.at(rng.index(n));
      g = minimax_stoch_grad(state.model, state.a, state.b, state.alpha, z, p);
      if (j == 0) {
        step = std::move(g);
      } else {
        for (std::size_t k = 0; k < step.w.size(); ++k) step.w[k] += g.w[k];
        step.a += g.a;
        step.b += g.b;
        step.alpha += g.alpha;
      }
    }
    if (cfg.batch > 1) {
      const double inv = 1.0 / cfg.batch;
      for (auto& v : step.w) v *= inv;
      step.a *= inv;
      step.b *= inv;
      step.alpha *= inv;
    }
    step = add_prox_grad(std::move(step), state, prox);
    if (!cfg.freeze_model) axpy_update(state.model, step.w, cfg.eta);
    state.a -= cfg.eta * step.a;
    state.b -= cfg.eta * step.b;
    state.alpha += cfg.eta * step.alpha;
  }
  return state;
}

// Where a round sits inside the run; only used to derive client seeds.
struct RoundPosition {
  int stage = 1;
  int epoch = 1;
  int group = 0;
};

// Every selected client starts from the same snapshot of (v, alpha); outputs
// are averaged in ascending client-id order whatever the execution order.
inline MinimaxState run_group_round(const MinimaxState& global, const RoundTicket& ticket,
                                    std::span<const ClientDataset> clients, const StageConfig& cfg,
                                    const ProxTerm& prox, double p, const EngineContext& ctx,
                                    const RoundPosition& pos) {
  const std::vector<int> ids = participating(ticket.clients, clients);
  if (ids.empty()) return global;
  std::vector<MinimaxState> results(ids.size());
  for_each_client(ctx.execution, ids.size(), [&](std::size_t i) {
    const int id = ids[i];
    RngStream rng = RngStream::at(ctx.seed, static_cast<std::uint64_t>(pos.stage), static_cast<std::uint64_t>(pos.epoch),
                                  static_cast<std::uint64_t>(pos.group), static_cast<std::uint64_t>(id),
                                  Purpose::kLocalSample);
    results[i] = local_update_minimax(global, clients[static_cast<std::size_t>(id)], cfg, prox, p, rng);
  });
  return detail::average_states(results);
}

// One stage: E epochs of K group rounds, each round seeded by the previous
// round's average. `round_offset` is the number of rounds already run.
inline StageOutput run_stage_osfm(const MinimaxState& init, const ParticipationPlan& plan,
                                  std::span<const ClientDataset> clients, const StageConfig& cfg, double p,
                                  const EngineContext& ctx, int stage = 1, long round_offset = 0,
                                  const MinimaxObserver& observer = {}) {
  cfg.validate();
  plan.validate();
  const ProxTerm prox{cfg.gamma, init};
  MinimaxState state = init;
  detail::StateAccumulator avg;
  StageOutput out;
  for (int e = 1; e <= cfg.epochs; ++e) {
    const auto tickets = plan_epoch(plan, e, RngStream::at(ctx.seed, static_cast<std::uint64_t>(stage),
                                                           static_cast<std::uint64_t>(e), 0, 0, Purpose::kPlan));
    for (const auto& ticket : tickets) {
      state = run_group_round(state, ticket, clients, cfg, prox, p, ctx, {stage, e, ticket.group});
      detail::check_finite(state, "osfm");
      avg.add(state);
      ++out.rounds;
      out.local_steps += static_cast<long>(ticket.clients.size()) * cfg.local_steps;
      if (observer) {
        observer(RoundEvent{stage, e, ticket.group, round_offset + out.rounds, cfg.eta, cfg.local_steps, ticket.clients},
                 state);
      }
    }
  }
  out.average = avg.mean();
  out.last = std::move(state);
  return out;
}

struct StageSummary {
  int stage = 1;
  StageConfig config;
  long rounds = 0;
};

struct CycpMinimaxResult {
  MinimaxState final_state;  // hand-off iterate of the last stage
  MinimaxState last_iterate;
  std::vector<StageSummary> stages;
  long rounds = 0;
  long local_steps = 0;
};

inline std::vector<StagePlan> stage_plans(const MinimaxSchedule& schedule, double p) {
  std::vector<StagePlan> plans;
  for (int s = 1; s <= schedule.stages(); ++s) {
    const auto cfg = schedule.stage(s, p);
    plans.push_back({s, cfg.eta, cfg.epochs, cfg.local_steps});
  }
  return plans;
}

// Stagewise outer loop: each stage is anchored at (and starts from) the
// previous stage's hand-off iterate.
inline CycpMinimaxResult run_cycp_minimax(const ScoringModel& init_model, const MinimaxSchedule& schedule,
                                          const ParticipationPlan& plan, std::span<const ClientDataset> clients,
                                          double p, const EngineContext& ctx, const CycpOptions& options = {},
                                          const MinimaxObserver& observer = {}, int batch = 1) {
  detail::require(schedule.stages() >= 1, "cycp-minimax: schedule needs at least one stage");
  CycpMinimaxResult result;
  MinimaxState state{init_model, 0.0, 0.0, 0.0};
  result.last_iterate = state;
  for (const auto& sp : apply_epoch_budget(stage_plans(schedule, p), options.epoch_budget)) {
    StageConfig cfg = schedule.stage(sp.stage, p);
    cfg.epochs = sp.epochs;
    cfg.batch = batch;
    auto out = run_stage_osfm(state, plan, clients, cfg, p, ctx, sp.stage, result.rounds, observer);
    result.rounds += out.rounds;
    result.local_steps += out.local_steps;
    result.stages.push_back({sp.stage, cfg, out.rounds});
    result.last_iterate = out.last;
    state = options.handoff == Handoff::kAverage ? std::move(out.average) : std::move(out.last);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace fedauc
