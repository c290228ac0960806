#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
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

// A prediction score shared through the server. The epoch tag is fixed when
// the score is produced.
struct ScoreRecord {
  double value = 0.0;
  int epoch = 0;
  int producer = -1;
  Label cls = Label::kPositive;
  std::uint64_t id = 0;  // unique within a pool's lifetime
};

// Server-side score sets: `current` holds the scores produced during the
// previous epoch (tag == epoch), `next` collects the scores of the running one.
struct GlobalScorePool {
  int epoch = 0;
  std::vector<ScoreRecord> current_pos, current_neg;
  std::vector<ScoreRecord> next_pos, next_neg;
  std::uint64_t next_id = 0;

  void append(ScoreRecord r) {
    r.id = next_id++;
    (r.cls == Label::kPositive ? next_pos : next_neg).push_back(r);
  }

  void begin_epoch() {
    next_pos.clear();
    next_neg.clear();
  }

  // Scores produced during epoch `e` become the passive source for e + 1.
  void rotate(int e) {
    current_pos = std::move(next_pos);
    current_neg = std::move(next_neg);
    next_pos.clear();
    next_neg.clear();
    epoch = e;
  }
};

// A client's shuffled copy of a received passive set, consumed front to back.
class LocalBuffer {
 public:
  LocalBuffer() = default;
  LocalBuffer(std::vector<ScoreRecord> records, RngStream rng) : items_(std::move(records)) { rng.shuffle(items_); }

  std::size_t size() const { return items_.size(); }
  std::size_t consumed() const { return cursor_; }
  bool empty() const { return items_.empty(); }

  // Next record in order. With `wrap`, a short buffer is reused from the
  // front instead of underflowing.
  const ScoreRecord& next(bool wrap) {
    if (items_.empty()) throw DataError("local buffer: empty");
    if (cursor_ >= items_.size() && !wrap) throw DataError("local buffer: underflow");
    return items_[cursor_++ % items_.size()];
  }

 private:
  std::vector<ScoreRecord> items_;
  std::size_t cursor_ = 0;
};

struct PassiveSets {
  std::vector<ScoreRecord> pos;  // R_1, drawn from the positive-class pool
  std::vector<ScoreRecord> neg;  // R_2, drawn from the negative-class pool
};

namespace detail {

inline std::vector<ScoreRecord> sample_records(std::span<const ScoreRecord> pool, std::size_t count, RngStream& rng) {
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  std::vector<ScoreRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pool[idx[i]]);
  return out;
}

}  // namespace detail

// I records per class sampled without replacement from the current pool; the
// pool itself is left intact.
inline PassiveSets draw_passive_sets(const GlobalScorePool& pool, int I, RngStream rng) {
  detail::require(I >= 1, "draw_passive_sets: I must be >= 1");
  const auto n = static_cast<std::size_t>(I);
  detail::require_data(pool.current_pos.size() >= n && pool.current_neg.size() >= n,
                       "draw_passive_sets: pool holds fewer than I scores for a class");
  RngStream rp = rng.fork(1u), rn = rng.fork(2u);
  return {detail::sample_records(pool.current_pos, n, rp), detail::sample_records(pool.current_neg, n, rn)};
}

// As draw_passive_sets, but takes min(I, |pool|) per class. Used by the engine
// when skewed partitions leave a class pool short for an epoch.
inline PassiveSets draw_passive_sets_available(const GlobalScorePool& pool, int I, RngStream rng) {
  const auto n = static_cast<std::size_t>(I);
  RngStream rp = rng.fork(1u), rn = rng.fork(2u);
  return {detail::sample_records(pool.current_pos, std::min(n, pool.current_pos.size()), rp),
          detail::sample_records(pool.current_neg, std::min(n, pool.current_neg.size()), rn)};
}

struct ConsumedScore {
  int client = -1;
  int consumer_epoch = 0;
  int record_epoch = 0;
  std::uint64_t id = 0;
};

// Bookkeeping for the staleness and memory invariants.
struct PairwiseAudit {
  std::vector<ConsumedScore> consumed;
  std::vector<std::size_t> pool_pos_after_epoch;
  std::vector<std::size_t> pool_neg_after_epoch;
  std::vector<int> group_sequence;
};

struct LocalPairwiseResult {
  ScoringModel model;
  std::vector<ScoreRecord> produced_pos;
  std::vector<ScoreRecord> produced_neg;
  std::vector<ConsumedScore> consumed;
};

// I local iterations of the active-passive update. Each iteration draws one
// local positive z1 and one local negative z2, scores both at the current
// iterate, and combines them with the next passive scores from the buffers:
//   G1 = d1 psi(h(w;z1), h'_neg) grad h(w;z1)
//   G2 = d2 psi(h'_pos, h(w;z2)) grad h(w;z2)
//   w <- w - eta (G1 + G2)
// A client lacking one class only contributes the term (and scores) of the
// class it holds.
inline LocalPairwiseResult local_update_pairwise(ScoringModel model, const ClientDataset& client,
                                                 std::vector<ScoreRecord> passive_pos,
                                                 std::vector<ScoreRecord> passive_neg, int I, double eta,
                                                 const PairwiseLoss& loss, RngStream rng, int epoch,
                                                 bool allow_reuse = false) {
  detail::require(I >= 1, "local_update_pairwise: I must be >= 1");
  detail::require(eta >= 0.0, "local_update_pairwise: eta must be >= 0");
  validate(loss);
  const bool has_pos = !client.pos.empty();
  const bool has_neg = !client.neg.empty();
  detail::require_data(has_pos || has_neg, "client " + std::to_string(client.client_id) + " has no examples");
  if (!allow_reuse) {
    detail::require_data(has_pos && has_neg,
                         "client " + std::to_string(client.client_id) + " is missing a local class");
    detail::require_data(passive_pos.size() >= static_cast<std::size_t>(I) &&
                             passive_neg.size() >= static_cast<std::size_t>(I),
                         "local_update_pairwise: passive sets smaller than I");
  }

  LocalBuffer buf_pos(std::move(passive_pos), rng.fork(Purpose::kBufferShuffle).fork(1u));
  LocalBuffer buf_neg(std::move(passive_neg), rng.fork(Purpose::kBufferShuffle).fork(2u));
  RngStream sampler = rng.fork(Purpose::kLocalSample);

  LocalPairwiseResult out;
  ParamVector g1, g2, step(model.param_count());
  auto produce = [&](double h, Label cls) {
    (cls == Label::kPositive ? out.produced_pos : out.produced_neg)
        .push_back(ScoreRecord{h, epoch, client.client_id, cls, 0});
  };
  auto consume = [&](LocalBuffer& buf) -> const ScoreRecord& {
    const ScoreRecord& r = buf.next(allow_reuse);
    out.consumed.push_back({client.client_id, epoch, r.epoch, r.id});
    return r;
  };

  for (int t = 0; t < I; ++t) {
    std::fill(step.begin(), step.end(), 0.0);
    if (has_pos) {
      const Example& z1 = client.pos[sampler.index(client.pos.size())];
      const double h1 = score_grad_into(model, z1.features, g1);
      produce(h1, Label::kPositive);
      if (!buf_neg.empty()) {
        const double coeff = psi_grad(loss, h1, consume(buf_neg).value).d1;
        for (std::size_t k = 0; k < step.size(); ++k) step[k] += coeff * g1[k];
      }
    }
    if (has_neg) {
      const Example& z2 = client.neg[sampler.index(client.neg.size())];
      const double h2 = score_grad_into(model, z2.features, g2);
      produce(h2, Label::kNegative);
      if (!buf_pos.empty()) {
        const double coeff = psi_grad(loss, consume(buf_pos).value, h2).d2;
        for (std::size_t k = 0; k < step.size(); ++k) step[k] += coeff * g2[k];
      }
    }
    axpy_update(model, step, eta);
  }
  out.model = std::move(model);
  return out;
}

// Epoch-0 pass with the incoming model: every client selected by the epoch-0
// plan scores I local examples per class. No parameters change.
inline GlobalScorePool bootstrap_scores(const ScoringModel& model, std::span<const ClientDataset> clients,
                                        const ParticipationPlan& plan, int I, const EngineContext& ctx,
                                        int stage = 1) {
  detail::require(I >= 1, "bootstrap_scores: I must be >= 1");
  bool any_pos = false, any_neg = false;
  for (const auto& c : clients) {
    any_pos = any_pos || !c.pos.empty();
    any_neg = any_neg || !c.neg.empty();
  }
  detail::require_data(any_pos && any_neg, "bootstrap_scores: a class is empty across the whole federation");

  GlobalScorePool pool;
  const auto tickets = plan_epoch(plan, 0, RngStream::at(ctx.seed, static_cast<std::uint64_t>(stage), 0, 0, 0, Purpose::kPlan));
  for (const auto& ticket : tickets) {
    for (int id : ticket.clients) {
      const auto& c = clients[static_cast<std::size_t>(id)];
      RngStream rng = RngStream::at(ctx.seed, static_cast<std::uint64_t>(stage), 0,
                                    static_cast<std::uint64_t>(ticket.group), static_cast<std::uint64_t>(id),
                                    Purpose::kBootstrap);
      for (const auto* pool_ptr : {&c.pos, &c.neg}) {
        if (pool_ptr->empty()) continue;
        for (int t = 0; t < I; ++t) {
          const Example& z = (*pool_ptr)[rng.index(pool_ptr->size())];
          pool.append({score(model, z.features), 0, id, z.label, 0});
        }
      }
    }
  }
  pool.rotate(0);
  return pool;
}

struct PairwiseRoundConfig {
  int local_steps = 1;
  double eta = 0.1;
  PairwiseLoss loss = loss::Sigmoid{1.0};
};

// Server draws R sets per client, clients update from the broadcast snapshot,
// the server averages models in ascending client-id order and files every
// produced score under the running epoch.
inline ScoringModel run_round_pairwise(const ScoringModel& global, const RoundTicket& ticket,
                                       std::span<const ClientDataset> clients, GlobalScorePool& pool,
                                       const PairwiseRoundConfig& cfg, const EngineContext& ctx, int stage = 1,
                                       PairwiseAudit* audit = nullptr) {
  const std::vector<int> ids = participating(ticket.clients, clients);
  if (ids.empty()) return global;
  const int e = ticket.epoch;
  const auto seed_at = [&](int id, Purpose purpose) {
    return RngStream::at(ctx.seed, static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(e),
                         static_cast<std::uint64_t>(ticket.group), static_cast<std::uint64_t>(id), purpose);
  };

  std::vector<PassiveSets> sets;
  sets.reserve(ids.size());
  for (int id : ids) sets.push_back(draw_passive_sets_available(pool, cfg.local_steps, seed_at(id, Purpose::kPassiveDraw)));

  std::vector<LocalPairwiseResult> results(ids.size());
  for_each_client(ctx.execution, ids.size(), [&](std::size_t i) {
    results[i] = local_update_pairwise(global, clients[static_cast<std::size_t>(ids[i])], std::move(sets[i].pos),
                                       std::move(sets[i].neg), cfg.local_steps, cfg.eta, cfg.loss,
                                       seed_at(ids[i], Purpose::kLocalSample), e, /*allow_reuse=*/true);
  });

  std::vector<ScoringModel> models;
  models.reserve(results.size());
  for (auto& r : results) {
    models.push_back(std::move(r.model));
    for (const auto& s : r.produced_pos) pool.append(s);
    for (const auto& s : r.produced_neg) pool.append(s);
    if (audit) audit->consumed.insert(audit->consumed.end(), r.consumed.begin(), r.consumed.end());
  }
  return average_models(models);
}

struct OsfpOutput {
  ScoringModel average;
  ScoringModel last;
  long rounds = 0;
  long local_steps = 0;
};

inline OsfpOutput run_osfp(const ScoringModel& init, const ParticipationPlan& plan,
                           std::span<const ClientDataset> clients, int epochs, const PairwiseRoundConfig& cfg,
                           const EngineContext& ctx, int stage = 1, long round_offset = 0,
                           const ModelObserver& observer = {}, PairwiseAudit* audit = nullptr) {
  detail::require(epochs >= 1, "osfp: E must be >= 1");
  plan.validate();
  GlobalScorePool pool = bootstrap_scores(init, clients, plan, cfg.local_steps, ctx, stage);
  ScoringModel model = init;
  ModelAccumulator avg;
  OsfpOutput out;
  for (int e = 1; e <= epochs; ++e) {
    pool.begin_epoch();
    const auto tickets = plan_epoch(plan, e, RngStream::at(ctx.seed, static_cast<std::uint64_t>(stage),
                                                           static_cast<std::uint64_t>(e), 0, 0, Purpose::kPlan));
    for (const auto& ticket : tickets) {
      model = run_round_pairwise(model, ticket, clients, pool, cfg, ctx, stage, audit);
      check_finite(model, "osfp");
      avg.add(model);
      ++out.rounds;
      out.local_steps += static_cast<long>(ticket.clients.size()) * cfg.local_steps;
      if (audit) audit->group_sequence.push_back(ticket.group);
      if (observer) {
        observer(RoundEvent{stage, e, ticket.group, round_offset + out.rounds, cfg.eta, cfg.local_steps, ticket.clients},
                 model);
      }
    }
    if (audit) {
      audit->pool_pos_after_epoch.push_back(pool.next_pos.size());
      audit->pool_neg_after_epoch.push_back(pool.next_neg.size());
    }
    pool.rotate(e);
  }
  out.average = avg.mean();
  out.last = std::move(model);
  return out;
}

// Schedule under the PL condition: with c = mu / (5 + mu),
//   eta_s = eta0 exp(-(s-1) c),  T_s = T0 exp((s-1) c),
//   I_s = max(1, round(c_I / sqrt(K eta_s))),  E_s = ceil(T_s / (K I_s)).
struct TheoryPLSchedule {
  double eta0 = 0.1;
  double mu = 1.0;
  int K = 1;
  double c_I = 1.0;
  double T0 = 1000.0;
  int stages = 1;

  void validate() const {
    detail::require(eta0 > 0.0 && mu > 0.0, "theory-pl schedule: eta0 and mu must be > 0");
    detail::require(K >= 1 && c_I > 0.0 && T0 > 0.0 && stages >= 1, "theory-pl schedule: invalid K, c_I, T0 or S");
  }
  double c() const { return mu / (5.0 + mu); }
  double eta(int s) const { return eta0 * std::exp(-(s - 1) * c()); }
  double total_iterations(int s) const { return T0 * std::exp((s - 1) * c()); }
  int steps(int s) const {
    const double raw = c_I / std::sqrt(static_cast<double>(K) * eta(s));
    return std::max(1, static_cast<int>(std::llround(raw)));
  }
  int epochs(int s) const {
    return static_cast<int>(std::ceil(total_iterations(s) / (static_cast<double>(K) * steps(s))));
  }
};

struct PairwiseStageSchedule {
  std::variant<PracticalSchedule, TheoryPLSchedule> mode;

  int stages() const {
    return std::visit([](const auto& m) { return m.stages; }, mode);
  }
  StagePlan stage(int s) const {
    return std::visit(
        [s](const auto& m) {
          m.validate();
          return StagePlan{s, m.eta(s), m.epochs(s), m.steps(s)};
        },
        mode);
  }
};

struct CycpPairwiseResult {
  ScoringModel final_model;
  ScoringModel last_iterate;
  std::vector<StagePlan> stages;
  long rounds = 0;
  long local_steps = 0;
};

// Stagewise outer loop; score pools are rebuilt from the incoming model at the
// start of every stage.
inline CycpPairwiseResult run_cycp_pairwise(const ScoringModel& init_model, const PairwiseStageSchedule& schedule,
                                            const ParticipationPlan& plan, std::span<const ClientDataset> clients,
                                            const PairwiseLoss& loss, const EngineContext& ctx,
                                            const CycpOptions& options = {}, const ModelObserver& observer = {},
                                            PairwiseAudit* audit = nullptr) {
  detail::require(schedule.stages() >= 1, "cycp-pairwise: schedule needs at least one stage");
  std::vector<StagePlan> plans;
  for (int s = 1; s <= schedule.stages(); ++s) plans.push_back(schedule.stage(s));
  plans = apply_epoch_budget(std::move(plans), options.epoch_budget);

  CycpPairwiseResult result;
  ScoringModel model = init_model;
  result.last_iterate = model;
  for (const auto& sp : plans) {
    const PairwiseRoundConfig cfg{sp.local_steps, sp.eta, loss};
    auto out = run_osfp(model, plan, clients, sp.epochs, cfg, ctx, sp.stage, result.rounds, observer, audit);
    result.rounds += out.rounds;
    result.local_steps += out.local_steps;
    result.stages.push_back(sp);
    result.last_iterate = out.last;
    model = options.handoff == Handoff::kAverage ? std::move(out.average) : std::move(out.last);
  }
  result.final_model = std::move(model);
  return result;
}

}  // namespace fedauc
