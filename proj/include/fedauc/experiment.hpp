#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedauc/baselines.hpp"
#include "fedauc/core.hpp"
#include "fedauc/engine_minimax.hpp"
#include "fedauc/engine_pairwise.hpp"
#include "fedauc/error.hpp"
#include "fedauc/losses.hpp"
#include "fedauc/metrics.hpp"
#include "fedauc/model.hpp"
#include "fedauc/scheduler.hpp"

namespace fedauc {

inline constexpr const char* kCodeVersion = "fedauc 0.1.0";

using nlohmann::json;

enum class Engine { kMinimax, kPairwise, kFedAvg };

struct Algorithm {
  Engine engine = Engine::kMinimax;
  SchedulerMode scheduler = SchedulerMode::kCyclic;
};

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "cycp-minimax") return {Engine::kMinimax, SchedulerMode::kCyclic};
  if (name == "cycp-pairwise") return {Engine::kPairwise, SchedulerMode::kCyclic};
  if (name == "cycp-fedavg") return {Engine::kFedAvg, SchedulerMode::kCyclic};
  if (name == "rs-minimax") return {Engine::kMinimax, SchedulerMode::kRandomSampling};
  if (name == "rs-pairwise") return {Engine::kPairwise, SchedulerMode::kRandomSampling};
  throw ConfigError("algorithm: unknown value '" + name +
                    "' (expected cycp-minimax, cycp-pairwise, cycp-fedavg, rs-minimax, rs-pairwise)");
}

inline const char* engine_name(Engine e) {
  switch (e) {
    case Engine::kMinimax:
      return "minimax";
    case Engine::kPairwise:
      return "pairwise";
    case Engine::kFedAvg:
      return "fedavg";
  }
  return "?";
}

// Every knob with its default. User configs are merged over this document, so
// the resolved config always lists the complete set.
inline json default_config() {
  return json::parse(R"({
    "algorithm": "cycp-minimax",
    "seed": 0,
    "data": {
      "source": "synthetic",
      "d": 10, "n_train": 2000, "n_val": 1000, "n_test": 1000,
      "pos_fraction": 0.01, "margin": 6.0,
      "train_csv": "", "val_csv": "", "test_csv": "", "csv_header": false,
      "partition": "dirichlet", "dirichlet": 0.5, "flip_ratio": 0.0
    },
    "layout": {"N": 20, "K": 4, "M": 2},
    "model": {"type": "linear", "hidden": 16},
    "schedule": {
      "mode": "practical",
      "eta0": 0.1, "decay": 0.5, "E0": 10, "growth": 2.0, "S": 4,
      "epoch_budget": 100, "handoff": "average",
      "ell": 1.0, "mu": 1.0, "L": 1.0, "c_I": 1.0, "T0": 1000.0
    },
    "I": 8,
    "batch": 1,
    "gamma": 0.0,
    "loss": {"type": "sigmoid", "lambda": 1.0, "m": 1.0, "tau": 1.0, "s": 1.0, "q": 2.0},
    "eval": {"every": 1, "split": "val"},
    "execution": "serial",
    "log": {"wall_clock": false}
  })");
}

struct RunConfig {
  Algorithm algorithm;
  std::uint64_t seed = 0;

  std::string data_source = "synthetic";
  std::size_t d = 10, n_train = 2000, n_val = 1000, n_test = 1000;
  double pos_fraction = 0.01, margin = 6.0;
  std::string train_csv, val_csv, test_csv;
  bool csv_header = false;
  std::string partition = "dirichlet";
  double dirichlet = 0.5;
  double flip_ratio = 0.0;

  int N = 20, K = 4, M = 2;
  ModelKind model_kind = ModelKind::kLinear;
  int hidden = 16;

  std::string schedule_mode = "practical";
  PracticalSchedule practical;
  TheorySchedule theory;
  TheoryPLSchedule theory_pl;
  long epoch_budget = 100;
  Handoff handoff = Handoff::kAverage;

  int I = 8;
  int batch = 1;
  double gamma = 0.0;
  PairwiseLoss loss = loss::Sigmoid{1.0};

  int eval_every = 1;
  std::string eval_split = "val";
  Execution execution = Execution::kSerial;
  bool wall_clock = false;

  json resolved;  // merged document the fields were read from
};

namespace detail {

// Sets a dotted path ("schedule.eta0") in a JSON document. The value is read
// as JSON when it parses and as a plain string otherwise.
inline void set_dotted(json& doc, const std::string& path, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(!key.empty(), "override: empty path component in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    json& child = (*node)[key];
    if (!child.is_object()) child = json::object();
    node = &child;
    start = dot + 1;
  }
}

// Rejects keys that are not present in the defaults (typos would otherwise
// silently fall back to a default).
inline void check_known_keys(const json& doc, const json& defaults, const std::string& prefix) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    require(defaults.contains(it.key()), "config: unknown field '" + path + "'");
    if (it->is_object() && defaults[it.key()].is_object()) check_known_keys(*it, defaults[it.key()], path);
  }
}

template <typename T>
T field(const json& doc, const std::string& dotted) {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(node->is_object() && node->contains(key), "config: missing field '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + dotted + "' has the wrong type (" + node->dump() + ")");
  }
}

inline bool user_set(const json& user, const std::string& key) { return user.is_object() && user.contains(key); }

}  // namespace detail

inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  detail::require(eq != std::string::npos && eq > 0, "override: expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  detail::set_dotted(doc, key, value);
}

// Merges `user` over the defaults and validates every field. Cross-field
// rules: pairwise loss settings only with pairwise engines, gamma only with
// minimax engines, M no larger than any group.
inline RunConfig parse_config(const json& user) {
  using detail::field;
  using detail::require;
  require(user.is_object(), "config: top level must be an object");
  const json defaults = default_config();
  detail::check_known_keys(user, defaults, "");
  json doc = defaults;
  doc.merge_patch(user);

  RunConfig c;
  c.algorithm = parse_algorithm(field<std::string>(doc, "algorithm"));
  c.seed = field<std::uint64_t>(doc, "seed");

  c.data_source = field<std::string>(doc, "data.source");
  require(c.data_source == "synthetic" || c.data_source == "csv", "data.source: expected 'synthetic' or 'csv'");
  c.d = field<std::size_t>(doc, "data.d");
  c.n_train = field<std::size_t>(doc, "data.n_train");
  c.n_val = field<std::size_t>(doc, "data.n_val");
  c.n_test = field<std::size_t>(doc, "data.n_test");
  c.pos_fraction = field<double>(doc, "data.pos_fraction");
  c.margin = field<double>(doc, "data.margin");
  c.train_csv = field<std::string>(doc, "data.train_csv");
  c.val_csv = field<std::string>(doc, "data.val_csv");
  c.test_csv = field<std::string>(doc, "data.test_csv");
  c.csv_header = field<bool>(doc, "data.csv_header");
  c.partition = field<std::string>(doc, "data.partition");
  require(c.partition == "dirichlet" || c.partition == "iid", "data.partition: expected 'dirichlet' or 'iid'");
  c.dirichlet = field<double>(doc, "data.dirichlet");
  require(c.dirichlet > 0.0, "data.dirichlet: must be > 0");
  c.flip_ratio = field<double>(doc, "data.flip_ratio");
  require(c.flip_ratio >= 0.0 && c.flip_ratio <= 1.0, "data.flip_ratio: must lie in [0,1]");
  if (c.data_source == "synthetic") {
    require(c.d >= 1, "data.d: must be >= 1");
    require(c.pos_fraction > 0.0 && c.pos_fraction < 1.0, "data.pos_fraction: must lie in (0,1)");
    require(c.margin >= 0.0, "data.margin: must be >= 0");
    require(c.n_train >= 2 && c.n_val >= 2 && c.n_test >= 2, "data.n_*: every split needs >= 2 examples");
  } else {
    require(!c.train_csv.empty() && !c.test_csv.empty(), "data.train_csv/test_csv: required when source is 'csv'");
  }

  c.N = field<int>(doc, "layout.N");
  c.K = field<int>(doc, "layout.K");
  c.M = field<int>(doc, "layout.M");
  (void)FederationLayout::contiguous(c.N, c.K, c.M);

  const auto model_type = field<std::string>(doc, "model.type");
  require(model_type == "linear" || model_type == "mlp", "model.type: expected 'linear' or 'mlp'");
  c.model_kind = model_type == "linear" ? ModelKind::kLinear : ModelKind::kMlp;
  c.hidden = field<int>(doc, "model.hidden");
  require(c.hidden >= 1, "model.hidden: must be >= 1");

  c.I = field<int>(doc, "I");
  require(c.I >= 1, "I: must be >= 1");
  c.batch = field<int>(doc, "batch");
  require(c.batch >= 1, "batch: must be >= 1");

  c.schedule_mode = field<std::string>(doc, "schedule.mode");
  require(c.schedule_mode == "practical" || c.schedule_mode == "theory",
          "schedule.mode: expected 'practical' or 'theory'");
  c.practical.eta0 = field<double>(doc, "schedule.eta0");
  c.practical.decay = field<double>(doc, "schedule.decay");
  c.practical.epochs0 = field<int>(doc, "schedule.E0");
  c.practical.growth = field<double>(doc, "schedule.growth");
  c.practical.stages = field<int>(doc, "schedule.S");
  c.practical.local_steps = c.I;
  c.practical.validate();
  c.theory = {c.practical.eta0, field<double>(doc, "schedule.ell"), field<double>(doc, "schedule.mu"),
              field<double>(doc, "schedule.L"), c.M, c.K, field<double>(doc, "schedule.c_I"), c.practical.stages};
  c.theory_pl = {c.practical.eta0, c.theory.mu, c.K, c.theory.c_I, field<double>(doc, "schedule.T0"),
                 c.practical.stages};
  if (c.schedule_mode == "theory") {
    c.theory.validate();
    c.theory_pl.validate();
  }
  c.epoch_budget = field<long>(doc, "schedule.epoch_budget");
  require(c.epoch_budget >= 0, "schedule.epoch_budget: must be >= 0");
  const auto handoff = field<std::string>(doc, "schedule.handoff");
  require(handoff == "average" || handoff == "last", "schedule.handoff: expected 'average' or 'last'");
  c.handoff = handoff == "average" ? Handoff::kAverage : Handoff::kLast;

  c.gamma = field<double>(doc, "gamma");
  require(c.gamma >= 0.0, "gamma: must be >= 0");

  const auto loss_type = field<std::string>(doc, "loss.type");
  const double lambda = field<double>(doc, "loss.lambda"), m = field<double>(doc, "loss.m"),
               tau = field<double>(doc, "loss.tau"), s = field<double>(doc, "loss.s"), q = field<double>(doc, "loss.q");
  if (loss_type == "square") {
    c.loss = loss::Square{m};
  } else if (loss_type == "squared_hinge") {
    c.loss = loss::SquaredHinge{m};
  } else if (loss_type == "logistic") {
    c.loss = loss::Logistic{s};
  } else if (loss_type == "sigmoid") {
    c.loss = loss::Sigmoid{lambda};
  } else if (loss_type == "barrier_hinge") {
    c.loss = loss::BarrierHinge{m, tau};
  } else if (loss_type == "qnorm_hinge") {
    c.loss = loss::QNormHinge{m, q};
  } else {
    throw ConfigError("loss.type: unknown loss '" + loss_type + "'");
  }
  validate(c.loss);

  if (c.algorithm.engine != Engine::kPairwise) {
    require(!detail::user_set(user, "loss"), "loss: pairwise losses apply only to cycp-pairwise / rs-pairwise");
  }
  if (c.algorithm.engine != Engine::kMinimax) {
    require(!detail::user_set(user, "gamma"), "gamma: the prox coefficient applies only to minimax algorithms");
  }

  c.eval_every = field<int>(doc, "eval.every");
  require(c.eval_every >= 1, "eval.every: must be >= 1");
  c.eval_split = field<std::string>(doc, "eval.split");
  require(c.eval_split == "val" || c.eval_split == "test", "eval.split: expected 'val' or 'test'");
  const auto exec = field<std::string>(doc, "execution");
  require(exec == "serial" || exec == "parallel", "execution: expected 'serial' or 'parallel'");
  c.execution = exec == "serial" ? Execution::kSerial : Execution::kParallel;
  c.wall_clock = field<bool>(doc, "log.wall_clock");

  c.resolved = std::move(doc);
  return c;
}

// Train / validation / test examples for a run.
struct DataSplits {
  std::vector<Example> train, val, test;
};

inline DataSplits load_data(const RunConfig& c) {
  DataSplits s;
  if (c.data_source == "synthetic") {
    const RngStream root = RngStream(c.seed).fork(Purpose::kSynthetic);
    const auto direction = random_direction(c.d, root.fork(0u));
    s.train = make_synthetic_along(direction, c.n_train, c.pos_fraction, c.margin, root.fork(1u));
    s.val = make_synthetic_along(direction, c.n_val, c.pos_fraction, c.margin, root.fork(2u));
    s.test = make_synthetic_along(direction, c.n_test, c.pos_fraction, c.margin, root.fork(3u));
  } else {
    s.train = load_csv(c.train_csv, c.csv_header);
    s.test = load_csv(c.test_csv, c.csv_header);
    s.val = c.val_csv.empty() ? s.test : load_csv(c.val_csv, c.csv_header);
    const auto d = s.train.front().dim();
    detail::require_data(s.val.front().dim() == d && s.test.front().dim() == d,
                         "data: train/val/test feature dimensions differ");
  }
  return s;
}

inline std::vector<ClientDataset> build_federation(const RunConfig& c, std::span<const Example> train) {
  const RngStream root(c.seed);
  auto clients = c.partition == "dirichlet" ? dirichlet_partition(train, c.N, c.dirichlet, root.fork(Purpose::kPartition))
                                            : iid_partition(train, c.N, root.fork(Purpose::kPartition));
  return flip_labels(std::move(clients), c.flip_ratio, root.fork(Purpose::kFlip));
}

inline json record_to_json(const RoundRecord& r) {
  json j;
  j["round"] = r.round;
  j["stage"] = r.stage;
  j["epoch"] = r.epoch;
  j["group"] = r.group;
  j["eta"] = r.eta;
  j["local_steps"] = r.local_steps;
  j["objective"] = r.objective;
  j["auc"] = r.auc;
  if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
  return j;
}

struct ExperimentResult {
  ScoringModel final_model;
  std::vector<RoundRecord> records;
  long rounds = 0;
  long local_steps = 0;
  double best_val_auc = 0.0;
  long best_round = 0;
  double final_val_auc = 0.0;
  double final_test_auc = 0.0;
  double last_iterate_test_auc = 0.0;
  double p = 0.5;
};

namespace detail {

inline std::vector<StagePlan> planned_stages(const RunConfig& c, double p) {
  if (c.algorithm.engine == Engine::kMinimax) {
    MinimaxSchedule sched{c.schedule_mode == "practical" ? std::variant<PracticalSchedule, TheorySchedule>(c.practical)
                                                         : std::variant<PracticalSchedule, TheorySchedule>(c.theory),
                          c.gamma};
    return apply_epoch_budget(stage_plans(sched, p), c.epoch_budget);
  }
  PairwiseStageSchedule sched{c.schedule_mode == "practical"
                                  ? std::variant<PracticalSchedule, TheoryPLSchedule>(c.practical)
                                  : std::variant<PracticalSchedule, TheoryPLSchedule>(c.theory_pl)};
  std::vector<StagePlan> plans;
  for (int s = 1; s <= sched.stages(); ++s) plans.push_back(sched.stage(s));
  return apply_epoch_budget(std::move(plans), c.epoch_budget);
}

// CyCp-FedAVG runs without stages: the total epoch count of the configured
// schedule at constant eta0.
inline int fedavg_epochs(const RunConfig& c) {
  long total = 0;
  for (const auto& sp : planned_stages(c, 0.5)) total += sp.epochs;
  return static_cast<int>(std::max<long>(total, 1));
}

}  // namespace detail

// Runs one experiment in memory. `on_record` sees every round-log record as
// soon as it is produced.
inline ExperimentResult run_in_memory(const RunConfig& c,
                                      const std::function<void(const RoundRecord&)>& on_record = {}) {
  const DataSplits data = load_data(c);
  const auto clients = build_federation(c, data.train);
  const double p = class_prior(clients).p;
  const auto [train_pos, train_neg] = pooled(clients);
  const auto [val_pos, val_neg] = split_by_class(data.val);
  const auto [test_pos, test_neg] = split_by_class(data.test);
  detail::require_data(!val_pos.empty() && !val_neg.empty(), "data: validation split needs both classes");
  detail::require_data(!test_pos.empty() && !test_neg.empty(), "data: test split needs both classes");
  const auto& eval_pos = c.eval_split == "val" ? val_pos : test_pos;
  const auto& eval_neg = c.eval_split == "val" ? val_neg : test_neg;

  const std::size_t d = data.train.front().dim();
  ScoringModel init = c.model_kind == ModelKind::kLinear ? ScoringModel::linear(d)
                                                         : ScoringModel::mlp(d, static_cast<std::size_t>(c.hidden));
  init_uniform(init, RngStream(c.seed).fork(Purpose::kInit));

  const auto layout = FederationLayout::contiguous(c.N, c.K, c.M);
  const auto plan = ParticipationPlan::make(c.algorithm.scheduler, layout, {});
  const EngineContext ctx{c.seed, c.execution};
  const CycpOptions options{c.handoff, c.epoch_budget};

  long total_rounds = 0;
  if (c.algorithm.engine == Engine::kFedAvg) {
    total_rounds = static_cast<long>(detail::fedavg_epochs(c)) * c.K;
  } else {
    for (const auto& sp : detail::planned_stages(c, p)) total_rounds += static_cast<long>(sp.epochs) * c.K;
  }

  ExperimentResult result;
  result.p = p;
  const auto start = std::chrono::steady_clock::now();
  auto record = [&](const RoundEvent& ev, const ScoringModel& model, double objective) {
    RoundRecord r;
    r.stage = ev.stage;
    r.epoch = ev.epoch;
    r.group = ev.group;
    r.round = ev.round;
    r.eta = ev.eta;
    r.local_steps = ev.local_steps;
    r.objective = objective;
    r.auc = evaluate(model, eval_pos, eval_neg);
    if (c.wall_clock) {
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    if (r.auc > result.best_val_auc || result.records.empty()) {
      result.best_val_auc = r.auc;
      result.best_round = r.round;
    }
    result.records.push_back(r);
    if (on_record) on_record(r);
  };
  auto due = [&](long round) { return round % c.eval_every == 0 || round == total_rounds; };

  ScoringModel last_iterate;
  if (c.algorithm.engine == Engine::kMinimax) {
    MinimaxSchedule sched{c.schedule_mode == "practical" ? std::variant<PracticalSchedule, TheorySchedule>(c.practical)
                                                         : std::variant<PracticalSchedule, TheorySchedule>(c.theory),
                          c.gamma};
    auto res = run_cycp_minimax(
        init, sched, plan, clients, p, ctx, options,
        [&](const RoundEvent& ev, const MinimaxState& s) {
          if (due(ev.round)) record(ev, s.model, minimax_objective(s.model, clients, s.a, s.b, s.alpha, p));
        },
        c.batch);
    result.final_model = std::move(res.final_state.model);
    last_iterate = std::move(res.last_iterate.model);
    result.rounds = res.rounds;
    result.local_steps = res.local_steps;
  } else if (c.algorithm.engine == Engine::kPairwise) {
    PairwiseStageSchedule sched{c.schedule_mode == "practical"
                                    ? std::variant<PracticalSchedule, TheoryPLSchedule>(c.practical)
                                    : std::variant<PracticalSchedule, TheoryPLSchedule>(c.theory_pl)};
    auto res = run_cycp_pairwise(init, sched, plan, clients, c.loss, ctx, options,
                                 [&](const RoundEvent& ev, const ScoringModel& m) {
                                   if (due(ev.round)) record(ev, m, pairwise_objective(m, train_pos, train_neg, c.loss));
                                 });
    result.final_model = std::move(res.final_model);
    last_iterate = std::move(res.last_iterate);
    result.rounds = res.rounds;
    result.local_steps = res.local_steps;
  } else {
    auto res = run_cycp_fedavg(init, plan, clients, detail::fedavg_epochs(c), c.I, c.practical.eta0, ctx,
                               [&](const RoundEvent& ev, const ScoringModel& m) {
                                 if (due(ev.round)) record(ev, m, mean_logistic_loss(m, clients));
                               });
    result.final_model = res.final_model;
    last_iterate = std::move(res.final_model);
    result.rounds = res.rounds;
    result.local_steps = res.local_steps;
  }

  result.final_val_auc = evaluate(result.final_model, val_pos, val_neg);
  result.final_test_auc = evaluate(result.final_model, test_pos, test_neg);
  result.last_iterate_test_auc = evaluate(last_iterate, test_pos, test_neg);
  return result;
}

// Manifest: the resolved config with `algorithm` expanded into its engine
// and scheduler, plus the seed and code version.
inline json make_manifest(const RunConfig& c) {
  json resolved = c.resolved;
  resolved.erase("algorithm");
  json m;
  m["code_version"] = kCodeVersion;
  m["engine"] = engine_name(c.algorithm.engine);
  m["scheduler"] = to_string(c.algorithm.scheduler);
  m["seed"] = c.seed;
  m["config"] = std::move(resolved);
  return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

// Writes into `out_dir`:
//   rounds.jsonl   one record per logged round, flushed as it is produced
//   summary.json   best / final AUC, round and step totals
//   model.ckpt     final parameters
//   manifest.json  written last; its presence marks a completed run
inline ExperimentResult run_experiment(const RunConfig& c, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "rounds.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw DataError("cannot write round log in '" + out_dir.string() + "'");
  auto result = run_in_memory(c, [&](const RoundRecord& r) {
    log << record_to_json(r).dump() << '\n';
    log.flush();
  });
  log.close();

  json summary;
  summary["best_val_auc"] = result.best_val_auc;
  summary["best_round"] = result.best_round;
  summary["final_val_auc"] = result.final_val_auc;
  summary["final_test_auc"] = result.final_test_auc;
  summary["last_iterate_test_auc"] = result.last_iterate_test_auc;
  summary["total_rounds"] = result.rounds;
  summary["total_local_steps"] = result.local_steps;
  summary["class_prior"] = result.p;
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  save_checkpoint(result.final_model, (out_dir / "model.ckpt").string());
  write_text(out_dir / "manifest.json", make_manifest(c).dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Grid sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
  std::size_t index = 0;
  json overrides;  // dotted key -> value
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string dir;
};

// Cartesian product of the grid (keys in lexicographic order, last key
// fastest), times `replicates` seeds base_seed + r.
inline std::vector<SweepPoint> expand_grid(const json& grid, std::uint64_t base_seed, int replicates) {
  detail::require(grid.is_object() && !grid.empty(), "sweep: grid must be a non-empty object");
  detail::require(replicates >= 1, "sweep: replicates must be >= 1");
  std::vector<std::pair<std::string, json>> dims;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    detail::require(it->is_array() && !it->empty(), "sweep: grid dimension '" + it.key() + "' must be a non-empty list");
    dims.emplace_back(it.key(), *it);
  }
  std::vector<SweepPoint> points;
  std::vector<std::size_t> odometer(dims.size(), 0);
  while (true) {
    json overrides = json::object();
    for (std::size_t i = 0; i < dims.size(); ++i) overrides[dims[i].first] = dims[i].second[odometer[i]];
    for (int r = 0; r < replicates; ++r) {
      SweepPoint pt;
      pt.index = points.size();
      pt.overrides = overrides;
      pt.replicate = r;
      pt.seed = base_seed + static_cast<std::uint64_t>(r);
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu", pt.index);
      pt.dir = name;
      points.push_back(std::move(pt));
    }
    std::size_t i = dims.size();
    while (i > 0) {
      --i;
      if (++odometer[i] < dims[i].second.size()) break;
      odometer[i] = 0;
      if (i == 0) return points;
    }
    if (dims.empty()) return points;
  }
}

struct SweepReport {
  std::size_t planned = 0;
  std::size_t executed = 0;
  std::size_t skipped = 0;
};

// Runs every grid point into out_dir/run_NNNN and writes sweep_index.json.
// Runs whose manifest already exists are skipped, so an interrupted sweep can
// be resumed. `max_runs` (if >= 0) stops after that many executed runs.
inline SweepReport sweep(const json& tmpl, const json& grid, const std::filesystem::path& out_dir, int replicates = 1,
                         long max_runs = -1) {
  const std::uint64_t base_seed = tmpl.contains("seed") ? tmpl["seed"].get<std::uint64_t>() : 0;
  const auto points = expand_grid(grid, base_seed, replicates);
  std::filesystem::create_directories(out_dir);

  json index = json::array();
  for (const auto& pt : points) {
    index.push_back({{"index", pt.index}, {"dir", pt.dir}, {"seed", pt.seed}, {"replicate", pt.replicate},
                     {"overrides", pt.overrides}});
  }
  write_text(out_dir / "sweep_index.json", index.dump(2) + "\n");

  // Validate every point before running any of them.
  std::vector<RunConfig> configs;
  for (const auto& pt : points) {
    json doc = tmpl;
    for (auto it = pt.overrides.begin(); it != pt.overrides.end(); ++it) detail::set_dotted(doc, it.key(), *it);
    doc["seed"] = pt.seed;
    configs.push_back(parse_config(doc));
  }

  SweepReport report{points.size(), 0, 0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto dir = out_dir / points[i].dir;
    if (std::filesystem::exists(dir / "manifest.json")) {
      ++report.skipped;
      continue;
    }
    if (max_runs >= 0 && static_cast<long>(report.executed) >= max_runs) break;
    run_experiment(configs[i], dir);
    ++report.executed;
  }
  return report;
}

}  // namespace fedauc
