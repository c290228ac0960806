// Command-line runner for federated AUC experiments.
//
//   fedauc run   [--config FILE] [--seed N] [--algorithm NAME] [--out DIR] [--set key=value]...
//   fedauc sweep --grid FILE [--config FILE] [--replicates R] [--out DIR] [--set key=value]...
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedauc/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

fedauc::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fedauc::ConfigError("cannot open config '" + path + "'");
  try {
    return fedauc::json::parse(in);
  } catch (const fedauc::json::parse_error& e) {
    throw fedauc::ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::filesystem::path output_root() {
  const char* env = std::getenv("FEDAUC_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--algorithm", f.algorithm,
                  "cycp-minimax | cycp-pairwise | cycp-fedavg | rs-minimax | rs-pairwise");
  cmd->add_option("--out", f.out, "Output directory (default: $FEDAUC_OUTPUT_ROOT/<algorithm>-seed<seed>)");
  cmd->add_option("--set", f.overrides, "Dotted-path override, e.g. schedule.eta0=0.1")->allow_extra_args(false);
}

fedauc::json assemble(const CommonFlags& f) {
  fedauc::json doc = f.config.empty() ? fedauc::json::object() : read_json(f.config);
  if (!doc.is_object()) throw fedauc::ConfigError("config: top level must be an object");
  if (!f.algorithm.empty()) doc["algorithm"] = f.algorithm;
  if (f.seed) doc["seed"] = *f.seed;
  for (const auto& o : f.overrides) fedauc::apply_override(doc, o);
  return doc;
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const fedauc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fedauc::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fedauc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fedauc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated AUC maximization under cyclic client participation"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_flags);

  CommonFlags sweep_flags;
  std::string grid_path;
  int replicates = 1;
  auto* sw = app.add_subcommand("sweep", "Run a grid of experiments (resumable)");
  add_common(sw, sweep_flags);
  sw->add_option("--grid", grid_path, "JSON object mapping dotted keys to value lists")->required();
  sw->add_option("--replicates", replicates, "Seeds per grid point (seed, seed+1, ...)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (*run) {
    return guarded([&] {
      const auto cfg = fedauc::parse_config(assemble(run_flags));
      const std::string algo = cfg.resolved["algorithm"].get<std::string>();
      const std::filesystem::path out =
          run_flags.out.empty() ? output_root() / (algo + "-seed" + std::to_string(cfg.seed)) : std::filesystem::path(run_flags.out);
      const auto res = fedauc::run_experiment(cfg, out);
      std::cout << algo << ": rounds=" << res.rounds << " best_val_auc=" << res.best_val_auc
                << " final_test_auc=" << res.final_test_auc << " -> " << out.string() << "\n";
    });
  }
  return guarded([&] {
    const auto tmpl = assemble(sweep_flags);
    const auto grid = read_json(grid_path);
    const std::filesystem::path out = sweep_flags.out.empty() ? output_root() / "sweep" : std::filesystem::path(sweep_flags.out);
    const auto report = fedauc::sweep(tmpl, grid, out, replicates);
    std::cout << "sweep: planned=" << report.planned << " executed=" << report.executed
              << " skipped=" << report.skipped << " -> " << out.string() << "\n";
  });
}
