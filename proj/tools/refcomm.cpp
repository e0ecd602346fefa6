// refcomm: synthesize stores, train agents, evaluate and analyze protocols.

#include "refcomm/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
  bool force = false;
  std::vector<std::string> set;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Config file (key = value per line)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Top-level seed; every sub-seed derives from it");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--jobs", f.jobs, "Concurrent independent jobs for sweeps")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", f.force, "Overwrite existing outputs");
  cmd->add_option("--set", f.set, "Override one config key: KEY=VALUE (repeatable)");
}

refcomm::ExperimentConfig resolve(const CommonFlags& f) {
  refcomm::ExperimentConfig c;
  if (!f.config.empty()) c = refcomm::load_config(f.config);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw refcomm::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    refcomm::set_config_value(c, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  return c;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("refcomm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("REFCOMM_LOG")) spdlog::cfg::helpers::load_levels(level);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Referential communication games between agents on frozen embeddings.\n"
               "Log verbosity: REFCOMM_LOG=trace|debug|info|warn|error|off (default warn)."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "refcomm 0.1.0");

  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Write synthetic embedding stores (in-domain, OOD, blobs)");
  add_common(synth, flags);

  auto* train = app.add_subcommand("train", "Train a pair, a population, or a learner against a community");
  train->require_subcommand(1);
  refcomm::TrainMode mode = refcomm::TrainMode::pair;
  auto* train_pair = train->add_subcommand("pair", "One sender and one receiver (pair.sender, pair.receiver)");
  auto* train_pop = train->add_subcommand("population", "Every sender with every receiver");
  auto* train_learner = train->add_subcommand("learner", "A new agent against a frozen community");
  for (auto* c : {train_pair, train_pop, train_learner}) add_common(c, flags);
  train_pair->callback([&] { mode = refcomm::TrainMode::pair; });
  train_pop->callback([&] { mode = refcomm::TrainMode::population; });
  train_learner->callback([&] { mode = refcomm::TrainMode::learner; });

  auto* eval = app.add_subcommand("eval", "Evaluation suites over a checkpoint directory");
  add_common(eval, flags);
  std::vector<std::string> suites;
  eval->add_option("--suite", suites,
                   "all, matrix, single-class, ood, blob, discretize, noise, distances, pca (repeatable)");

  auto* probe = app.add_subcommand("probe", "Linear class probes on messages and their zero-shot transfer");
  add_common(probe, flags);

  auto* analyze = app.add_subcommand("analyze", "Training sweeps: vocabulary size, REINFORCE vs Gumbel-Softmax");
  analyze->require_subcommand(1);
  refcomm::AnalyzeKind kind = refcomm::AnalyzeKind::vocab;
  auto* an_vocab = analyze->add_subcommand("vocab", "Discrete populations per analyze.vocab_sizes");
  auto* an_rf = analyze->add_subcommand("reinforce", "Discrete populations trained with each estimator");
  for (auto* c : {an_vocab, an_rf}) add_common(c, flags);
  an_vocab->callback([&] { kind = refcomm::AnalyzeKind::vocab; });
  an_rf->callback([&] { kind = refcomm::AnalyzeKind::reinforce; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? refcomm::kExitOk : refcomm::kExitConfig;
  }

  try {
    refcomm::ExperimentConfig c = resolve(flags);
    if (*synth) {
      refcomm::run_synth(c, flags.force);
    } else if (*train) {
      refcomm::run_train(c, mode, flags.force);
    } else if (*eval) {
      if (!suites.empty()) c.suites = suites;
      refcomm::run_eval(c, flags.force);
    } else if (*probe) {
      refcomm::run_probe(c, flags.force);
    } else if (*analyze) {
      refcomm::run_analyze(c, kind, flags.jobs, flags.force);
    }
  } catch (const std::exception& e) {
    std::cerr << "refcomm: " << e.what() << "\n";
    return refcomm::exit_code_for(e);
  }
  return refcomm::kExitOk;
}
