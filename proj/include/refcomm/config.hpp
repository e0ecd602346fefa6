#ifndef REFCOMM_CONFIG_HPP
#define REFCOMM_CONFIG_HPP

#include "refcomm/eval.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace refcomm {

enum class LearnerRole { sender, receiver };

/// Everything one experiment needs. Text form is `key = value` per line,
/// `#` starts a comment; see `config_keys()` for the schema.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  std::filesystem::path data;  ///< store directory; defaults to <out>/stores

  SyntheticGenConfig synth;
  std::size_t blob_count = 2000;

  double test_fraction = 0.1;
  double ood_test_fraction = 0.1;

  TrainConfig train;

  std::vector<std::string> senders;    ///< population roster; empty = every architecture
  std::vector<std::string> receivers;
  std::string pair_sender = "lin256";
  std::string pair_receiver = "lin256";

  LearnerRole learner_role = LearnerRole::receiver;
  std::string learner_architecture;
  std::filesystem::path community;     ///< checkpoint directory of the frozen community

  std::filesystem::path checkpoints;   ///< checkpoint directory read by eval/probe; defaults to <out>/checkpoints
  std::vector<std::string> suites = {"all"};
  int eval_repeats = 1;
  std::size_t single_class_size = 32;
  std::vector<double> noise_sigmas = {0.0, 0.025, 0.05, 0.1, 0.2, 0.4, 10.0};
  std::vector<double> thresholds = {-0.5, 0.0, 0.5};
  std::vector<Index> vocab_sizes = {256, 1024, 4096};

  ProbeConfig probe;

  void validate() const;
  std::filesystem::path data_dir() const { return data.empty() ? out / "stores" : data; }
  std::filesystem::path checkpoint_dir() const { return checkpoints.empty() ? out / "checkpoints" : checkpoints; }
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// The documented schema, in file order.
const std::vector<ConfigKey>& config_keys();

/// Applies `key = value` lines on top of `base`. Unknown keys and malformed
/// values raise ConfigError naming the line.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Sets one key from its textual value.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& c, const std::string& key);

/// Every key with its resolved value; parse_config(resolved) reproduces the config.
std::string resolved_config(const ExperimentConfig& c);

// Sub-seeds. Each stage draws only from its own label so a partial re-run is
// reproducible from the top-level seed.
struct Seeds {
  std::uint64_t synth, blobs, split, ood_split, train, eval, probe;
};

Seeds derive_seeds(std::uint64_t seed);

}  // namespace refcomm

#endif  // REFCOMM_CONFIG_HPP
