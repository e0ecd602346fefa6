#ifndef REFCOMM_COMMANDS_HPP
#define REFCOMM_COMMANDS_HPP

#include "refcomm/config.hpp"

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace refcomm {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitInvariant = 5;

int exit_code_for(const std::exception& e);

// On-disk layout under a store directory:
//   <arch>.emb, ood-<arch>.emb, blobs.emb (+ .manifest.json sidecars)
// and under a checkpoint directory:
//   roster.json, sender-<arch>.rck, receiver-<arch>.rck

struct LoadedStores {
  std::vector<EmbeddingStore> in_domain;
  std::vector<EmbeddingStore> ood;
  std::optional<EmbeddingStore> blobs;
};

std::filesystem::path store_file(const std::filesystem::path& dir, const std::string& architecture);
std::filesystem::path ood_store_file(const std::filesystem::path& dir, const std::string& architecture);
std::filesystem::path blob_store_file(const std::filesystem::path& dir);

/// Loads every store in `dir`; in-domain stores are ordered as in `order`
/// when listed there, then by name.
LoadedStores load_stores(const std::filesystem::path& dir, const std::vector<std::string>& order = {});

void write_population(const Population& pop, const std::filesystem::path& dir);
Population read_population(const std::filesystem::path& dir);

enum class TrainMode { pair, population, learner };
enum class AnalyzeKind { vocab, reinforce };

/// Writes stores for every architecture plus OOD and blob stores.
/// Refuses to overwrite an existing store directory unless `force`.
void run_synth(const ExperimentConfig& config, bool force);

void run_train(const ExperimentConfig& config, TrainMode mode, bool force);

/// Runs the selected eval suites over the checkpoint directory; reports go to <out>/eval.
void run_eval(const ExperimentConfig& config, bool force);

/// Probe table for every sender in the checkpoint directory; output in <out>/probe.
void run_probe(const ExperimentConfig& config, bool force);

/// Independent training sweeps, `jobs` at a time; output in <out>/analyze.
void run_analyze(const ExperimentConfig& config, AnalyzeKind kind, int jobs, bool force);

/// Population roster resolved against the available stores.
std::vector<std::string> roster(const std::vector<std::string>& requested, const std::vector<EmbeddingStore>& stores);

}  // namespace refcomm

#endif  // REFCOMM_COMMANDS_HPP
