#ifndef REFCOMM_EVAL_HPP
#define REFCOMM_EVAL_HPP

#include "refcomm/game.hpp"
#include "refcomm/pca.hpp"

#include <functional>
#include <string>
#include <vector>

namespace refcomm {

struct AccuracyStat {
  double mean = 0.0;
  double sd = 0.0;       ///< across repeats (0 for a single repeat)
  int repeats = 0;
  Index rounds = 0;      ///< total rounds scored
  double chance = 0.0;   ///< 1 / candidates per round
};

/// Chance accuracy for `candidates` candidates per round.
inline double chance_level(std::size_t candidates) { return candidates ? 1.0 / static_cast<double>(candidates) : 0.0; }

/// Mean and sd over `repeats` full shuffled passes over `ids` (eval-mode messages).
AccuracyStat eval_accuracy(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                           std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng, int repeats = 1);

struct AccuracyMatrix {
  std::vector<std::string> senders;
  std::vector<std::string> receivers;
  MatrixD acc;

  double min() const { return acc.size() ? acc.minCoeff() : 0.0; }
  double mean() const { return acc.size() ? acc.mean() : 0.0; }
};

/// Every sender x receiver pair; each entry comes from `eval_accuracy` with its own stream.
AccuracyMatrix eval_matrix(const Population& pop, const StoreIndex& stores, std::span<const std::uint64_t> ids,
                           std::size_t batch_size, std::uint64_t seed, int repeats = 1);

/// 32-candidate batches whose candidates all share one class, averaged over
/// classes. Each class's images (restricted to `pool` when given) are cut into
/// as many full batches as they fill.
AccuracyStat eval_single_class(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                               std::uint64_t seed, std::size_t batch_size = 32,
                               std::span<const std::uint64_t> pool = {});

/// Standard in-batch evaluation on held-out-class stores.
AccuracyStat eval_ood(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& ood_stores,
                      std::span<const std::uint64_t> ids, std::size_t batch_size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Messages and probes

/// Eval-mode channel payloads for `ids`, one row per id.
MatrixF sender_messages(const Sender<float>& s, const EmbeddingStore& store, std::span<const std::uint64_t> ids);

struct ProbeConfig {
  int epochs = 200;
  double lr = 1e-2;
  std::size_t batch_size = 64;
  bool normalize = true;  ///< unit-length messages before the linear map
  std::uint64_t seed = 0;
};

struct LinearProbe {
  MatrixF weights;  ///< (classes x message_dim)
  VectorF bias;
  std::vector<std::uint32_t> classes;
  bool normalize = true;

  /// Predicted class id per message row.
  std::vector<std::uint32_t> predict(const MatrixF& messages) const;
};

/// Multinomial logistic regression on `sender`'s messages for `ids`, labeled by the store's classes.
LinearProbe probe_train(const Sender<float>& sender, const EmbeddingStore& store, std::span<const std::uint64_t> ids,
                        const ProbeConfig& config);

/// Probe fitted on a message matrix directly.
LinearProbe probe_fit(const MatrixF& messages, std::span<const std::uint32_t> labels, const ProbeConfig& config);

double probe_accuracy(const LinearProbe& probe, const MatrixF& messages, std::span<const std::uint32_t> labels);

/// Applies `probe` unchanged to `sender`'s messages on `ids`; returns top-1 accuracy.
double probe_transfer(const LinearProbe& probe, const Sender<float>& sender, const EmbeddingStore& store,
                      std::span<const std::uint64_t> ids);

struct ProbeRow {
  std::string sender;
  double native = 0.0;
  std::vector<double> transfer;  ///< one per other sender, population order
  double transfer_mean() const;
};

/// Native and zero-shot transfer accuracy for every sender. Probes train on
/// `train_ids` and are scored on `test_ids` of the OOD stores.
std::vector<ProbeRow> probe_table(const std::vector<Sender<float>>& senders, const StoreIndex& ood_stores,
                                  std::span<const std::uint64_t> train_ids, std::span<const std::uint64_t> test_ids,
                                  const ProbeConfig& config);

struct DistanceDistribution {
  std::vector<double> values;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

DistanceDistribution summarize_distances(std::vector<double> values);

/// Cosine distance between the two senders' messages for each image. With
/// `mismatched`, sender_b describes a deranged image instead (baseline).
DistanceDistribution message_distances(const Sender<float>& a, const Sender<float>& b, const StoreIndex& stores,
                                       std::span<const std::uint64_t> ids, bool mismatched = false,
                                       std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Inference-time probes. None of them touches agent parameters.

enum class DiscretizeMode { threshold, argmax_one_hot };

/// Transform applied to a batch of eval messages before the receiver sees them.
using MessageTransform = std::function<void(MatrixF& messages, Rng& rng)>;

/// Eval accuracy with `transform` applied to the messages. A message that
/// becomes all-zero has no direction; its round is scored as a uniform guess.
AccuracyStat eval_with_messages(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                                std::span<const std::uint64_t> ids, std::size_t batch_size, std::uint64_t seed,
                                const MessageTransform& transform);

AccuracyStat discretize_eval(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                             std::span<const std::uint64_t> ids, DiscretizeMode mode, double threshold,
                             std::size_t batch_size, std::uint64_t seed);

AccuracyStat noise_eval(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                        std::span<const std::uint64_t> ids, double sigma, std::size_t batch_size,
                        std::uint64_t seed);

struct PcaReport {
  PcaResult pca;
  bool dominant_dimension = false;   ///< some ratio > 2x the uniform share
  bool correlated_dimensions = false;  ///< some off-diagonal |r| > 0.5
};

/// PCA over the pooled eval messages of all `senders`.
PcaReport pca_report(const std::vector<Sender<float>>& senders, const StoreIndex& stores,
                     std::span<const std::uint64_t> ids);

/// Blob-store stand-ins for each architecture of the pair: prefix views of `blobs`.
StoreIndex blob_views(const EmbeddingStore& blobs, const std::vector<std::pair<std::string, Index>>& architectures,
                      std::vector<EmbeddingStore>& storage);

/// Accuracy of a pair on structureless blob inputs.
AccuracyStat blob_test(const Sender<float>& s, const Receiver<float>& r, const EmbeddingStore& blobs,
                       std::size_t batch_size, std::uint64_t seed);

}  // namespace refcomm

#endif  // REFCOMM_EVAL_HPP
