#ifndef REFCOMM_GAME_HPP
#define REFCOMM_GAME_HPP

#include "refcomm/agents.hpp"
#include "refcomm/data.hpp"
#include "refcomm/optim.hpp"

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace refcomm {

enum class RewardKind { success, neg_cross_entropy };
enum class BaselineKind { none, batch_mean };

struct ReinforceConfig {
  RewardKind reward = RewardKind::success;
  BaselineKind baseline = BaselineKind::batch_mean;
  double entropy_coef = 0.0;
};

template <typename Scalar>
struct PlayResult {
  double loss = 0.0;
  double accuracy = 0.0;
  Index rounds = 0;
  Index correct = 0;
  Sender<Scalar> sender_grad;
  Receiver<Scalar> receiver_grad;
};

template <typename Scalar>
struct PlayOptions {
  const Matrix<Scalar>* gumbel_noise = nullptr;  ///< fixed channel noise (gradient checks)
  bool gradients = true;
  ReinforceConfig reinforce;
};

namespace detail {

void warn_single_candidate_batch();

template <typename Scalar>
void check_pairing(const Sender<Scalar>& s, const Receiver<Scalar>& r, const EmbeddingStore& ss,
                   const EmbeddingStore& rs) {
  if (s.input_dim() != ss.dim()) {
    throw ConfigError("sender '" + s.architecture + "' has input dim " + std::to_string(s.input_dim()) +
                      " but its store '" + ss.architecture() + "' has dim " + std::to_string(ss.dim()));
  }
  if (r.input_dim() != rs.dim()) {
    throw ConfigError("receiver '" + r.architecture + "' has input dim " + std::to_string(r.input_dim()) +
                      " but its store '" + rs.architecture() + "' has dim " + std::to_string(rs.dim()));
  }
  if (!(s.channel.kind == r.channel.kind && s.channel.message_dim == r.channel.message_dim &&
        (!s.channel.discrete() || s.channel.vocab_size == r.channel.vocab_size))) {
    throw ConfigError("sender '" + s.architecture + "' and receiver '" + r.architecture +
                      "' use incompatible channels");
  }
}

template <typename Scalar>
std::vector<std::uint64_t> target_ids(const GameBatch& batch) {
  std::vector<std::uint64_t> ids;
  ids.reserve(batch.rounds.size());
  for (const auto& round : batch.rounds) {
    if (round.target < 0 || static_cast<std::size_t>(round.target) >= batch.candidate_ids.size()) {
      throw IndexError("game batch: target position " + std::to_string(round.target) + " out of range");
    }
    ids.push_back(batch.candidate_ids[static_cast<std::size_t>(round.target)]);
  }
  return ids;
}

template <typename Scalar>
Index count_correct(const Matrix<Scalar>& logits, std::span<const Index> targets) {
  Index correct = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Index k = 0;
    logits.row(i).maxCoeff(&k);
    if (k == targets[static_cast<std::size_t>(i)]) ++correct;
  }
  return correct;
}

}  // namespace detail

/// Score-function gradient of log pi(symbol) scaled by `advantage`, with
/// respect to the logits (ascent direction on expected reward).
template <typename Scalar>
Vector<Scalar> reinforce_logit_gradient(const Vector<Scalar>& probs, Index symbol, Scalar advantage) {
  Vector<Scalar> g = -advantage * probs;
  g[symbol] += advantage;
  return g;
}

/// One referential-game round set: the sender encodes each target from its
/// own store, the receiver maps every candidate from its store, and the loss
/// is mean cross-entropy of the cosine-softmax selection.
template <typename Scalar>
PlayResult<Scalar> play_batch(const Sender<Scalar>& sender, const Receiver<Scalar>& receiver, const GameBatch& batch,
                              const EmbeddingStore& sender_store, const EmbeddingStore& receiver_store, Mode mode,
                              Rng& rng, const PlayOptions<Scalar>& options = {}) {
  detail::check_pairing(sender, receiver, sender_store, receiver_store);
  if (batch.candidate_ids.empty() || batch.rounds.empty()) {
    throw InsufficientDataError("play_batch: empty batch");
  }
  if (batch.candidate_ids.size() == 1) detail::warn_single_candidate_batch();

  const bool reinforce = mode == Mode::train && sender.channel.discrete() &&
                         sender.channel.train_estimator == Estimator::reinforce;

  const auto targets_v = batch.targets();
  const std::span<const Index> targets(targets_v);
  const auto tids = detail::target_ids<Scalar>(batch);
  const Matrix<Scalar> sender_in = sender_store.gather<Scalar>(tids);
  const Matrix<Scalar> receiver_in = receiver_store.gather<Scalar>(batch.candidate_ids);

  const auto spass = sender_forward(sender, sender_in, mode, NoiseSource<Scalar>{&rng, options.gumbel_noise});
  const auto dpass = decoder_forward(receiver, spass.payload);
  const auto mpass = mapper_forward(receiver, receiver_in);
  const auto sel = select_forward(dpass.out, mpass.out, receiver.cosine_temperature);
  const auto ce = softmax_cross_entropy(sel.logits, targets);

  PlayResult<Scalar> out;
  out.loss = ce.loss;
  out.rounds = static_cast<Index>(batch.rounds.size());
  out.correct = detail::count_correct(sel.logits, targets);
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.rounds);
  if (!options.gradients) return out;

  out.sender_grad = sender.zeros_like();
  out.receiver_grad = receiver.zeros_like();
  const auto sg = select_backward(sel, ce.grad);
  if (!receiver.frozen) mapper_backward(receiver, mpass, sg.mapped, out.receiver_grad);
  const Matrix<Scalar> d_payload = decoder_backward(receiver, dpass, sg.messages, out.receiver_grad);

  if (sender.frozen) return out;
  if (!reinforce) {
    sender_backward(sender, spass, d_payload, out.sender_grad);
    return out;
  }

  // Score-function estimator for the sender: the receiver's loss does not
  // reach the logits through the sampled one-hot.
  const Index n = out.rounds;
  const Matrix<Scalar> logp = log_softmax_rows(sel.logits);
  Vector<Scalar> reward(n);
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    sel.logits.row(i).maxCoeff(&k);
    const Index t = targets[static_cast<std::size_t>(i)];
    reward[i] = options.reinforce.reward == RewardKind::success ? Scalar(k == t ? 1 : 0) : logp(i, t);
  }
  // Leave-one-out batch mean: independent of the round's own sample, so the
  // estimator stays unbiased.
  const bool use_baseline = options.reinforce.baseline == BaselineKind::batch_mean && n > 1;
  const Scalar reward_sum = reward.sum();
  auto baseline_for = [&](Index i) {
    return use_baseline ? (reward_sum - reward[i]) / static_cast<Scalar>(n - 1) : Scalar(0);
  };
  const Matrix<Scalar> probs = softmax_rows(spass.logits);
  Matrix<Scalar> grad_logits(n, probs.cols());
  for (Index i = 0; i < n; ++i) {
    Vector<Scalar> p = probs.row(i).transpose();
    Vector<Scalar> g = -reinforce_logit_gradient<Scalar>(p, spass.symbols[static_cast<std::size_t>(i)],
                                                         reward[i] - baseline_for(i));
    if (options.reinforce.entropy_coef != 0.0) {
      // d(-H)/dlogits = p * (log p + H)
      const Vector<Scalar> logpi = (p.array().max(Scalar(1e-30))).log();
      const Scalar h = -(p.array() * logpi.array()).sum();
      g += static_cast<Scalar>(options.reinforce.entropy_coef) * (p.array() * (logpi.array() + h)).matrix();
    }
    grad_logits.row(i) = g.transpose() / static_cast<Scalar>(n);
  }
  auto lg = linear_backward(grad_logits, spass.input, sender.weight);
  out.sender_grad.weight += lg.weight;
  out.sender_grad.bias += lg.bias;
  return out;
}

/// Discrete-channel step with the REINFORCE sender estimator.
template <typename Scalar>
PlayResult<Scalar> reinforce_step(const Sender<Scalar>& sender, const Receiver<Scalar>& receiver,
                                  const GameBatch& batch, const EmbeddingStore& sender_store,
                                  const EmbeddingStore& receiver_store, const ReinforceConfig& config, Rng& rng) {
  if (!sender.channel.discrete()) throw ConfigError("reinforce_step: channel must be discrete");
  Sender<Scalar> s = sender;
  s.channel.train_estimator = Estimator::reinforce;
  PlayOptions<Scalar> opt;
  opt.reinforce = config;
  auto r = play_batch(s, receiver, batch, sender_store, receiver_store, Mode::train, rng, opt);
  r.sender_grad.channel = sender.channel;
  return r;
}

// ---------------------------------------------------------------------------
// Training

using StoreIndex = std::map<std::string, const EmbeddingStore*>;

StoreIndex index_stores(const std::vector<EmbeddingStore>& stores);
const EmbeddingStore& store_for(const StoreIndex& stores, const std::string& architecture);

struct TrainConfig {
  std::size_t batch_size = 64;
  int max_epochs = 50;
  int patience = 5;
  AdamConfig adam;
  ChannelSpec channel;
  double cosine_temperature = 0.1;
  Index receiver_hidden = 256;
  ReinforceConfig reinforce;
  std::uint64_t seed = 0;
  bool restore_best = true;  ///< leave agents at their peak-test-accuracy parameters

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double effective_epochs = 0.0;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> sender_names;
  std::vector<std::string> receiver_names;
  MatrixD pair_test_acc;  ///< (senders x receivers) at the peak epoch
  std::vector<std::vector<std::uint64_t>> pair_counts;
  int epochs_to_peak = 0;
  double peak_test_acc = 0.0;
  double wall_seconds = 0.0;

  /// First epoch whose test accuracy reaches `threshold`; -1 if never.
  int epochs_to(double threshold) const;
};

struct Population {
  std::vector<Sender<float>> senders;
  std::vector<Receiver<float>> receivers;
};

/// Agent initialization streams depend on (seed, role, architecture) only,
/// so the same architecture in the same role starts identical across runs.
Sender<float> make_sender(const std::string& architecture, Index input_dim, const TrainConfig& config);
Receiver<float> make_receiver(const std::string& architecture, Index input_dim, const TrainConfig& config);

/// One sender and one receiver per listed architecture.
Population make_population(const std::vector<std::string>& sender_archs,
                           const std::vector<std::string>& receiver_archs, const StoreIndex& stores,
                           const TrainConfig& config);

/// Single-pass accuracy of a pair over `ids` in shuffled full batches (eval mode).
struct AccuracyCount {
  Index correct = 0;
  Index rounds = 0;
  double accuracy() const { return rounds ? static_cast<double>(correct) / static_cast<double>(rounds) : 0.0; }
};

AccuracyCount pair_accuracy(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                            std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng);

using EpochCallback = std::function<void(const EpochRecord&)>;

RunMetrics train_pair(Sender<float>& sender, Receiver<float>& receiver, const StoreIndex& stores, const Split& split,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Each step samples one sender and one receiver uniformly and updates both.
RunMetrics train_population(Population& population, const StoreIndex& stores, const Split& split,
                            const TrainConfig& config, const EpochCallback& on_epoch = {});

using Learner = std::variant<Sender<float>*, Receiver<float>*>;

/// Trains only `learner` against the (frozen) opposite role of `community`.
/// Throws InvariantViolation if any community parameter changes.
RunMetrics train_learner(Learner learner, Population& community, const StoreIndex& stores, const Split& split,
                         const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Pair sampler used by population training; exposed for the uniformity test.
class PairSampler {
 public:
  PairSampler(std::size_t senders, std::size_t receivers, std::uint64_t seed);
  std::pair<std::size_t, std::size_t> next();

 private:
  std::size_t senders_;
  std::size_t receivers_;
  Rng rng_;
};

struct VocabSweepRow {
  Index vocab_size = 0;
  double in_domain_acc = 0.0;
  double ood_acc = 0.0;
  int epochs_to_peak = 0;
};

/// Trains one discrete population per vocabulary size and reports in-domain
/// test and OOD accuracy (mean over all pairs).
std::vector<VocabSweepRow> vocab_sweep(const TrainConfig& base, const std::vector<Index>& vocab_sizes,
                                       const std::vector<std::string>& architectures, const StoreIndex& stores,
                                       const Split& split, const StoreIndex& ood_stores,
                                       std::span<const std::uint64_t> ood_ids);

}  // namespace refcomm

#endif  // REFCOMM_GAME_HPP
