#include "refcomm/game.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace refcomm {

namespace detail {

void warn_single_candidate_batch() {
  spdlog::warn("play_batch: batch has a single candidate; accuracy is trivially 1");
}

}  // namespace detail

StoreIndex index_stores(const std::vector<EmbeddingStore>& stores) {
  StoreIndex index;
  for (const auto& s : stores) {
    if (!index.emplace(s.architecture(), &s).second) {
      throw ConfigError("duplicate store for architecture '" + s.architecture() + "'");
    }
  }
  return index;
}

const EmbeddingStore& store_for(const StoreIndex& stores, const std::string& architecture) {
  auto it = stores.find(architecture);
  if (it == stores.end() || it->second == nullptr) {
    throw ConfigError("no embedding store for architecture '" + architecture + "'");
  }
  return *it->second;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (!(adam.lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (!(cosine_temperature > 0.0)) throw ConfigError("train: cosine_temperature must be > 0");
  if (receiver_hidden < 1) throw ConfigError("train: receiver_hidden must be >= 1");
  try {
    channel.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

int RunMetrics::epochs_to(double threshold) const {
  for (const auto& e : epochs) {
    if (e.test_acc >= threshold) return e.epoch;
  }
  return -1;
}

Sender<float> make_sender(const std::string& architecture, Index input_dim, const TrainConfig& config) {
  Rng rng(derive_seed(config.seed, "init:sender:" + architecture));
  return Sender<float>::init(architecture, input_dim, config.channel, rng);
}

Receiver<float> make_receiver(const std::string& architecture, Index input_dim, const TrainConfig& config) {
  Rng rng(derive_seed(config.seed, "init:receiver:" + architecture));
  return Receiver<float>::init(architecture, input_dim, config.receiver_hidden, config.channel,
                               config.cosine_temperature, rng);
}

Population make_population(const std::vector<std::string>& sender_archs,
                           const std::vector<std::string>& receiver_archs, const StoreIndex& stores,
                           const TrainConfig& config) {
  Population pop;
  for (const auto& a : sender_archs) pop.senders.push_back(make_sender(a, store_for(stores, a).dim(), config));
  for (const auto& a : receiver_archs) {
    pop.receivers.push_back(make_receiver(a, store_for(stores, a).dim(), config));
  }
  return pop;
}

AccuracyCount pair_accuracy(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                            std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng) {
  const auto& ss = store_for(stores, s.architecture);
  const auto& rs = store_for(stores, r.architecture);
  std::vector<GameBatch> batches;
  if (ids.size() < batch_size) {
    batches.push_back(batch_from_candidates({ids.begin(), ids.end()}));
  } else {
    batches = epoch_batches(ids, batch_size, rng);
  }
  PlayOptions<float> opt;
  opt.gradients = false;
  AccuracyCount count;
  for (const auto& b : batches) {
    const auto res = play_batch(s, r, b, ss, rs, Mode::eval, rng, opt);
    count.correct += res.correct;
    count.rounds += res.rounds;
  }
  return count;
}

PairSampler::PairSampler(std::size_t senders, std::size_t receivers, std::uint64_t seed)
    : senders_(senders), receivers_(receivers), rng_(derive_seed(seed, "pairing")) {
  if (senders == 0 || receivers == 0) throw ConfigError("population needs at least one sender and one receiver");
}

std::pair<std::size_t, std::size_t> PairSampler::next() {
  std::uniform_int_distribution<std::size_t> ds(0, senders_ - 1);
  std::uniform_int_distribution<std::size_t> dr(0, receivers_ - 1);
  const std::size_t s = ds(rng_);
  return {s, dr(rng_)};
}

namespace {

void check_population(const Population& pop) {
  if (pop.senders.empty() || pop.receivers.empty()) {
    throw ConfigError("population needs at least one sender and one receiver");
  }
  const ChannelSpec& c = pop.senders.front().channel;
  for (const auto& s : pop.senders) {
    if (!(s.channel == c)) throw ConfigError("sender '" + s.architecture + "' channel differs from the population");
  }
  for (const auto& r : pop.receivers) {
    if (!(r.channel == c)) {
      throw ConfigError("receiver '" + r.architecture + "' channel differs from the population");
    }
  }
}

double effective_epoch_scale(const Population& pop) {
  const double ns = static_cast<double>(pop.senders.size());
  const double nr = static_cast<double>(pop.receivers.size());
  double sum = 0.0;
  int agents = 0;
  for (const auto& s : pop.senders) {
    if (!s.frozen) sum += 1.0 / ns, ++agents;
  }
  for (const auto& r : pop.receivers) {
    if (!r.frozen) sum += 1.0 / nr, ++agents;
  }
  return agents ? sum / agents : 0.0;
}

struct EvalGrid {
  MatrixD acc;
  double mean = 0.0;
};

EvalGrid evaluate_grid(const Population& pop, const StoreIndex& stores, std::span<const std::uint64_t> ids,
                       std::size_t batch_size, std::uint64_t seed) {
  EvalGrid g;
  g.acc.resize(static_cast<Index>(pop.senders.size()), static_cast<Index>(pop.receivers.size()));
  for (std::size_t i = 0; i < pop.senders.size(); ++i) {
    for (std::size_t j = 0; j < pop.receivers.size(); ++j) {
      Rng rng(derive_seed(seed, "epoch-eval"));
      g.acc(static_cast<Index>(i), static_cast<Index>(j)) =
          pair_accuracy(pop.senders[i], pop.receivers[j], stores, ids, batch_size, rng).accuracy();
    }
  }
  g.mean = g.acc.mean();
  return g;
}

}  // namespace

RunMetrics train_population(Population& pop, const StoreIndex& stores, const Split& split, const TrainConfig& config,
                            const EpochCallback& on_epoch) {
  config.validate();
  check_population(pop);
  for (const auto& s : pop.senders) detail::check_pairing(s, pop.receivers.front(), store_for(stores, s.architecture),
                                                          store_for(stores, pop.receivers.front().architecture));
  for (const auto& r : pop.receivers) detail::check_pairing(pop.senders.front(), r,
                                                            store_for(stores, pop.senders.front().architecture),
                                                            store_for(stores, r.architecture));
  if (split.train.size() < config.batch_size) {
    throw InsufficientDataError("train: " + std::to_string(split.train.size()) + " training ids for batch size " +
                                std::to_string(config.batch_size));
  }
  if (split.test.empty()) throw InsufficientDataError("train: empty test split");

  const auto t0 = std::chrono::steady_clock::now();
  RunMetrics metrics;
  for (const auto& s : pop.senders) metrics.sender_names.push_back(s.architecture);
  for (const auto& r : pop.receivers) metrics.receiver_names.push_back(r.architecture);
  metrics.pair_counts.assign(pop.senders.size(), std::vector<std::uint64_t>(pop.receivers.size(), 0));

  std::vector<AdamState<float>> sender_opt(pop.senders.size(), AdamState<float>(config.adam));
  std::vector<AdamState<float>> receiver_opt(pop.receivers.size(), AdamState<float>(config.adam));

  Rng shuffle = make_rng(config.seed, "shuffle");
  Rng noise = make_rng(config.seed, "channel-noise");
  PairSampler sampler(pop.senders.size(), pop.receivers.size(), config.seed);
  PlayOptions<float> opt;
  opt.reinforce = config.reinforce;
  const double scale = effective_epoch_scale(pop);

  Population best = pop;
  double best_acc = -1.0;
  int best_epoch = 0;
  MatrixD best_grid;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = epoch_batches(split.train, config.batch_size, shuffle);
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    for (const auto& batch : batches) {
      ++step;
      const auto [si, ri] = sampler.next();
      ++metrics.pair_counts[si][ri];
      auto& s = pop.senders[si];
      auto& r = pop.receivers[ri];
      const auto where = [&] {
        return "at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + " (sender '" +
               s.architecture + "', receiver '" + r.architecture + "')";
      };
      PlayResult<float> res;
      try {
        res = play_batch(s, r, batch, store_for(stores, s.architecture), store_for(stores, r.architecture),
                         Mode::train, noise, opt);
      } catch (const NumericError& e) {
        throw DivergenceError(std::string("training diverged ") + where() + ": " + e.what());
      }
      if (!std::isfinite(res.loss)) {
        throw DivergenceError("training diverged " + where() + ": loss = " + std::to_string(res.loss));
      }
      loss_sum += res.loss;
      acc_sum += res.accuracy;
      auto sg = res.sender_grad;
      auto rg = res.receiver_grad;
      try {
        if (!s.frozen) adam_step(s.parameters(), sg.parameters(), sender_opt[si]);
        if (!r.frozen) adam_step(r.parameters(), rg.parameters(), receiver_opt[ri]);
      } catch (const NumericError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step));
      }
    }

    const auto grid = evaluate_grid(pop, stores, split.test, config.batch_size, config.seed);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.train_acc = acc_sum / static_cast<double>(batches.size());
    rec.test_acc = grid.mean;
    rec.effective_epochs = epoch * scale;
    metrics.epochs.push_back(rec);
    spdlog::debug("epoch {} loss {:.4f} train {:.4f} test {:.4f}", epoch, rec.train_loss, rec.train_acc,
                  rec.test_acc);
    if (on_epoch) on_epoch(rec);

    if (rec.test_acc > best_acc) {
      best_acc = rec.test_acc;
      best_epoch = epoch;
      best_grid = grid.acc;
      if (config.restore_best) best = pop;
    } else if (epoch - best_epoch >= config.patience) {
      break;
    }
  }

  if (config.restore_best) pop = std::move(best);
  metrics.peak_test_acc = best_acc;
  metrics.epochs_to_peak = best_epoch;
  metrics.pair_test_acc = best_grid;
  metrics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return metrics;
}

RunMetrics train_pair(Sender<float>& sender, Receiver<float>& receiver, const StoreIndex& stores, const Split& split,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  Population pop;
  pop.senders.push_back(sender);
  pop.receivers.push_back(receiver);
  auto metrics = train_population(pop, stores, split, config, on_epoch);
  sender = std::move(pop.senders.front());
  receiver = std::move(pop.receivers.front());
  return metrics;
}

namespace {

// Parameter identity only; the frozen flag is training state.
template <typename Agent>
std::vector<std::uint64_t> hashes(const std::vector<Agent>& agents) {
  std::vector<std::uint64_t> h;
  for (auto a : agents) {
    a.frozen = false;
    h.push_back(checkpoint_hash(a));
  }
  return h;
}

}  // namespace

RunMetrics train_learner(Learner learner, Population& community, const StoreIndex& stores, const Split& split,
                         const TrainConfig& config, const EpochCallback& on_epoch) {
  Population pop;
  const bool is_sender = std::holds_alternative<Sender<float>*>(learner);
  if (is_sender) {
    auto* s = std::get<Sender<float>*>(learner);
    if (s == nullptr) throw ConfigError("train_learner: null learner");
    for (const auto& c : community.senders) {
      if (c.architecture == s->architecture) {
        throw ConfigError("train_learner: community already has a sender for '" + s->architecture + "'");
      }
    }
    if (community.receivers.empty()) throw ConfigError("train_learner: community has no receivers");
    s->frozen = false;
    pop.senders.push_back(*s);
    pop.receivers = community.receivers;
  } else {
    auto* r = std::get<Receiver<float>*>(learner);
    if (r == nullptr) throw ConfigError("train_learner: null learner");
    for (const auto& c : community.receivers) {
      if (c.architecture == r->architecture) {
        throw ConfigError("train_learner: community already has a receiver for '" + r->architecture + "'");
      }
    }
    if (community.senders.empty()) throw ConfigError("train_learner: community has no senders");
    r->frozen = false;
    pop.receivers.push_back(*r);
    pop.senders = community.senders;
  }
  if (is_sender) {
    for (auto& r : pop.receivers) r.frozen = true;
  } else {
    for (auto& s : pop.senders) s.frozen = true;
  }

  const auto sender_before = hashes(community.senders);
  const auto receiver_before = hashes(community.receivers);

  auto metrics = train_population(pop, stores, split, config, on_epoch);

  const auto& trained_counterparts = is_sender ? hashes(pop.receivers) : hashes(pop.senders);
  const auto& expected = is_sender ? receiver_before : sender_before;
  if (trained_counterparts != expected || hashes(community.senders) != sender_before ||
      hashes(community.receivers) != receiver_before) {
    throw InvariantViolation("train_learner: a frozen community parameter changed during training");
  }
  if (is_sender) {
    *std::get<Sender<float>*>(learner) = std::move(pop.senders.front());
  } else {
    *std::get<Receiver<float>*>(learner) = std::move(pop.receivers.front());
  }
  return metrics;
}

std::vector<VocabSweepRow> vocab_sweep(const TrainConfig& base, const std::vector<Index>& vocab_sizes,
                                       const std::vector<std::string>& architectures, const StoreIndex& stores,
                                       const Split& split, const StoreIndex& ood_stores,
                                       std::span<const std::uint64_t> ood_ids) {
  if (!base.channel.discrete()) throw ConfigError("vocab_sweep: channel must be discrete");
  std::vector<VocabSweepRow> rows;
  for (Index v : vocab_sizes) {
    TrainConfig cfg = base;
    cfg.channel.vocab_size = v;
    Population pop = make_population(architectures, architectures, stores, cfg);
    const auto m = train_population(pop, stores, split, cfg);
    VocabSweepRow row;
    row.vocab_size = v;
    row.in_domain_acc = m.peak_test_acc;
    row.epochs_to_peak = m.epochs_to_peak;
    double ood = 0.0;
    for (const auto& s : pop.senders) {
      for (const auto& r : pop.receivers) {
        Rng rng(derive_seed(cfg.seed, "ood-eval"));
        ood += pair_accuracy(s, r, ood_stores, ood_ids, cfg.batch_size, rng).accuracy();
      }
    }
    row.ood_acc = ood / static_cast<double>(pop.senders.size() * pop.receivers.size());
    spdlog::info("vocab {}: in-domain {:.4f} ood {:.4f}", v, row.in_domain_acc, row.ood_acc);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace refcomm
