#include "refcomm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace refcomm {

namespace {

AccuracyStat finish(const std::vector<double>& accs, Index rounds, std::size_t candidates) {
  AccuracyStat st;
  st.repeats = static_cast<int>(accs.size());
  st.rounds = rounds;
  st.chance = chance_level(candidates);
  if (accs.empty()) return st;
  st.mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
  if (accs.size() > 1) {
    double ss = 0.0;
    for (double a : accs) ss += (a - st.mean) * (a - st.mean);
    st.sd = std::sqrt(ss / static_cast<double>(accs.size() - 1));
  }
  return st;
}

std::size_t effective_batch(std::span<const std::uint64_t> ids, std::size_t batch_size) {
  return std::min(ids.size(), batch_size);
}

}  // namespace

AccuracyStat eval_accuracy(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                           std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng, int repeats) {
  if (repeats < 1) throw ParameterError("eval_accuracy: repeats must be >= 1");
  if (ids.empty()) throw InsufficientDataError("eval_accuracy: no ids");
  std::vector<double> accs;
  Index rounds = 0;
  for (int k = 0; k < repeats; ++k) {
    const auto c = pair_accuracy(s, r, stores, ids, batch_size, rng);
    accs.push_back(c.accuracy());
    rounds += c.rounds;
  }
  return finish(accs, rounds, effective_batch(ids, batch_size));
}

AccuracyMatrix eval_matrix(const Population& pop, const StoreIndex& stores, std::span<const std::uint64_t> ids,
                           std::size_t batch_size, std::uint64_t seed, int repeats) {
  AccuracyMatrix m;
  for (const auto& s : pop.senders) m.senders.push_back(s.architecture);
  for (const auto& r : pop.receivers) m.receivers.push_back(r.architecture);
  m.acc.resize(static_cast<Index>(pop.senders.size()), static_cast<Index>(pop.receivers.size()));
  for (std::size_t i = 0; i < pop.senders.size(); ++i) {
    for (std::size_t j = 0; j < pop.receivers.size(); ++j) {
      Rng rng(derive_seed(seed, "eval-matrix"));
      m.acc(static_cast<Index>(i), static_cast<Index>(j)) =
          eval_accuracy(pop.senders[i], pop.receivers[j], stores, ids, batch_size, rng, repeats).mean;
    }
  }
  return m;
}

AccuracyStat eval_single_class(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                               std::uint64_t seed, std::size_t batch_size, std::span<const std::uint64_t> pool) {
  const auto& ss = store_for(stores, s.architecture);
  const auto& rs = store_for(stores, r.architecture);
  std::set<std::uint64_t> allowed(pool.begin(), pool.end());
  Rng rng(derive_seed(seed, "single-class"));
  PlayOptions<float> opt;
  opt.gradients = false;
  std::vector<double> per_class;
  Index rounds = 0;
  for (std::uint32_t c : ss.classes()) {
    std::vector<std::uint64_t> members;
    for (std::uint64_t id : ss.ids_of_class(c)) {
      if (allowed.empty() || allowed.count(id)) members.push_back(id);
    }
    if (members.size() < batch_size) {
      throw InsufficientDataError("single-class eval: class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " images, need " + std::to_string(batch_size));
    }
    Index correct = 0;
    Index n = 0;
    for (const auto& b : epoch_batches(members, batch_size, rng)) {
      const auto res = play_batch(s, r, b, ss, rs, Mode::eval, rng, opt);
      correct += res.correct;
      n += res.rounds;
    }
    per_class.push_back(static_cast<double>(correct) / static_cast<double>(n));
    rounds += n;
  }
  if (per_class.empty()) throw InsufficientDataError("single-class eval: store has no labeled classes");
  AccuracyStat st = finish(per_class, rounds, batch_size);
  st.repeats = 1;
  return st;
}

AccuracyStat eval_ood(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& ood_stores,
                      std::span<const std::uint64_t> ids, std::size_t batch_size, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "ood-eval"));
  return eval_accuracy(s, r, ood_stores, ids, batch_size, rng, 1);
}

// ---------------------------------------------------------------------------

MatrixF sender_messages(const Sender<float>& s, const EmbeddingStore& store, std::span<const std::uint64_t> ids) {
  const MatrixF x = store.gather<float>(ids);
  return sender_forward<float>(s, x, Mode::eval, {}).payload;
}

namespace {

MatrixF probe_features(const MatrixF& messages, bool normalize) {
  if (!normalize) return messages;
  MatrixF out = messages;
  for (Index i = 0; i < out.rows(); ++i) {
    const float n = out.row(i).norm();
    if (n > 0.0f) out.row(i) /= n;
  }
  return out;
}

}  // namespace

std::vector<std::uint32_t> LinearProbe::predict(const MatrixF& messages) const {
  const MatrixF logits = linear_forward(weights, bias, probe_features(messages, normalize));
  std::vector<std::uint32_t> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index k = 0;
    logits.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(k)];
  }
  return out;
}

LinearProbe probe_fit(const MatrixF& messages, std::span<const std::uint32_t> labels, const ProbeConfig& config) {
  if (messages.rows() != static_cast<Index>(labels.size())) {
    throw ShapeError("probe_fit: " + std::to_string(messages.rows()) + " messages but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (messages.rows() == 0) throw InsufficientDataError("probe_fit: no training messages");
  if (config.epochs < 1 || !(config.lr > 0.0) || config.batch_size < 1) {
    throw ParameterError("probe_fit: epochs, lr and batch_size must be positive");
  }
  LinearProbe p;
  p.normalize = config.normalize;
  p.classes.assign(labels.begin(), labels.end());
  std::sort(p.classes.begin(), p.classes.end());
  p.classes.erase(std::unique(p.classes.begin(), p.classes.end()), p.classes.end());
  std::vector<Index> target(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    target[i] = std::lower_bound(p.classes.begin(), p.classes.end(), labels[i]) - p.classes.begin();
  }

  const MatrixF x = probe_features(messages, config.normalize);
  const auto c = static_cast<Index>(p.classes.size());
  p.weights = MatrixF::Zero(c, x.cols());
  p.bias = VectorF::Zero(c);

  AdamConfig ac;
  ac.lr = config.lr;
  AdamState<float> state(ac);
  Rng rng(derive_seed(config.seed, "probe"));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      MatrixF xb(static_cast<Index>(end - start), x.cols());
      std::vector<Index> tb(end - start);
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Index>(k - start)) = x.row(static_cast<Index>(order[k]));
        tb[k - start] = target[order[k]];
      }
      const auto ce = softmax_cross_entropy(linear_forward(p.weights, p.bias, xb), tb);
      const auto g = linear_backward(ce.grad, xb, p.weights);
      MatrixF gw = g.weight;
      VectorF gb = g.bias;
      adam_step<float>({param_view<float>("probe.weight", p.weights), param_view<float>("probe.bias", p.bias)},
                       {param_view<float>("probe.weight", gw), param_view<float>("probe.bias", gb)}, state);
    }
  }
  return p;
}

LinearProbe probe_train(const Sender<float>& sender, const EmbeddingStore& store, std::span<const std::uint64_t> ids,
                        const ProbeConfig& config) {
  std::vector<std::uint32_t> labels;
  labels.reserve(ids.size());
  for (auto id : ids) labels.push_back(store.class_of(id));
  return probe_fit(sender_messages(sender, store, ids), labels, config);
}

double probe_accuracy(const LinearProbe& probe, const MatrixF& messages, std::span<const std::uint32_t> labels) {
  if (messages.rows() != static_cast<Index>(labels.size())) throw ShapeError("probe_accuracy: row/label mismatch");
  if (labels.empty()) throw InsufficientDataError("probe_accuracy: no messages");
  if (messages.cols() != probe.weights.cols()) {
    throw ShapeError("probe_accuracy: probe expects dim " + std::to_string(probe.weights.cols()) + ", got " +
                     shape_of(messages));
  }
  const auto pred = probe.predict(messages);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double probe_transfer(const LinearProbe& probe, const Sender<float>& sender, const EmbeddingStore& store,
                      std::span<const std::uint64_t> ids) {
  std::vector<std::uint32_t> labels;
  for (auto id : ids) labels.push_back(store.class_of(id));
  return probe_accuracy(probe, sender_messages(sender, store, ids), labels);
}

double ProbeRow::transfer_mean() const {
  if (transfer.empty()) return std::nan("");
  return std::accumulate(transfer.begin(), transfer.end(), 0.0) / static_cast<double>(transfer.size());
}

std::vector<ProbeRow> probe_table(const std::vector<Sender<float>>& senders, const StoreIndex& ood_stores,
                                  std::span<const std::uint64_t> train_ids, std::span<const std::uint64_t> test_ids,
                                  const ProbeConfig& config) {
  std::vector<ProbeRow> rows;
  for (std::size_t i = 0; i < senders.size(); ++i) {
    const auto& store = store_for(ood_stores, senders[i].architecture);
    const auto probe = probe_train(senders[i], store, train_ids, config);
    ProbeRow row;
    row.sender = senders[i].architecture;
    row.native = probe_transfer(probe, senders[i], store, test_ids);
    for (std::size_t j = 0; j < senders.size(); ++j) {
      if (j == i) continue;
      row.transfer.push_back(
          probe_transfer(probe, senders[j], store_for(ood_stores, senders[j].architecture), test_ids));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------

DistanceDistribution summarize_distances(std::vector<double> values) {
  DistanceDistribution d;
  d.values = std::move(values);
  if (d.values.empty()) return d;
  std::vector<double> sorted = d.values;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  d.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  d.q1 = quantile(0.25);
  d.median = quantile(0.5);
  d.q3 = quantile(0.75);
  return d;
}

DistanceDistribution message_distances(const Sender<float>& a, const Sender<float>& b, const StoreIndex& stores,
                                       std::span<const std::uint64_t> ids, bool mismatched, std::uint64_t seed) {
  if (a.channel.sender_output_dim() != b.channel.sender_output_dim() || a.channel.kind != b.channel.kind) {
    throw ConfigError("message_distances: senders use different channels");
  }
  const MatrixD ma = sender_messages(a, store_for(stores, a.architecture), ids).cast<double>();
  std::vector<std::uint64_t> ids_b(ids.begin(), ids.end());
  if (mismatched) {
    if (ids_b.size() < 2) throw InsufficientDataError("message_distances: baseline needs >= 2 images");
    // Random cyclic shift of a shuffled order: a derangement.
    Rng rng(derive_seed(seed, "distance-baseline"));
    std::vector<std::size_t> perm(ids_b.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::uint64_t> shifted(ids_b.size());
    for (std::size_t k = 0; k < perm.size(); ++k) shifted[perm[k]] = ids[perm[(k + 1) % perm.size()]];
    ids_b = std::move(shifted);
  }
  const MatrixD mb = sender_messages(b, store_for(stores, b.architecture), ids_b).cast<double>();
  std::vector<double> dist(static_cast<std::size_t>(ma.rows()));
  for (Index i = 0; i < ma.rows(); ++i) {
    const double c =
        std::clamp(cosine_similarity<double>(ma.row(i).transpose(), mb.row(i).transpose()), -1.0, 1.0);
    dist[static_cast<std::size_t>(i)] = 1.0 - c;
  }
  return summarize_distances(std::move(dist));
}

// ---------------------------------------------------------------------------

AccuracyStat eval_with_messages(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                                std::span<const std::uint64_t> ids, std::size_t batch_size, std::uint64_t seed,
                                const MessageTransform& transform) {
  const auto& ss = store_for(stores, s.architecture);
  const auto& rs = store_for(stores, r.architecture);
  detail::check_pairing(s, r, ss, rs);
  if (ids.empty()) throw InsufficientDataError("eval: no ids");
  Rng rng(derive_seed(seed, "message-eval"));
  Rng transform_rng(derive_seed(seed, "message-transform"));
  std::vector<GameBatch> batches;
  if (ids.size() < batch_size) {
    batches.push_back(batch_from_candidates({ids.begin(), ids.end()}));
  } else {
    batches = epoch_batches(ids, batch_size, rng);
  }
  Index correct = 0;
  Index rounds = 0;
  for (const auto& b : batches) {
    const auto tids = detail::target_ids<float>(b);
    MatrixF payload = sender_forward<float>(s, ss.gather<float>(tids), Mode::eval, {}).payload;
    if (transform) transform(payload, transform_rng);
    const MatrixF msg = decoder_forward(r, payload).out;
    VectorF norms;
    const MatrixF mapped = normalize_rows<float>(mapper_forward(r, rs.gather<float>(b.candidate_ids)).out, norms);
    const auto n = static_cast<Index>(b.candidate_ids.size());
    std::uniform_int_distribution<Index> guess(0, n - 1);
    for (Index i = 0; i < msg.rows(); ++i) {
      Index pick = 0;
      if (msg.row(i).squaredNorm() == 0.0f) {
        pick = guess(rng);
      } else {
        (mapped * msg.row(i).transpose()).maxCoeff(&pick);
      }
      correct += pick == b.rounds[static_cast<std::size_t>(i)].target;
      ++rounds;
    }
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(rounds);
  return finish({acc}, rounds, effective_batch(ids, batch_size));
}

AccuracyStat discretize_eval(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                             std::span<const std::uint64_t> ids, DiscretizeMode mode, double threshold,
                             std::size_t batch_size, std::uint64_t seed) {
  const auto theta = static_cast<float>(threshold);
  return eval_with_messages(s, r, stores, ids, batch_size, seed, [&](MatrixF& m, Rng&) {
    if (mode == DiscretizeMode::threshold) {
      m = (m.array() > theta).cast<float>();
      return;
    }
    for (Index i = 0; i < m.rows(); ++i) {
      Index k = 0;
      m.row(i).maxCoeff(&k);
      m.row(i).setZero();
      m(i, k) = 1.0f;
    }
  });
}

AccuracyStat noise_eval(const Sender<float>& s, const Receiver<float>& r, const StoreIndex& stores,
                        std::span<const std::uint64_t> ids, double sigma, std::size_t batch_size,
                        std::uint64_t seed) {
  if (sigma < 0.0) throw ParameterError("noise_eval: sigma must be >= 0");
  if (sigma == 0.0) return eval_with_messages(s, r, stores, ids, batch_size, seed, {});
  return eval_with_messages(s, r, stores, ids, batch_size, seed, [sigma](MatrixF& m, Rng& rng) {
    std::normal_distribution<double> n(0.0, sigma);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] += static_cast<float>(n(rng));
  });
}

PcaReport pca_report(const std::vector<Sender<float>>& senders, const StoreIndex& stores,
                     std::span<const std::uint64_t> ids) {
  if (senders.empty()) throw InsufficientDataError("pca_report: no senders");
  std::vector<MatrixF> parts;
  Index rows = 0;
  for (const auto& s : senders) {
    parts.push_back(sender_messages(s, store_for(stores, s.architecture), ids));
    rows += parts.back().rows();
  }
  MatrixD all(rows, parts.front().cols());
  Index at = 0;
  for (const auto& p : parts) {
    all.middleRows(at, p.rows()) = p.cast<double>();
    at += p.rows();
  }
  PcaReport rep;
  rep.pca = pca(all);
  const double uniform = 1.0 / static_cast<double>(rep.pca.explained_ratio.size());
  rep.dominant_dimension = (rep.pca.explained_ratio.array() > 2.0 * uniform).any();
  MatrixD off = rep.pca.correlation;
  off.diagonal().setZero();
  rep.correlated_dimensions = (off.array().abs() > 0.5).any();
  return rep;
}

StoreIndex blob_views(const EmbeddingStore& blobs, const std::vector<std::pair<std::string, Index>>& architectures,
                      std::vector<EmbeddingStore>& storage) {
  storage.clear();
  storage.reserve(architectures.size());
  for (const auto& [name, dim] : architectures) {
    bool seen = false;
    for (const auto& s : storage) seen = seen || s.architecture() == name;
    if (!seen) storage.push_back(prefix_view(blobs, dim, name));
  }
  return index_stores(storage);
}

AccuracyStat blob_test(const Sender<float>& s, const Receiver<float>& r, const EmbeddingStore& blobs,
                       std::size_t batch_size, std::uint64_t seed) {
  std::vector<EmbeddingStore> storage;
  const auto views = blob_views(blobs, {{s.architecture, s.input_dim()}, {r.architecture, r.input_dim()}}, storage);
  Rng rng(derive_seed(seed, "blob-eval"));
  return eval_accuracy(s, r, views, blobs.image_ids(), batch_size, rng, 1);
}

}  // namespace refcomm
