// Acceptance gate. Prints one PASS/FAIL line per criterion; supporting
// measurements go on indented lines above each verdict and into
// acceptance.json. Pass criterion ids as arguments to run a subset.

#include "refcomm/commands.hpp"
#include "refcomm/config.hpp"
#include "refcomm/eval.hpp"
#include "refcomm/grad_check.hpp"
#include "refcomm/report.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace refcomm;

namespace {

// ---------------------------------------------------------------------------
// Pinned tolerances

constexpr double kFdStep = 1e-5;
constexpr double kFdFloor = 1e-6;
constexpr double kGradRelTol = 1e-4;

constexpr double kChance64Tol = 0.005;
constexpr double kChance32Tol = 0.01;
constexpr int kMinChanceBatches = 50;

constexpr double kHeteroFloor = 0.95;
constexpr double kContinuousMargin = 0.10;

constexpr double kPopulationPairFloor = 0.90;
constexpr double kUniformitySigmas = 3.0;

constexpr double kOodChanceMultiple = 5.0;

constexpr double kLearnerFraction = 0.85;
constexpr double kLearnerThreshold = 0.8;

constexpr double kProbeTransferTol = 0.05;

constexpr double kBlobTol = 0.02;
constexpr double kDiscretizeChanceMultiple = 2.0;
constexpr double kNoiseSigma = 0.05;
constexpr double kNoiseMinDrop = 0.05;
constexpr double kNoiseMonotoneSlack = 0.0025;
constexpr double kPcaSumTol = 1e-5;

constexpr int kReinforceSamples = 100000;
constexpr double kReinforceSigmas = 2.0;

const std::vector<Index> kVocabSizes = {256, 1024, 4096};
const std::vector<std::string> kVocabArchitectures = {"lin64", "tanh128", "lin256"};

constexpr std::uint64_t kSeed = 1;
constexpr std::size_t kBatch = 64;
constexpr std::size_t kSingleClassBatch = 32;
constexpr std::size_t kBlobCount = 2000;

// ---------------------------------------------------------------------------
// Reporting

nlohmann::json g_report = nlohmann::json::object();
int g_failures = 0;

double elapsed() {
  static const auto t0 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void note(const std::string& line) {
  std::printf("    %s\n", line.c_str());
  std::fflush(stdout);
}

struct Checks {
  std::vector<std::pair<std::string, bool>> items;

  bool add(const std::string& what, bool ok) {
    items.emplace_back(what, ok);
    note(std::string(ok ? "[ok] " : "[x]  ") + what);
    return ok;
  }
  bool all() const {
    for (const auto& [w, ok] : items) {
      if (!ok) return false;
    }
    return !items.empty();
  }
};

void verdict(const std::string& id, const Checks& checks, nlohmann::json detail) {
  const bool pass = checks.all();
  if (!pass) ++g_failures;
  int failed = 0;
  for (const auto& [w, ok] : checks.items) failed += ok ? 0 : 1;
  std::printf("%s %-20s %zu checks, %d failed  (t=%.0fs)\n", pass ? "PASS" : "FAIL", id.c_str(),
              checks.items.size(), failed, elapsed());
  std::fflush(stdout);
  nlohmann::json c = nlohmann::json::array();
  for (const auto& [w, ok] : checks.items) c.push_back({{"check", w}, {"ok", ok}});
  detail["checks"] = c;
  detail["pass"] = pass;
  g_report[id] = std::move(detail);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string pts(double fraction) { return fmt::format("{:.2f}%", 100.0 * fraction); }

// ---------------------------------------------------------------------------
// Shared experimental setup. Every trained artifact is built on first use.

struct PairRun {
  Sender<float> sender;
  Receiver<float> receiver;
  RunMetrics metrics;
};

struct PopRun {
  Population pop;
  RunMetrics metrics;
};

enum class Setting { homogeneous, heterogeneous };

class Lab {
 public:
  Lab() : seeds_(derive_seeds(kSeed)) {
    gen_.seed = seeds_.synth;
    data_ = synth_generate(gen_);
    stores_ = index_stores(data_.in_domain);
    ood_ = index_stores(data_.ood);
    split_ = make_splits(data_.in_domain.front(), 0.1, seeds_.split);
    ood_split_ = make_splits(data_.ood.front(), 0.1, seeds_.ood_split);
    Index widest = 0;
    for (const auto& a : gen_.architectures) {
      archs_.push_back(a.name);
      widest = std::max(widest, a.dim);
    }
    blobs_ = synth_blobs(widest, kBlobCount, seeds_.blobs);
    note(fmt::format("data: {} archs, {} in-domain images ({} train / {} test), {} OOD images", archs_.size(),
                     data_.in_domain.front().size(), split_.train.size(), split_.test.size(),
                     data_.ood.front().size()));
  }

  const Seeds& seeds() const { return seeds_; }
  const std::vector<std::string>& archs() const { return archs_; }
  const StoreIndex& stores() const { return stores_; }
  const StoreIndex& ood() const { return ood_; }
  const Split& split() const { return split_; }
  const Split& ood_split() const { return ood_split_; }
  const EmbeddingStore& blobs() const { return blobs_; }
  const std::vector<std::uint64_t>& all_ids() const { return data_.in_domain.front().image_ids(); }
  const std::vector<std::uint64_t>& ood_ids() const { return data_.ood.front().image_ids(); }
  Index dim(const std::string& arch) const { return store_for(stores_, arch).dim(); }

  TrainConfig config(ChannelKind kind, Estimator estimator = Estimator::gumbel) const {
    TrainConfig c;
    c.seed = seeds_.train;
    c.channel.kind = kind;
    c.channel.train_estimator = estimator;
    return c;
  }

  std::vector<std::pair<std::string, std::string>> roster(Setting setting) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : archs_) {
      for (const auto& r : archs_) {
        if ((setting == Setting::homogeneous) == (s == r)) out.emplace_back(s, r);
      }
    }
    return out;
  }

  const std::vector<PairRun>& pairs(ChannelKind kind, Setting setting) {
    const auto key = std::make_pair(kind, setting);
    auto it = pairs_.find(key);
    if (it != pairs_.end()) return it->second;
    std::vector<PairRun> runs;
    const auto cfg = config(kind);
    double t = elapsed();
    for (const auto& [s, r] : roster(setting)) {
      PairRun run{make_sender(s, dim(s), cfg), make_receiver(r, dim(r), cfg), {}};
      run.metrics = train_pair(run.sender, run.receiver, stores_, split_, cfg);
      runs.push_back(std::move(run));
    }
    std::vector<double> acc;
    for (const auto& r : runs) acc.push_back(r.metrics.peak_test_acc);
    note(fmt::format("trained {} {} {} pairs: mean peak {} ({:.0f}s)", runs.size(), kind_name(kind),
                     setting == Setting::homogeneous ? "homogeneous" : "heterogeneous", pts(mean_of(acc)),
                     elapsed() - t));
    return pairs_.emplace(key, std::move(runs)).first->second;
  }

  const PopRun& population(ChannelKind kind, Estimator estimator = Estimator::gumbel) {
    const auto key = std::make_pair(kind, estimator);
    auto it = pops_.find(key);
    if (it != pops_.end()) return it->second;
    const auto cfg = config(kind, estimator);
    double t = elapsed();
    PopRun run{make_population(archs_, archs_, stores_, cfg), {}};
    run.metrics = train_population(run.pop, stores_, split_, cfg);
    note(fmt::format("trained {}x{} {}{} population: mean peak {} at epoch {} ({:.0f}s)", archs_.size(),
                     archs_.size(), kind_name(kind), estimator == Estimator::reinforce ? " (REINFORCE)" : "",
                     pts(run.metrics.peak_test_acc), run.metrics.epochs_to_peak, elapsed() - t));
    return pops_.emplace(key, std::move(run)).first->second;
  }

  static const char* kind_name(ChannelKind k) { return k == ChannelKind::continuous ? "continuous" : "discrete"; }

 private:
  Seeds seeds_;
  SyntheticGenConfig gen_;
  SyntheticData data_;
  StoreIndex stores_;
  StoreIndex ood_;
  Split split_;
  Split ood_split_;
  EmbeddingStore blobs_;
  std::vector<std::string> archs_;
  std::map<std::pair<ChannelKind, Setting>, std::vector<PairRun>> pairs_;
  std::map<std::pair<ChannelKind, Estimator>, PopRun> pops_;
};

/// Every (sender, receiver) of a setting as views into trained agents.
struct AgentPair {
  const Sender<float>* s;
  const Receiver<float>* r;
};

std::vector<AgentPair> agent_pairs(const std::vector<PairRun>& runs) {
  std::vector<AgentPair> out;
  for (const auto& r : runs) out.push_back({&r.sender, &r.receiver});
  return out;
}

std::vector<AgentPair> agent_pairs(const Population& pop) {
  std::vector<AgentPair> out;
  for (const auto& s : pop.senders) {
    for (const auto& r : pop.receivers) out.push_back({&s, &r});
  }
  return out;
}

double mean_peak(const std::vector<PairRun>& runs) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.metrics.peak_test_acc);
  return mean_of(v);
}

double mean_epochs_to_peak(const std::vector<PairRun>& runs) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.metrics.epochs_to_peak);
  return mean_of(v);
}

double mean_over(const std::vector<AgentPair>& pairs, const std::function<double(const AgentPair&)>& f) {
  std::vector<double> v;
  for (const auto& p : pairs) v.push_back(f(p));
  return mean_of(v);
}

struct NamedSetting {
  std::string name;
  std::vector<AgentPair> pairs;
  double accuracy;
};

std::vector<NamedSetting> continuous_settings(Lab& lab) {
  const auto& homo = lab.pairs(ChannelKind::continuous, Setting::homogeneous);
  const auto& hetero = lab.pairs(ChannelKind::continuous, Setting::heterogeneous);
  const auto& pop = lab.population(ChannelKind::continuous);
  return {{"homogeneous", agent_pairs(homo), mean_peak(homo)},
          {"heterogeneous", agent_pairs(hetero), mean_peak(hetero)},
          {"population", agent_pairs(pop.pop), pop.metrics.peak_test_acc}};
}

// ---------------------------------------------------------------------------
// Gradient integrity

MatrixD random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixD m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

VectorD flat(const MatrixD& m) { return Eigen::Map<const VectorD>(m.data(), m.size()); }

double inner(const MatrixD& a, const MatrixD& b) { return (a.array() * b.array()).sum(); }

std::vector<VectorD> grads_of(Receiver<double>& g) {
  std::vector<VectorD> out;
  for (const auto& p : g.parameters()) out.push_back(p.values());
  return out;
}

void criterion_gradients() {
  Checks checks;
  nlohmann::json detail = nlohmann::json::object();
  Rng rng(derive_seed(kSeed, "acceptance:gradients"));
  auto record = [&](const std::string& name, const GradCheckResult& r) {
    detail[name] = {{"max_rel_error", r.max_rel_error}, {"coordinates", r.coordinates}, {"worst", r.worst_param}};
    checks.add(fmt::format("{}: max rel error {:.2e} over {} coordinates (worst {}[{}])", name, r.max_rel_error,
                           r.coordinates, r.worst_param, r.worst_index),
               r.max_rel_error < kGradRelTol && r.coordinates > 0);
  };

  {
    MatrixD w = random_matrix(5, 7, rng), x = random_matrix(9, 7, rng), rp = random_matrix(9, 5, rng);
    VectorD b = flat(random_matrix(5, 1, rng));
    auto f = [&] {
      const auto g = linear_backward<double>(rp, x, w);
      return std::make_pair(inner(rp, linear_forward<double>(w, b, x)),
                            std::vector<VectorD>{flat(g.weight), g.bias, flat(g.input)});
    };
    record("linear", grad_check(f, {param_view<double>("weight", w), param_view<double>("bias", b),
                                    param_view<double>("input", x)}, kFdStep, kFdFloor));
  }
  {
    // keep inputs away from the kink
    MatrixD x = random_matrix(6, 8, rng, 0.1, 1.0);
    for (Index i = 0; i < x.size(); i += 2) x.data()[i] = -x.data()[i];
    MatrixD rp = random_matrix(6, 8, rng);
    auto f = [&] {
      return std::make_pair(inner(rp, MatrixD(relu(x))), std::vector<VectorD>{flat(relu_backward<double>(rp, x))});
    };
    record("relu", grad_check(f, {param_view<double>("input", x)}, kFdStep, kFdFloor));
  }
  {
    VectorD u = flat(random_matrix(7, 1, rng)), v = flat(random_matrix(7, 1, rng));
    auto f = [&] {
      const auto g = cosine_backward<double>(u, v, 3.0);
      return std::make_pair(3.0 * cosine_similarity<double>(u, v), std::vector<VectorD>{g.u, g.v});
    };
    record("cosine", grad_check(f, {param_view<double>("u", u), param_view<double>("v", v)}, kFdStep, kFdFloor));
  }
  {
    MatrixD x = random_matrix(5, 6, rng), rp = random_matrix(5, 6, rng);
    auto f = [&] {
      VectorD norms;
      const MatrixD n = normalize_rows<double>(x, norms);
      return std::make_pair(inner(rp, n), std::vector<VectorD>{flat(normalize_rows_backward<double>(rp, n, norms))});
    };
    record("normalize_rows", grad_check(f, {param_view<double>("input", x)}, kFdStep, kFdFloor));
  }
  {
    MatrixD logits = random_matrix(6, 5, rng, -3.0, 3.0);
    const std::vector<Index> targets = {0, 4, 2, 2, 1, 3};
    auto f = [&] {
      const auto ce = softmax_cross_entropy<double>(logits, targets);
      return std::make_pair(ce.loss, std::vector<VectorD>{flat(ce.grad)});
    };
    record("softmax_cross_entropy", grad_check(f, {param_view<double>("logits", logits)}, kFdStep, kFdFloor));
  }
  {
    MatrixD logits = random_matrix(4, 6, rng, -2.0, 2.0), rp = random_matrix(4, 6, rng);
    const MatrixD noise = sample_gumbel_noise<double>(4, 6, rng);
    auto f = [&] {
      const auto s = gumbel_softmax<double>(logits, noise, 5.0, false);
      return std::make_pair(inner(rp, s.sample), std::vector<VectorD>{flat(gumbel_softmax_backward<double>(s, rp))});
    };
    record("gumbel_softmax", grad_check(f, {param_view<double>("logits", logits)}, kFdStep, kFdFloor));
  }
  {
    MatrixD msgs = random_matrix(5, 4, rng), mapped = random_matrix(7, 4, rng), rp = random_matrix(5, 7, rng);
    auto f = [&] {
      const auto p = select_forward<double>(msgs, mapped, 0.1);
      const auto g = select_backward<double>(p, rp);
      return std::make_pair(inner(rp, p.logits), std::vector<VectorD>{flat(g.messages), flat(g.mapped)});
    };
    record("cosine_select",
           grad_check(f, {param_view<double>("messages", msgs), param_view<double>("mapped", mapped)}, kFdStep,
                      kFdFloor));
  }

  ChannelSpec cont;
  cont.message_dim = 4;
  ChannelSpec disc = cont;
  disc.kind = ChannelKind::discrete;
  disc.vocab_size = 6;
  for (const auto& [name, channel] : {std::make_pair(std::string("sender_continuous"), cont),
                                      std::make_pair(std::string("sender_discrete_relaxed"), disc)}) {
    auto s = Sender<double>::init("s", 7, channel, rng);
    const MatrixD x = random_matrix(5, 7, rng);
    const MatrixD noise = sample_gumbel_noise<double>(5, channel.sender_output_dim(), rng);
    const MatrixD rp = random_matrix(5, channel.discrete() ? channel.vocab_size : channel.message_dim, rng);
    auto f = [&] {
      const auto p = sender_forward<double>(s, x, Mode::train, NoiseSource<double>{&rng, &noise});
      auto g = s.zeros_like();
      sender_backward<double>(s, p, rp, g);
      return std::make_pair(inner(rp, p.payload), std::vector<VectorD>{flat(g.weight), g.bias});
    };
    record(name, grad_check(f, s.parameters(), kFdStep, kFdFloor));
  }
  {
    auto r = Receiver<double>::init("r", 7, 9, cont, 0.1, rng);
    const MatrixD x = random_matrix(6, 7, rng), rp = random_matrix(6, 4, rng);
    auto f = [&] {
      const auto p = mapper_forward<double>(r, x);
      auto g = r.zeros_like();
      mapper_backward<double>(r, p, rp, g);
      return std::make_pair(inner(rp, p.out), grads_of(g));
    };
    record("receiver_mapper", grad_check(f, r.parameters(), kFdStep, kFdFloor));
  }
  for (Index hidden : {Index(0), Index(5)}) {
    ChannelSpec c = disc;
    c.decoder_hidden = hidden;
    auto r = Receiver<double>::init("r", 7, 9, c, 0.1, rng);
    MatrixD payload = softmax_rows<double>(random_matrix(5, c.vocab_size, rng, -2.0, 2.0));
    const MatrixD rp = random_matrix(5, c.message_dim, rng);
    auto params = r.parameters();
    params.push_back(param_view<double>("payload", payload));
    auto f = [&] {
      const auto p = decoder_forward<double>(r, payload);
      auto g = r.zeros_like();
      const MatrixD dp = decoder_backward<double>(r, p, rp, g);
      auto grads = grads_of(g);
      grads.push_back(flat(dp));
      return std::make_pair(inner(rp, p.out), grads);
    };
    record(hidden ? "receiver_decoder_hidden" : "receiver_decoder", grad_check(f, params, kFdStep, kFdFloor));
  }

  // Full game steps on a small synthetic world.
  SyntheticGenConfig g;
  g.num_classes = 6;
  g.images_per_class = 6;
  g.latent_dim = 8;
  g.architectures = {{"lin12", 12, false, false}, {"tanh20", 20, true, false}};
  g.ood_num_classes = 1;
  g.ood_images_per_class = 2;
  g.seed = derive_seed(kSeed, "acceptance:game-world");
  const auto world = synth_generate(g);
  const auto stores = index_stores(world.in_domain);
  std::vector<std::uint64_t> ids(world.in_domain.front().image_ids().begin(),
                                 world.in_domain.front().image_ids().begin() + 10);
  const auto batch = batch_from_candidates(ids);
  for (const auto& [name, kind, hidden] :
       {std::make_tuple(std::string("game_continuous"), ChannelKind::continuous, Index(0)),
        std::make_tuple(std::string("game_discrete_frozen_noise"), ChannelKind::discrete, Index(0)),
        std::make_tuple(std::string("game_discrete_hidden_decoder_frozen_noise"), ChannelKind::discrete, Index(6))}) {
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.receiver_hidden = 16;
    cfg.channel.kind = kind;
    cfg.channel.message_dim = 8;
    cfg.channel.vocab_size = 12;
    cfg.channel.decoder_hidden = hidden;
    auto s = make_sender("lin12", 12, cfg).cast<double>();
    auto r = make_receiver("tanh20", 20, cfg).cast<double>();
    const MatrixD noise = sample_gumbel_noise<double>(10, cfg.channel.vocab_size, rng);
    PlayOptions<double> opt;
    if (kind == ChannelKind::discrete) opt.gumbel_noise = &noise;
    Rng play_rng(5);
    auto params = s.parameters();
    for (const auto& p : r.parameters()) params.push_back(p);
    auto f = [&] {
      auto res = play_batch(s, r, batch, *stores.at("lin12"), *stores.at("tanh20"), Mode::train, play_rng, opt);
      std::vector<VectorD> grads;
      for (const auto& p : res.sender_grad.parameters()) grads.push_back(p.values());
      for (const auto& p : res.receiver_grad.parameters()) grads.push_back(p.values());
      return std::make_pair(res.loss, grads);
    };
    record(name, grad_check(f, params, kFdStep, kFdFloor));
  }
  verdict("gradient-integrity", checks, detail);
}

// ---------------------------------------------------------------------------
// Chance baselines

void criterion_chance(Lab& lab) {
  Checks checks;
  const auto cfg = lab.config(ChannelKind::continuous);
  const auto pop = make_population(lab.archs(), lab.archs(), lab.stores(), cfg);
  const auto ids = lab.all_ids();
  const auto m = eval_matrix(pop, lab.stores(), ids, kBatch, derive_seed(lab.seeds().eval, "acceptance:chance"));
  const std::size_t batches64 = ids.size() / kBatch;
  const double chance64 = chance_level(kBatch);
  note(fmt::format("64-candidate: {} pairs x {} batches, per-pair range {} .. {}", m.acc.size(), batches64,
                   pts(m.min()), pts(m.acc.maxCoeff())));
  checks.add(fmt::format("64-candidate batches per pair {} >= {}", batches64, kMinChanceBatches),
             batches64 >= static_cast<std::size_t>(kMinChanceBatches));
  checks.add(fmt::format("64-candidate mean over pairs {} within {} of chance {}", pts(m.mean()), pts(kChance64Tol),
                         pts(chance64)),
             std::abs(m.mean() - chance64) <= kChance64Tol);

  std::vector<double> sc;
  Index min_rounds = std::numeric_limits<Index>::max();
  for (const auto& [s, r] : agent_pairs(pop)) {
    const auto stat = eval_single_class(*s, *r, lab.stores(), derive_seed(lab.seeds().eval, "acceptance:chance-sc"),
                                        kSingleClassBatch);
    sc.push_back(stat.mean);
    min_rounds = std::min(min_rounds, stat.rounds);
  }
  const auto batches32 = static_cast<std::size_t>(min_rounds) / kSingleClassBatch;
  const double chance32 = chance_level(kSingleClassBatch);
  checks.add(fmt::format("single-class batches per pair {} >= {}", batches32, kMinChanceBatches),
             batches32 >= static_cast<std::size_t>(kMinChanceBatches));
  checks.add(fmt::format("single-class mean over pairs {} within {} of chance {}", pts(mean_of(sc)),
                         pts(kChance32Tol), pts(chance32)),
             std::abs(mean_of(sc) - chance32) <= kChance32Tol);
  verdict("chance-baselines", checks,
          {{"acc64_mean", m.mean()}, {"acc64_min", m.min()}, {"acc64_max", m.acc.maxCoeff()},
           {"single_class_mean", mean_of(sc)}});
}

// ---------------------------------------------------------------------------
// Continuous vs discrete, one-to-one vs population

void criterion_table(Lab& lab) {
  Checks checks;
  const auto& ch = lab.pairs(ChannelKind::continuous, Setting::homogeneous);
  const auto& ce = lab.pairs(ChannelKind::continuous, Setting::heterogeneous);
  const auto& cp = lab.population(ChannelKind::continuous);
  const auto& dh = lab.pairs(ChannelKind::discrete, Setting::homogeneous);
  const auto& de = lab.pairs(ChannelKind::discrete, Setting::heterogeneous);
  const auto& dp = lab.population(ChannelKind::discrete);

  struct Row {
    std::string name;
    double c_acc, d_acc, c_speed, d_speed;
    bool gate_speed;
  };
  const std::vector<Row> rows = {
      {"homogeneous", mean_peak(ch), mean_peak(dh), mean_epochs_to_peak(ch), mean_epochs_to_peak(dh), true},
      {"heterogeneous", mean_peak(ce), mean_peak(de), mean_epochs_to_peak(ce), mean_epochs_to_peak(de), true},
      {"population", cp.metrics.peak_test_acc, dp.metrics.peak_test_acc, double(cp.metrics.epochs_to_peak),
       double(dp.metrics.epochs_to_peak), false},
  };
  std::vector<std::vector<std::string>> table;
  nlohmann::json detail = nlohmann::json::object();
  for (const auto& r : rows) {
    table.push_back({r.name, percent(r.d_acc), fmt::format("{:.2f}", r.d_speed), percent(r.c_acc),
                     fmt::format("{:.2f}", r.c_speed)});
    detail[r.name] = {{"discrete_acc", r.d_acc}, {"discrete_epochs_to_peak", r.d_speed}, {"continuous_acc", r.c_acc},
                      {"continuous_epochs_to_peak", r.c_speed}};
  }
  std::string text = format_table({"setting", "D acc", "D speed", "C acc", "C speed"}, table);
  for (std::size_t p = 0; p < text.size();) {
    const auto e = text.find('\n', p);
    note(text.substr(p, e - p));
    p = e + 1;
  }
  checks.add(fmt::format("continuous homogeneous {} >= heterogeneous {}", pts(rows[0].c_acc), pts(rows[1].c_acc)),
             rows[0].c_acc >= rows[1].c_acc);
  checks.add(fmt::format("continuous heterogeneous {} >= {}", pts(rows[1].c_acc), pts(kHeteroFloor)),
             rows[1].c_acc >= kHeteroFloor);
  for (const auto& r : rows) {
    checks.add(fmt::format("{}: continuous - discrete = {} >= {}", r.name, pts(r.c_acc - r.d_acc),
                           pts(kContinuousMargin)),
               r.c_acc - r.d_acc >= kContinuousMargin);
  }
  for (const auto& r : rows) {
    if (!r.gate_speed) continue;
    checks.add(fmt::format("{}: continuous epochs-to-peak {:.2f} < discrete {:.2f}", r.name, r.c_speed, r.d_speed),
               r.c_speed < r.d_speed);
  }
  verdict("table-ordering", checks, detail);
}

// ---------------------------------------------------------------------------
// Population training and pair sampling

void criterion_population(Lab& lab) {
  Checks checks;
  const auto& run = lab.population(ChannelKind::continuous);
  const auto& m = run.metrics;
  const double min_pair = m.pair_test_acc.minCoeff();
  checks.add(fmt::format("min pairwise test accuracy {} >= {} (mean {})", pts(min_pair), pts(kPopulationPairFloor),
                         pts(m.pair_test_acc.mean())),
             min_pair >= kPopulationPairFloor);
  double total = 0.0;
  std::size_t cells = 0;
  for (const auto& row : m.pair_counts) {
    for (auto c : row) total += static_cast<double>(c), ++cells;
  }
  const double p = 1.0 / static_cast<double>(cells);
  const double expected = total * p;
  const double sigma = std::sqrt(total * p * (1.0 - p));
  double worst = 0.0, chi2 = 0.0;
  for (const auto& row : m.pair_counts) {
    for (auto c : row) {
      const double d = static_cast<double>(c) - expected;
      worst = std::max(worst, std::abs(d) / sigma);
      chi2 += d * d / expected;
    }
  }
  note(fmt::format("{} updates over {} pairs, expected {:.1f} each, chi2 {:.1f} on {} dof", total, cells, expected,
                   chi2, cells - 1));
  checks.add(fmt::format("every pair count within {:.0f} sigma (worst {:.2f})", kUniformitySigmas, worst),
             worst <= kUniformitySigmas);
  // Calibration only: the same test over independent sampler seeds.
  const int calibration_seeds = 2000;
  int within = 0;
  double chi2_sum = 0.0;
  for (int k = 0; k < calibration_seeds; ++k) {
    PairSampler sampler(lab.archs().size(), lab.archs().size(), derive_seed(kSeed, "acceptance:pairing", k));
    std::vector<double> counts(cells, 0.0);
    for (std::uint64_t t = 0; t < static_cast<std::uint64_t>(total); ++t) {
      const auto [s, r] = sampler.next();
      counts[s * lab.archs().size() + r] += 1.0;
    }
    double w = 0.0;
    for (double c : counts) {
      w = std::max(w, std::abs(c - expected) / sigma);
      chi2_sum += (c - expected) * (c - expected) / expected;
    }
    within += w <= kUniformitySigmas ? 1 : 0;
  }
  note(fmt::format("calibration over {} sampler seeds: mean chi2 {:.1f}, all cells within {:.0f} sigma in {:.1f}%",
                   calibration_seeds, chi2_sum / calibration_seeds, kUniformitySigmas,
                   100.0 * within / calibration_seeds));
  verdict("population", checks,
          {{"min_pair_acc", min_pair}, {"mean_pair_acc", m.pair_test_acc.mean()}, {"worst_sigma", worst},
           {"chi2", chi2}});
}

// ---------------------------------------------------------------------------
// Single-class and out-of-domain generalization

void criterion_generalization(Lab& lab) {
  Checks checks;
  nlohmann::json detail = nlohmann::json::object();
  const auto es = lab.seeds().eval;
  const double chance32 = chance_level(kSingleClassBatch);
  const double chance64 = chance_level(kBatch);
  auto ood_mean = [&](const std::vector<AgentPair>& pairs) {
    return mean_over(pairs, [&](const AgentPair& p) {
      return eval_ood(*p.s, *p.r, lab.ood(), lab.ood_ids(), kBatch, derive_seed(es, "acceptance:ood")).mean;
    });
  };
  const auto& dh = lab.pairs(ChannelKind::discrete, Setting::homogeneous);
  const auto& de = lab.pairs(ChannelKind::discrete, Setting::heterogeneous);
  const auto& dp = lab.population(ChannelKind::discrete);
  const std::map<std::string, std::vector<AgentPair>> discrete = {
      {"homogeneous", agent_pairs(dh)}, {"heterogeneous", agent_pairs(de)}, {"population", agent_pairs(dp.pop)}};
  for (const auto& setting : continuous_settings(lab)) {
    const double sc = mean_over(setting.pairs, [&](const AgentPair& p) {
      return eval_single_class(*p.s, *p.r, lab.stores(), derive_seed(es, "acceptance:single-class"),
                               kSingleClassBatch)
          .mean;
    });
    checks.add(fmt::format("{}: chance {} < single-class {} < random-distractor {}", setting.name, pts(chance32),
                           pts(sc), pts(setting.accuracy)),
               chance32 < sc && sc < setting.accuracy);
    const double c_ood = ood_mean(setting.pairs);
    const double d_ood = ood_mean(discrete.at(setting.name));
    checks.add(fmt::format("{}: continuous OOD {} > {:.0f}x chance {}", setting.name, pts(c_ood),
                           kOodChanceMultiple, pts(kOodChanceMultiple * chance64)),
               c_ood > kOodChanceMultiple * chance64);
    checks.add(fmt::format("{}: continuous OOD {} > discrete OOD {}", setting.name, pts(c_ood), pts(d_ood)),
               c_ood > d_ood);
    detail[setting.name] = {{"single_class", sc},
                            {"random_distractor", setting.accuracy},
                            {"continuous_ood", c_ood},
                            {"discrete_ood", d_ood}};
  }
  verdict("generalization", checks, detail);
}

// ---------------------------------------------------------------------------
// Learners joining a frozen community

std::string community_bytes(const Population& p) {
  std::string out;
  for (const auto& s : p.senders) out += encode_checkpoint(s);
  for (const auto& r : p.receivers) out += encode_checkpoint(r);
  return out;
}

void criterion_learner(Lab& lab) {
  Checks checks;
  nlohmann::json detail = nlohmann::json::array();
  const auto cfg = lab.config(ChannelKind::continuous);
  const auto& scratch = lab.population(ChannelKind::continuous).metrics;
  auto epochs_to = [&](const RunMetrics& m) {
    const int e = m.epochs_to(kLearnerThreshold);
    return e < 0 ? cfg.max_epochs + 1 : e;
  };
  const int scratch_epochs = epochs_to(scratch);
  note(fmt::format("from-scratch {}x{} population reaches {} at epoch {}", lab.archs().size(), lab.archs().size(),
                   pts(kLearnerThreshold), scratch.epochs_to(kLearnerThreshold)));
  for (const auto& left_out : lab.archs()) {
    std::vector<std::string> others;
    for (const auto& a : lab.archs()) {
      if (a != left_out) others.push_back(a);
    }
    auto community = make_population(others, others, lab.stores(), cfg);
    const auto donor = train_population(community, lab.stores(), lab.split(), cfg);
    const std::string before = community_bytes(community);
    for (const bool as_sender : {false, true}) {
      RunMetrics m;
      if (as_sender) {
        auto s = make_sender(left_out, lab.dim(left_out), cfg);
        m = train_learner(&s, community, lab.stores(), lab.split(), cfg);
      } else {
        auto r = make_receiver(left_out, lab.dim(left_out), cfg);
        m = train_learner(&r, community, lab.stores(), lab.split(), cfg);
      }
      const std::string tag = fmt::format("{} {}", left_out, as_sender ? "sender" : "receiver");
      checks.add(fmt::format("{} learner: peak {} >= {:.2f} x donor {}", tag, pts(m.peak_test_acc), kLearnerFraction,
                             pts(donor.peak_test_acc)),
                 m.peak_test_acc >= kLearnerFraction * donor.peak_test_acc);
      checks.add(fmt::format("{} learner: epochs to {} = {} < from-scratch {}", tag, pts(kLearnerThreshold),
                             m.epochs_to(kLearnerThreshold), scratch.epochs_to(kLearnerThreshold)),
                 m.epochs_to(kLearnerThreshold) > 0 && epochs_to(m) < scratch_epochs);
      checks.add(fmt::format("{} learner: community checkpoints byte-identical", tag),
                 community_bytes(community) == before);
      detail.push_back({{"architecture", left_out},
                        {"role", as_sender ? "sender" : "receiver"},
                        {"learner_peak", m.peak_test_acc},
                        {"donor_peak", donor.peak_test_acc},
                        {"learner_epochs_to_threshold", m.epochs_to(kLearnerThreshold)},
                        {"scratch_epochs_to_threshold", scratch.epochs_to(kLearnerThreshold)}});
    }
  }
  verdict("learner", checks, {{"cases", detail}});
}

// ---------------------------------------------------------------------------
// Zero-shot probe transfer

void criterion_probe(Lab& lab) {
  Checks checks;
  const auto& senders = lab.population(ChannelKind::continuous).pop.senders;
  ProbeConfig pc;
  pc.seed = lab.seeds().probe;
  const auto& train = lab.ood_split().train;
  const auto& test = lab.ood_split().test;
  const auto rows = probe_table(senders, lab.ood(), train, test, pc);
  double worst = 0.0;
  std::string worst_pair;
  nlohmann::json detail = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < senders.size(); ++j) {
      if (j == i) continue;
      const double gap = std::abs(rows[i].transfer[k++] - rows[i].native);
      if (gap > worst) worst = gap, worst_pair = rows[i].sender + " -> " + senders[j].architecture;
    }
    note(fmt::format("{:9s} native {}  transfer mean {}", rows[i].sender, pts(rows[i].native),
                     pts(rows[i].transfer_mean())));
    detail.push_back(to_json(rows[i]));
  }
  checks.add(fmt::format("max |transfer - native| {} <= {} ({})", pts(worst), pts(kProbeTransferTol), worst_pair),
             worst <= kProbeTransferTol);
  // Self-transfer through the transfer path against direct scoring of the
  // sender's own messages.
  bool exact = true;
  for (std::size_t i = 0; i < senders.size(); ++i) {
    const auto& store = store_for(lab.ood(), senders[i].architecture);
    const auto probe = probe_train(senders[i], store, train, pc);
    std::vector<std::uint32_t> labels;
    for (auto id : test) labels.push_back(store.class_of(id));
    const double direct = probe_accuracy(probe, sender_messages(senders[i], store, test), labels);
    const double self = probe_transfer(probe, senders[i], store, test);
    exact = exact && self == direct && direct == rows[i].native;
  }
  checks.add("self-transfer equals native exactly for every sender", exact);
  verdict("probe-transfer", checks, {{"rows", detail}, {"max_gap", worst}});
}

// ---------------------------------------------------------------------------
// Blobs, discretization, noise, message distances, PCA

void criterion_protocol(Lab& lab) {
  Checks checks;
  nlohmann::json detail = nlohmann::json::object();
  const auto es = lab.seeds().eval;
  const double chance64 = chance_level(kBatch);
  const auto& test = lab.split().test;
  const std::vector<double> sigmas = {0.0, 0.025, 0.05, 0.1, 0.2, 0.4, 10.0};
  const std::vector<double> thresholds = {-0.5, 0.0, 0.5};

  for (const auto& setting : continuous_settings(lab)) {
    nlohmann::json d = nlohmann::json::object();
    double blob_max = 0.0;
    const double blob = mean_over(setting.pairs, [&](const AgentPair& p) {
      const double a = blob_test(*p.s, *p.r, lab.blobs(), kBatch, derive_seed(es, "acceptance:blob")).mean;
      blob_max = std::max(blob_max, a);
      return a;
    });
    checks.add(fmt::format("{}: blob accuracy {} within {} of chance {} (max pair {})", setting.name, pts(blob),
                           pts(kBlobTol), pts(chance64), pts(blob_max)),
               std::abs(blob - chance64) <= kBlobTol);
    d["blob"] = blob;
    d["blob_max_pair"] = blob_max;

    for (double th : thresholds) {
      const double a = mean_over(setting.pairs, [&](const AgentPair& p) {
        return discretize_eval(*p.s, *p.r, lab.stores(), test, DiscretizeMode::threshold, th, kBatch,
                               derive_seed(es, "acceptance:discretize"))
            .mean;
      });
      checks.add(fmt::format("{}: threshold {:+.1f} accuracy {} < {:.0f}x chance", setting.name, th, pts(a),
                             kDiscretizeChanceMultiple),
                 a < kDiscretizeChanceMultiple * chance64);
      d["threshold"][fmt::format("{}", th)] = a;
    }
    const double am = mean_over(setting.pairs, [&](const AgentPair& p) {
      return discretize_eval(*p.s, *p.r, lab.stores(), test, DiscretizeMode::argmax_one_hot, 0.0, kBatch,
                             derive_seed(es, "acceptance:discretize"))
          .mean;
    });
    checks.add(fmt::format("{}: argmax one-hot accuracy {} < {:.0f}x chance", setting.name, pts(am),
                           kDiscretizeChanceMultiple),
               am < kDiscretizeChanceMultiple * chance64);
    d["argmax_one_hot"] = am;

    std::vector<double> curve;
    for (double sg : sigmas) {
      curve.push_back(mean_over(setting.pairs, [&](const AgentPair& p) {
        return noise_eval(*p.s, *p.r, lab.stores(), test, sg, kBatch, derive_seed(es, "acceptance:noise")).mean;
      }));
    }
    std::string shown;
    bool monotone = true;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      shown += fmt::format("{}{}={}", i ? " " : "", sigmas[i], pts(curve[i]));
      if (i > 0 && curve[i] > curve[i - 1] + kNoiseMonotoneSlack) monotone = false;
    }
    note(setting.name + " noise curve: " + shown);
    const double drop = curve[0] - curve[2];
    checks.add(fmt::format("{}: sigma {} drops accuracy by {} >= {}", setting.name, kNoiseSigma, pts(drop),
                           pts(kNoiseMinDrop)),
               drop >= kNoiseMinDrop);
    checks.add(fmt::format("{}: accuracy non-increasing in sigma (slack {})", setting.name, pts(kNoiseMonotoneSlack)),
               monotone);
    d["noise"] = {{"sigmas", sigmas}, {"accuracy", curve}};
    detail[setting.name] = d;
  }

  // Message distances on training images: population senders against each
  // other, independently trained one-to-one senders of different
  // architectures, and population senders on mismatched images.
  const auto& pop = lab.population(ChannelKind::continuous).pop.senders;
  const auto& hetero = lab.pairs(ChannelKind::continuous, Setting::heterogeneous);
  std::map<std::string, const Sender<float>*> one_to_one;
  for (const auto& r : hetero) one_to_one.emplace(r.sender.architecture, &r.sender);
  const auto& ids = lab.split().train;
  std::vector<double> within, across, baseline;
  auto append = [](std::vector<double>& to, const DistanceDistribution& d) {
    to.insert(to.end(), d.values.begin(), d.values.end());
  };
  for (std::size_t i = 0; i < pop.size(); ++i) {
    for (std::size_t j = i + 1; j < pop.size(); ++j) {
      append(within, message_distances(pop[i], pop[j], lab.stores(), ids));
      append(across, message_distances(*one_to_one.at(pop[i].architecture), *one_to_one.at(pop[j].architecture),
                                       lab.stores(), ids));
      append(baseline,
             message_distances(pop[i], pop[j], lab.stores(), ids, true, derive_seed(es, "acceptance:distances")));
    }
  }
  const auto dw = summarize_distances(within);
  const auto da = summarize_distances(across);
  const auto db = summarize_distances(baseline);
  for (const auto& [name, d] : {std::make_pair("population", &dw), std::make_pair("one-to-one", &da),
                                std::make_pair("mismatched", &db)}) {
    note(fmt::format("{:10s} distances: q1 {:.4f} median {:.4f} q3 {:.4f} mean {:.4f}", name, d->q1, d->median,
                     d->q3, d->mean));
  }
  checks.add(fmt::format("population q3 {:.4f} < one-to-one q1 {:.4f}", dw.q3, da.q1), dw.q3 < da.q1);
  checks.add(fmt::format("one-to-one q3 {:.4f} < mismatched q1 {:.4f}", da.q3, db.q1), da.q3 < db.q1);
  detail["distances"] = {{"population", to_json(dw)}, {"one_to_one", to_json(da)}, {"mismatched", to_json(db)}};

  const auto pca = pca_report(pop, lab.stores(), test);
  const double ratio_sum = pca.pca.explained_ratio.sum();
  std::string top;
  for (Index i = 0; i < std::min<Index>(4, pca.pca.explained_ratio.size()); ++i) {
    top += fmt::format("{}{:.3f}", i ? " " : "", pca.pca.explained_ratio[i]);
  }
  note(fmt::format("PCA over {} messages: leading ratios {}; dominant {}, correlated {}", pca.pca.samples, top,
                   pca.dominant_dimension, pca.correlated_dimensions));
  checks.add(fmt::format("PCA explained ratios sum to 1 within {:.0e} (|dev| {:.2e})", kPcaSumTol,
                         std::abs(ratio_sum - 1.0)),
             std::abs(ratio_sum - 1.0) <= kPcaSumTol &&
                 pca.pca.explained_ratio.size() == pop.front().channel.message_dim);
  detail["pca"] = to_json(pca);
  verdict("protocol-analyses", checks, detail);
}

// ---------------------------------------------------------------------------
// REINFORCE

MatrixD naive_linear(const MatrixD& w, const VectorD& b, const MatrixD& x) {
  MatrixD out(x.rows(), w.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index o = 0; o < w.rows(); ++o) {
      double acc = b[o];
      for (Index k = 0; k < w.cols(); ++k) acc += w(o, k) * x(i, k);
      out(i, o) = acc;
    }
  }
  return out;
}

// Three rounds, three symbols: the expected sender gradient is a finite sum.
struct ReinforceToy {
  EmbeddingStore sender_store{"s", 2};
  EmbeddingStore receiver_store{"r", 3};
  Sender<double> sender;
  Receiver<double> receiver;
  GameBatch batch;

  explicit ReinforceToy(std::uint64_t seed) {
    Rng rng(seed);
    ChannelSpec c;
    c.kind = ChannelKind::discrete;
    c.vocab_size = 3;
    c.message_dim = 4;
    c.train_estimator = Estimator::reinforce;
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (std::uint64_t id = 0; id < 3; ++id) {
      const std::vector<float> a{n(rng), n(rng)};
      const std::vector<float> b{n(rng), n(rng), n(rng)};
      sender_store.add(id, 0, a);
      receiver_store.add(id, 0, b);
    }
    sender = Sender<double>::init("s", 2, c, rng);
    receiver = Receiver<double>::init("r", 3, 8, c, 0.1, rng);
    batch = batch_from_candidates({0, 1, 2});
  }

  double reward(Index round, Index symbol) const {
    const MatrixD hidden =
        naive_linear(receiver.w1, receiver.b1, receiver_store.gather<double>(batch.candidate_ids)).cwiseMax(0.0);
    const MatrixD mapped = naive_linear(receiver.w2, receiver.b2, hidden);
    const VectorD msg = receiver.decoder.row(symbol).transpose();
    Index best = 0;
    double best_cos = -2.0;
    for (Index j = 0; j < mapped.rows(); ++j) {
      const double cos = msg.dot(mapped.row(j)) / (msg.norm() * mapped.row(j).norm());
      if (cos > best_cos) best_cos = cos, best = j;
    }
    return best == batch.rounds[static_cast<std::size_t>(round)].target ? 1.0 : 0.0;
  }

  VectorD exact_gradient() const {
    const MatrixD x = sender_store.gather<double>(batch.candidate_ids);
    MatrixD gw = MatrixD::Zero(3, 2);
    VectorD gb = VectorD::Zero(3);
    for (Index i = 0; i < 3; ++i) {
      const VectorD logits = sender.weight * x.row(i).transpose() + sender.bias;
      VectorD p = (logits.array() - logits.maxCoeff()).exp();
      p /= p.sum();
      VectorD g = VectorD::Zero(3);
      for (Index k = 0; k < 3; ++k) {
        VectorD ek = VectorD::Zero(3);
        ek[k] = 1.0;
        g += p[k] * reward(i, k) * (ek - p);
      }
      gw -= g * x.row(i) / 3.0;
      gb -= g / 3.0;
    }
    VectorD out(9);
    out << Eigen::Map<const VectorD>(gw.data(), 6), gb;
    return out;
  }

  bool informative() const {
    for (Index i = 0; i < 3; ++i) {
      if (reward(i, 0) != reward(i, 1) || reward(i, 1) != reward(i, 2)) return true;
    }
    return false;
  }
};

// Wilson-Hilferty chi-square quantile at the coverage of +-z standard errors.
double chi2_quantile(int dof, double z) {
  const double k = dof;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

void criterion_reinforce(Lab& lab) {
  Checks checks;
  nlohmann::json detail = nlohmann::json::object();
  std::uint64_t seed = derive_seed(kSeed, "acceptance:reinforce-toy");
  while (!ReinforceToy(seed).informative()) ++seed;
  const ReinforceToy toy(seed);
  const VectorD exact = toy.exact_gradient();
  for (BaselineKind baseline : {BaselineKind::none, BaselineKind::batch_mean}) {
    const std::string name = baseline == BaselineKind::none ? "no baseline" : "batch-mean baseline";
    PlayOptions<double> opt;
    opt.reinforce.baseline = baseline;
    Rng rng(derive_seed(seed, name));
    VectorD sum = VectorD::Zero(9);
    MatrixD outer = MatrixD::Zero(9, 9);
    for (int t = 0; t < kReinforceSamples; ++t) {
      const auto res = play_batch(toy.sender, toy.receiver, toy.batch, toy.sender_store, toy.receiver_store,
                                  Mode::train, rng, opt);
      VectorD g(9);
      g << Eigen::Map<const VectorD>(res.sender_grad.weight.data(), 6), res.sender_grad.bias;
      sum += g;
      outer += g * g.transpose();
    }
    const double n = kReinforceSamples;
    const VectorD mean = sum / n;
    const MatrixD cov = (outer / n - mean * mean.transpose()) * (n / (n - 1.0));
    const MatrixD cov_mean = cov / n;
    // The estimator's coordinates sum to zero over symbols, so the
    // covariance is singular; test in its range and require the remainder
    // to vanish.
    Eigen::SelfAdjointEigenSolver<MatrixD> eig(cov_mean);
    const double cutoff = eig.eigenvalues().maxCoeff() * 1e-9;
    const VectorD diff = mean - exact;
    double mahalanobis = 0.0, null_residual = 0.0;
    int rank = 0;
    for (Index k = 0; k < 9; ++k) {
      const double proj = eig.eigenvectors().col(k).dot(diff);
      if (eig.eigenvalues()[k] > cutoff) {
        mahalanobis += proj * proj / eig.eigenvalues()[k];
        ++rank;
      } else {
        null_residual = std::max(null_residual, std::abs(proj));
      }
    }
    double max_z = 0.0;
    for (Index k = 0; k < 9; ++k) {
      const double se = std::sqrt(cov_mean(k, k));
      if (se > 0.0) max_z = std::max(max_z, std::abs(diff[k]) / se);
    }
    const double limit = chi2_quantile(rank, kReinforceSigmas);
    checks.add(fmt::format("{}: joint squared SE distance {:.2f} <= {:.2f} ({} dof, {:.0f}-SE coverage); max "
                           "coordinate |z| {:.2f}; null-space residual {:.1e}",
                           name, mahalanobis, limit, rank, kReinforceSigmas, max_z, null_residual),
               mahalanobis <= limit && null_residual < 1e-12 && rank > 0);
    detail[name] = {{"mahalanobis", mahalanobis}, {"limit", limit}, {"rank", rank}, {"max_z", max_z}};
  }
  const auto& rf = lab.population(ChannelKind::discrete, Estimator::reinforce);
  const auto& gs = lab.population(ChannelKind::discrete);
  checks.add(fmt::format("REINFORCE population {} <= Gumbel population {}", pts(rf.metrics.peak_test_acc),
                         pts(gs.metrics.peak_test_acc)),
             rf.metrics.peak_test_acc <= gs.metrics.peak_test_acc);
  detail["reinforce_acc"] = rf.metrics.peak_test_acc;
  detail["gumbel_acc"] = gs.metrics.peak_test_acc;
  verdict("reinforce", checks, detail);
}

// ---------------------------------------------------------------------------
// Vocabulary sweep

void criterion_vocab(Lab& lab) {
  Checks checks;
  const auto cfg = lab.config(ChannelKind::discrete);
  const auto rows = vocab_sweep(cfg, kVocabSizes, kVocabArchitectures, lab.stores(), lab.split(), lab.ood(),
                                lab.ood_ids());
  const auto ccfg = lab.config(ChannelKind::continuous);
  auto cont = make_population(kVocabArchitectures, kVocabArchitectures, lab.stores(), ccfg);
  const double c_acc = train_population(cont, lab.stores(), lab.split(), ccfg).peak_test_acc;
  nlohmann::json detail = nlohmann::json::array();
  bool climbing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    note(fmt::format("vocab {:5d}: in-domain {}  OOD {}  epochs to peak {}", rows[i].vocab_size,
                     pts(rows[i].in_domain_acc), pts(rows[i].ood_acc), rows[i].epochs_to_peak));
    if (i > 0 && rows[i].in_domain_acc < rows[i - 1].in_domain_acc) climbing = false;
    checks.add(fmt::format("vocab {}: {} below continuous {}", rows[i].vocab_size, pts(rows[i].in_domain_acc),
                           pts(c_acc)),
               rows[i].in_domain_acc < c_acc);
    detail.push_back(to_json(rows[i]));
  }
  checks.add("mean accuracy non-decreasing from the smallest to the largest vocabulary", climbing);
  verdict("vocab-sweep", checks, {{"rows", detail}, {"continuous", c_acc}});
}

// ---------------------------------------------------------------------------
// Determinism

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(REFCOMM_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    if (rel.ends_with("timing.json") || rel.ends_with(".log")) continue;
    files[rel] = read_text(e.path());
  }
  return files;
}

void criterion_determinism(Lab& lab) {
  Checks checks;
  // Library level: a pair and an evaluation replayed from scratch.
  const auto cfg = lab.config(ChannelKind::continuous);
  std::vector<std::string> metrics, ckpts;
  for (int rep = 0; rep < 2; ++rep) {
    auto s = make_sender("lin64", lab.dim("lin64"), cfg);
    auto r = make_receiver("tanh384", lab.dim("tanh384"), cfg);
    const auto m = train_pair(s, r, lab.stores(), lab.split(), cfg);
    Population p{{s}, {r}};
    const auto e = eval_matrix(p, lab.stores(), lab.split().test, kBatch, lab.seeds().eval);
    metrics.push_back(metrics_jsonl(m) + to_json(m).dump() + matrix_csv(e));
    ckpts.push_back(encode_checkpoint(s) + encode_checkpoint(r));
  }
  checks.add("library: train_pair metrics and evaluation identical on replay", metrics[0] == metrics[1]);
  checks.add("library: train_pair checkpoints identical on replay", ckpts[0] == ckpts[1]);

  // Command level: every subcommand rerun over its own outputs.
  const fs::path work = fs::path(REFCOMM_ACCEPTANCE_WORKDIR) / "determinism";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path cfg_file = work / "run.cfg";
  write_text(cfg_file,
             "seed = 5\n"
             "synth.num_classes = 16\n"
             "synth.images_per_class = 40\n"
             "synth.latent_dim = 16\n"
             "synth.architectures = a:16, b:32:tanh, c:24\n"
             "synth.ood_num_classes = 4\n"
             "synth.ood_images_per_class = 40\n"
             "synth.blob_count = 256\n"
             "train.batch_size = 32\n"
             "train.max_epochs = 3\n"
             "train.receiver_hidden = 32\n"
             "population.senders = a, b\n"
             "population.receivers = a, b\n"
             "pair.sender = a\n"
             "pair.receiver = c\n"
             "learner.architecture = c\n"
             "eval.single_class_size = 16\n"
             "analyze.vocab_sizes = 8, 16\n"
             "probe.epochs = 20\n");
  const fs::path out = work / "out";
  const std::string base = "--config " + cfg_file.string();
  const std::string stores = " --set data=" + (out / "stores").string();
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"synth", "synth " + base + " --out " + out.string()},
      {"train population", "train population " + base + " --out " + out.string()},
      {"train pair", "train pair " + base + " --out " + (work / "pair").string() + stores},
      {"train learner", "train learner " + base + " --out " + (work / "learner").string() + stores +
                            " --set learner.community=" + (out / "checkpoints").string()},
      {"eval", "eval " + base + " --out " + out.string()},
      {"probe", "probe " + base + " --out " + out.string()},
      {"analyze vocab", "analyze vocab " + base + " --out " + (work / "vocab").string() + stores},
      {"analyze reinforce", "analyze reinforce " + base + " --out " + (work / "reinforce").string() + stores},
  };
  std::vector<std::map<std::string, std::string>> snaps;
  bool ran = true;
  for (int rep = 0; rep < 2; ++rep) {
    for (const auto& [name, args] : steps) {
      const int code = run_cli(args + (rep ? " --force" : ""), work / "step.log");
      if (code != 0) {
        ran = false;
        note(fmt::format("'{}' exited {}: {}", name, code, read_text(work / "step.log")));
      }
    }
    snaps.push_back(snapshot(work));
  }
  checks.add(fmt::format("CLI: {} subcommands ran twice with exit 0", steps.size()), ran);
  std::vector<std::string> differing;
  for (const auto& [file, bytes] : snaps[0]) {
    auto it = snaps[1].find(file);
    if (it == snaps[1].end() || it->second != bytes) differing.push_back(file);
  }
  note(fmt::format("CLI: compared {} output files (timing files excluded)", snaps[0].size()));
  for (const auto& f : differing) note("differs: " + f);
  checks.add("CLI: every metrics, report, store and checkpoint file bit-identical on rerun",
             differing.empty() && snaps[0].size() == snaps[1].size() && snaps[0].size() > 20);
  verdict("determinism", checks, {{"files_compared", snaps[0].size()}, {"differing", differing}});
}

}  // namespace

int main(int argc, char** argv) {
  elapsed();
  if (!std::getenv("REFCOMM_LOG")) spdlog::set_level(spdlog::level::warn);
  const std::vector<std::string> order = {"gradient-integrity", "chance-baselines", "table-ordering",
                                          "population",         "generalization",   "learner",
                                          "probe-transfer",     "protocol-analyses", "reinforce",
                                          "vocab-sweep",        "determinism"};
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::find(order.begin(), order.end(), w) == order.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", w.c_str());
      return 2;
    }
  }
  auto want = [&](const std::string& id) { return wanted.empty() || wanted.count(id) != 0; };

  std::unique_ptr<Lab> lab;
  auto shared = [&]() -> Lab& {
    if (!lab) lab = std::make_unique<Lab>();
    return *lab;
  };
  const std::map<std::string, std::function<void()>> criteria = {
      {"gradient-integrity", [] { criterion_gradients(); }},
      {"chance-baselines", [&] { criterion_chance(shared()); }},
      {"table-ordering", [&] { criterion_table(shared()); }},
      {"population", [&] { criterion_population(shared()); }},
      {"generalization", [&] { criterion_generalization(shared()); }},
      {"learner", [&] { criterion_learner(shared()); }},
      {"probe-transfer", [&] { criterion_probe(shared()); }},
      {"protocol-analyses", [&] { criterion_protocol(shared()); }},
      {"reinforce", [&] { criterion_reinforce(shared()); }},
      {"vocab-sweep", [&] { criterion_vocab(shared()); }},
      {"determinism", [&] { criterion_determinism(shared()); }},
  };
  for (const auto& id : order) {
    if (!want(id)) continue;
    try {
      criteria.at(id)();
    } catch (const std::exception& e) {
      Checks c;
      c.add(std::string("raised: ") + e.what(), false);
      verdict(id, c, nlohmann::json::object());
    }
  }
  const fs::path report = fs::path(REFCOMM_ACCEPTANCE_WORKDIR) / "acceptance.json";
  fs::create_directories(report.parent_path());
  write_json(report, g_report);
  std::printf("%d of %zu criteria failed; details in %s\n", g_failures, g_report.size(), report.c_str());
  return g_failures == 0 ? 0 : 1;
}
