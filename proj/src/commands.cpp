#include "refcomm/commands.hpp"

#include "refcomm/report.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

namespace refcomm {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const InvariantViolation*>(&e)) return kExitInvariant;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const InsufficientDataError*>(&e) ||
      dynamic_cast<const IndexError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const DegenerateInputError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitData;
  }
  return kExitOther;
}

fs::path store_file(const fs::path& dir, const std::string& architecture) { return dir / (architecture + ".emb"); }
fs::path ood_store_file(const fs::path& dir, const std::string& architecture) {
  return dir / ("ood-" + architecture + ".emb");
}
fs::path blob_store_file(const fs::path& dir) { return dir / "blobs.emb"; }

LoadedStores load_stores(const fs::path& dir, const std::vector<std::string>& order) {
  if (!fs::is_directory(dir)) throw InsufficientDataError("store directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".emb") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  LoadedStores out;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    if (stem == "blobs") {
      out.blobs = read_store(f);
    } else if (stem.rfind("ood-", 0) == 0) {
      out.ood.push_back(read_store(f));
    } else {
      out.in_domain.push_back(read_store(f));
    }
  }
  if (out.in_domain.empty()) throw InsufficientDataError("no embedding stores in " + dir.string());
  auto rank = [&](const EmbeddingStore& s) {
    auto it = std::find(order.begin(), order.end(), s.architecture());
    return std::make_pair(it - order.begin(), s.architecture());
  };
  auto by_rank = [&](const EmbeddingStore& a, const EmbeddingStore& b) { return rank(a) < rank(b); };
  std::sort(out.in_domain.begin(), out.in_domain.end(), by_rank);
  std::sort(out.ood.begin(), out.ood.end(), by_rank);
  const auto& ids = out.in_domain.front().image_ids();
  for (const auto& s : out.in_domain) {
    if (s.image_ids() != ids) {
      throw InsufficientDataError("store '" + s.architecture() + "' does not cover the same images as '" +
                                  out.in_domain.front().architecture() + "'");
    }
  }
  return out;
}

void write_population(const Population& pop, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json roster_json = {{"senders", nlohmann::json::array()}, {"receivers", nlohmann::json::array()}};
  for (const auto& s : pop.senders) {
    write_checkpoint(s, dir / ("sender-" + s.architecture + ".rck"));
    roster_json["senders"].push_back(s.architecture);
  }
  for (const auto& r : pop.receivers) {
    write_checkpoint(r, dir / ("receiver-" + r.architecture + ".rck"));
    roster_json["receivers"].push_back(r.architecture);
  }
  write_json(dir / "roster.json", roster_json);
}

Population read_population(const fs::path& dir) {
  const fs::path roster_path = dir / "roster.json";
  if (!fs::exists(roster_path)) {
    throw InsufficientDataError("no checkpoints in " + dir.string() + " (missing roster.json)");
  }
  const auto j = nlohmann::json::parse(read_text(roster_path));
  Population pop;
  for (const auto& name : j.at("senders")) {
    const fs::path p = dir / ("sender-" + name.get<std::string>() + ".rck");
    if (!fs::exists(p)) throw InsufficientDataError("missing checkpoint " + p.string());
    pop.senders.push_back(read_sender_checkpoint(p));
  }
  for (const auto& name : j.at("receivers")) {
    const fs::path p = dir / ("receiver-" + name.get<std::string>() + ".rck");
    if (!fs::exists(p)) throw InsufficientDataError("missing checkpoint " + p.string());
    pop.receivers.push_back(read_receiver_checkpoint(p));
  }
  return pop;
}

std::vector<std::string> roster(const std::vector<std::string>& requested, const std::vector<EmbeddingStore>& stores) {
  std::vector<std::string> out;
  if (requested.empty()) {
    for (const auto& s : stores) out.push_back(s.architecture());
    return out;
  }
  for (const auto& name : requested) {
    const bool known = std::any_of(stores.begin(), stores.end(), [&](const auto& s) { return s.architecture() == name; });
    if (!known) throw ConfigError("roster names unknown architecture '" + name + "'");
    out.push_back(name);
  }
  return out;
}

namespace {

std::vector<std::string> arch_order(const ExperimentConfig& c) {
  std::vector<std::string> names;
  for (const auto& a : c.synth.architectures) names.push_back(a.name);
  return names;
}

void refuse_existing(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) {
    throw ConfigError(p.string() + " already exists; pass --force to overwrite");
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Fn>
void run_jobs(std::size_t count, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, count); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Context {
  LoadedStores data;
  StoreIndex stores;
  StoreIndex ood;
  Split split;
  Split ood_split;
  Seeds seeds;
  TrainConfig train;
};

Context make_context(const ExperimentConfig& c) {
  Context ctx;
  ctx.seeds = derive_seeds(c.seed);
  ctx.data = load_stores(c.data_dir(), arch_order(c));
  ctx.stores = index_stores(ctx.data.in_domain);
  ctx.ood = index_stores(ctx.data.ood);
  ctx.split = make_splits(ctx.data.in_domain.front(), c.test_fraction, ctx.seeds.split);
  if (!ctx.data.ood.empty()) {
    ctx.ood_split = make_splits(ctx.data.ood.front(), c.ood_test_fraction, ctx.seeds.ood_split);
  }
  ctx.train = c.train;
  ctx.train.seed = ctx.seeds.train;
  return ctx;
}

void write_run(const RunMetrics& m, const Population& pop, const fs::path& out, const std::string& resolved) {
  write_population(pop, out / "checkpoints");
  write_text(out / "metrics.jsonl", metrics_jsonl(m));
  write_json(out / "summary.json", to_json(m));
  write_json(out / "timing.json", {{"wall_seconds", m.wall_seconds}});
  write_text(out / "train.config", resolved);
  std::cout << "peak test accuracy " << percent(m.peak_test_acc) << "% at epoch " << m.epochs_to_peak << " ("
            << m.epochs.size() << " epochs run)\n";
}

}  // namespace

void run_synth(const ExperimentConfig& config, bool force) {
  config.validate();
  const fs::path dir = config.data_dir();
  refuse_existing(dir, force);
  const Seeds seeds = derive_seeds(config.seed);
  SyntheticGenConfig g = config.synth;
  g.seed = seeds.synth;
  const auto data = synth_generate(g);
  fs::create_directories(dir);
  for (const auto& s : data.in_domain) write_store(s, store_file(dir, s.architecture()));
  for (const auto& s : data.ood) write_store(s, ood_store_file(dir, s.architecture()));
  Index max_dim = 0;
  for (const auto& a : g.architectures) max_dim = std::max(max_dim, a.dim);
  write_store(synth_blobs(max_dim, config.blob_count, seeds.blobs), blob_store_file(dir));
  write_text(config.out / "synth.config", resolved_config(config));
  spdlog::info("wrote {} in-domain, {} OOD and 1 blob store to {}", data.in_domain.size(), data.ood.size(),
               dir.string());
}

void run_train(const ExperimentConfig& config, TrainMode mode, bool force) {
  config.validate();
  refuse_existing(config.out / "checkpoints", force);
  Context ctx = make_context(config);
  const std::string resolved = resolved_config(config);
  const auto on_epoch = [](const EpochRecord& e) {
    spdlog::info("epoch {:3d}  loss {:.4f}  train {:.4f}  test {:.4f}", e.epoch, e.train_loss, e.train_acc,
                 e.test_acc);
  };

  if (mode == TrainMode::pair) {
    auto s = make_sender(config.pair_sender, store_for(ctx.stores, config.pair_sender).dim(), ctx.train);
    auto r = make_receiver(config.pair_receiver, store_for(ctx.stores, config.pair_receiver).dim(), ctx.train);
    const auto m = train_pair(s, r, ctx.stores, ctx.split, ctx.train, on_epoch);
    Population pop;
    pop.senders.push_back(std::move(s));
    pop.receivers.push_back(std::move(r));
    write_run(m, pop, config.out, resolved);
    return;
  }
  if (mode == TrainMode::population) {
    Population pop = make_population(roster(config.senders, ctx.data.in_domain),
                                     roster(config.receivers, ctx.data.in_domain), ctx.stores, ctx.train);
    const auto m = train_population(pop, ctx.stores, ctx.split, ctx.train, on_epoch);
    write_run(m, pop, config.out, resolved);
    return;
  }

  if (config.community.empty()) throw ConfigError("learner mode needs learner.community");
  if (config.learner_architecture.empty()) throw ConfigError("learner mode needs learner.architecture");
  Population community = read_population(config.community);
  const Index dim = store_for(ctx.stores, config.learner_architecture).dim();
  RunMetrics m;
  Population combined;
  if (config.learner_role == LearnerRole::sender) {
    auto s = make_sender(config.learner_architecture, dim, ctx.train);
    m = train_learner(&s, community, ctx.stores, ctx.split, ctx.train, on_epoch);
    combined = community;
    combined.senders.push_back(std::move(s));
  } else {
    auto r = make_receiver(config.learner_architecture, dim, ctx.train);
    m = train_learner(&r, community, ctx.stores, ctx.split, ctx.train, on_epoch);
    combined = community;
    combined.receivers.push_back(std::move(r));
  }
  write_run(m, combined, config.out, resolved);
}

namespace {

template <typename Fn>
AccuracyMatrix pair_grid(const Population& pop, Fn&& fn) {
  AccuracyMatrix m;
  for (const auto& s : pop.senders) m.senders.push_back(s.architecture);
  for (const auto& r : pop.receivers) m.receivers.push_back(r.architecture);
  m.acc.resize(static_cast<Index>(pop.senders.size()), static_cast<Index>(pop.receivers.size()));
  for (std::size_t i = 0; i < pop.senders.size(); ++i) {
    for (std::size_t j = 0; j < pop.receivers.size(); ++j) {
      m.acc(static_cast<Index>(i), static_cast<Index>(j)) = fn(pop.senders[i], pop.receivers[j]);
    }
  }
  return m;
}

std::string matrix_table(const std::string& title, const AccuracyMatrix& m) {
  std::vector<std::string> header = {"sender \\ receiver"};
  header.insert(header.end(), m.receivers.begin(), m.receivers.end());
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < m.senders.size(); ++i) {
    std::vector<std::string> row = {m.senders[i]};
    for (std::size_t j = 0; j < m.receivers.size(); ++j) {
      row.push_back(percent(m.acc(static_cast<Index>(i), static_cast<Index>(j))));
    }
    rows.push_back(std::move(row));
  }
  return title + " (accuracy %, min " + percent(m.min()) + ", mean " + percent(m.mean()) + ")\n" +
         format_table(header, rows) + "\n";
}

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

bool wants(const ExperimentConfig& c, const std::string& suite) {
  return std::find(c.suites.begin(), c.suites.end(), "all") != c.suites.end() ||
         std::find(c.suites.begin(), c.suites.end(), suite) != c.suites.end();
}

const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> s = {"all", "matrix", "single-class", "ood", "blob",
                                             "discretize", "noise", "distances", "pca"};
  return s;
}

}  // namespace

void run_eval(const ExperimentConfig& config, bool force) {
  config.validate();
  for (const auto& s : config.suites) {
    if (std::find(known_suites().begin(), known_suites().end(), s) == known_suites().end()) {
      throw ConfigError("unknown eval suite '" + s + "'");
    }
  }
  const fs::path dir = config.out / "eval";
  refuse_existing(dir, force);
  Context ctx = make_context(config);
  const Population pop = read_population(config.checkpoint_dir());
  if (wants(config, "ood") && config.suites != std::vector<std::string>{"all"} && ctx.data.ood.empty()) {
    throw InsufficientDataError("suite 'ood' needs OOD stores (ood-<arch>.emb) in " + config.data_dir().string());
  }
  if (wants(config, "blob") && config.suites != std::vector<std::string>{"all"} && !ctx.data.blobs) {
    throw InsufficientDataError("suite 'blob' needs " + blob_store_file(config.data_dir()).string());
  }
  const std::uint64_t es = ctx.seeds.eval;
  const std::size_t bs = ctx.train.batch_size;
  const auto& test = ctx.split.test;
  nlohmann::json report = nlohmann::json::object();
  std::string text;

  if (wants(config, "matrix")) {
    const auto m = eval_matrix(pop, ctx.stores, test, bs, es, config.eval_repeats);
    write_text(dir / "matrix.csv", matrix_csv(m));
    report["matrix"] = to_json(m);
    text += matrix_table("Test accuracy", m);
  }
  if (wants(config, "single-class")) {
    const auto m = pair_grid(pop, [&](const auto& s, const auto& r) {
      return eval_single_class(s, r, ctx.stores, es, config.single_class_size).mean;
    });
    write_text(dir / "single_class.csv", matrix_csv(m));
    report["single_class"] = to_json(m);
    report["single_class"]["chance"] = chance_level(config.single_class_size);
    text += matrix_table("Single-class accuracy", m);
  }
  if (wants(config, "ood")) {
    if (ctx.data.ood.empty()) {
      report["ood"] = {{"skipped", "no OOD stores"}};
    } else {
      const auto m = pair_grid(pop, [&](const auto& s, const auto& r) {
        return eval_ood(s, r, ctx.ood, ctx.ood_split.train, bs, es).mean;
      });
      write_text(dir / "ood.csv", matrix_csv(m));
      report["ood"] = to_json(m);
      text += matrix_table("OOD accuracy", m);
    }
  }
  if (wants(config, "blob")) {
    if (!ctx.data.blobs) {
      report["blob"] = {{"skipped", "no blob store"}};
    } else {
      const auto m = pair_grid(pop, [&](const auto& s, const auto& r) {
        return blob_test(s, r, *ctx.data.blobs, bs, es).mean;
      });
      report["blob"] = to_json(m);
      report["blob"]["chance"] = chance_level(bs);
      text += matrix_table("Gaussian-blob accuracy", m);
    }
  }
  if (wants(config, "discretize") || wants(config, "noise")) {
    if (pop.senders.front().channel.discrete()) {
      report["discretize"] = {{"skipped", "discrete channel"}};
    } else {
      nlohmann::json disc = nlohmann::json::array();
      nlohmann::json noise = nlohmann::json::array();
      std::vector<std::vector<std::string>> rows;
      for (const auto& s : pop.senders) {
        for (const auto& r : pop.receivers) {
          const double clean = noise_eval(s, r, ctx.stores, test, 0.0, bs, es).mean;
          nlohmann::json d = {{"sender", s.architecture}, {"receiver", r.architecture}, {"clean", clean}};
          std::vector<std::string> row = {s.architecture, r.architecture, percent(clean)};
          if (wants(config, "discretize")) {
            for (double th : config.thresholds) {
              const double a =
                  discretize_eval(s, r, ctx.stores, test, DiscretizeMode::threshold, th, bs, es).mean;
              d["threshold"].push_back({{"theta", th}, {"accuracy", a}});
              row.push_back(percent(a));
            }
            const double am = discretize_eval(s, r, ctx.stores, test, DiscretizeMode::argmax_one_hot, 0, bs, es).mean;
            d["argmax_one_hot"] = am;
            row.push_back(percent(am));
            disc.push_back(d);
          }
          if (wants(config, "noise")) {
            nlohmann::json n = {{"sender", s.architecture}, {"receiver", r.architecture}};
            for (double sigma : config.noise_sigmas) {
              const double a = noise_eval(s, r, ctx.stores, test, sigma, bs, es).mean;
              n["levels"].push_back({{"sigma", sigma}, {"accuracy", a}});
              row.push_back(percent(a));
            }
            noise.push_back(n);
          }
          rows.push_back(std::move(row));
        }
      }
      std::vector<std::string> header = {"sender", "receiver", "clean"};
      if (wants(config, "discretize")) {
        for (double th : config.thresholds) header.push_back("thr " + short_number(th));
        header.push_back("argmax");
        report["discretize"] = disc;
      }
      if (wants(config, "noise")) {
        for (double sigma : config.noise_sigmas) header.push_back("sd " + short_number(sigma));
        report["noise"] = noise;
      }
      text += "Inference-time message probes (accuracy %)\n" + format_table(header, rows) + "\n";
    }
  }
  if (wants(config, "distances")) {
    std::vector<double> within;
    for (std::size_t i = 0; i < pop.senders.size(); ++i) {
      for (std::size_t j = i + 1; j < pop.senders.size(); ++j) {
        const auto d = message_distances(pop.senders[i], pop.senders[j], ctx.stores, test);
        within.insert(within.end(), d.values.begin(), d.values.end());
      }
    }
    nlohmann::json dj;
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const std::string& name, const DistanceDistribution& d) {
      dj[name] = to_json(d);
      rows.push_back({name, std::to_string(d.values.size()), std::to_string(d.mean).substr(0, 6),
                      std::to_string(d.q1).substr(0, 6), std::to_string(d.median).substr(0, 6),
                      std::to_string(d.q3).substr(0, 6)});
    };
    if (!within.empty()) add("same-population", summarize_distances(within));
    const auto baseline =
        message_distances(pop.senders.front(), pop.senders.back(), ctx.stores, test, true, es);
    add("mismatched-baseline", baseline);
    report["distances"] = dj;
    text += "Message cosine distances\n" +
            format_table({"comparison", "n", "mean", "q1", "median", "q3"}, rows) + "\n";
  }
  if (wants(config, "pca")) {
    const auto p = pca_report(pop.senders, ctx.stores, test);
    report["pca"] = to_json(p);
    std::vector<std::vector<std::string>> rows;
    for (Index i = 0; i < p.pca.explained_ratio.size(); ++i) {
      rows.push_back({std::to_string(i + 1), percent(p.pca.explained_ratio[i])});
    }
    text += "Message PCA explained variance (%)\n" + format_table({"component", "ratio"}, rows);
    text += std::string("dominant dimension: ") + (p.dominant_dimension ? "yes" : "no") +
            ", correlated dimensions: " + (p.correlated_dimensions ? "yes" : "no") + "\n\n";
  }

  write_json(dir / "report.json", report);
  write_text(dir / "report.txt", text);
  std::cout << text;
  write_text(dir / "eval.config", resolved_config(config));
}

void run_probe(const ExperimentConfig& config, bool force) {
  config.validate();
  const fs::path dir = config.out / "probe";
  refuse_existing(dir, force);
  Context ctx = make_context(config);
  if (ctx.data.ood.empty()) {
    throw InsufficientDataError("probe needs OOD stores (ood-<arch>.emb) in " + config.data_dir().string());
  }
  const Population pop = read_population(config.checkpoint_dir());
  ProbeConfig pc = config.probe;
  pc.seed = ctx.seeds.probe;
  const auto rows = probe_table(pop.senders, ctx.ood, ctx.ood_split.train, ctx.ood_split.test, pc);
  nlohmann::json j = nlohmann::json::array();
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    j.push_back(to_json(r));
    table.push_back({r.sender, percent(r.native), r.transfer.empty() ? "" : percent(r.transfer_mean()),
                     std::to_string(r.transfer.size())});
  }
  std::string text = format_table({"sender", "native", "transfer", "targets"}, table);
  if (rows.size() < 2) text += "note: a single sender has no transfer targets\n";
  write_json(dir / "probe.json", j);
  write_text(dir / "probe.txt", text);
  std::cout << text;
  write_text(dir / "probe.config", resolved_config(config));
}

void run_analyze(const ExperimentConfig& config, AnalyzeKind kind, int jobs, bool force) {
  config.validate();
  const fs::path dir = config.out / "analyze";
  refuse_existing(dir / (kind == AnalyzeKind::vocab ? "vocab_sweep.json" : "reinforce.json"), force);
  Context ctx = make_context(config);
  const auto senders = roster(config.senders, ctx.data.in_domain);
  const auto receivers = roster(config.receivers, ctx.data.in_domain);
  const auto t0 = std::chrono::steady_clock::now();

  struct Row {
    std::string label;
    Index vocab = 0;
    double in_domain = 0.0;
    double ood = 0.0;
    int epochs_to_peak = 0;
  };
  std::vector<TrainConfig> runs;
  std::vector<std::string> labels;
  if (kind == AnalyzeKind::vocab) {
    for (Index v : config.vocab_sizes) {
      TrainConfig t = ctx.train;
      t.channel.kind = ChannelKind::discrete;
      t.channel.train_estimator = Estimator::gumbel;
      t.channel.vocab_size = v;
      runs.push_back(t);
      labels.push_back("vocab " + std::to_string(v));
    }
    TrainConfig cont = ctx.train;
    cont.channel.kind = ChannelKind::continuous;
    runs.push_back(cont);
    labels.push_back("continuous");
  } else {
    for (Estimator e : {Estimator::gumbel, Estimator::reinforce}) {
      TrainConfig t = ctx.train;
      t.channel.kind = ChannelKind::discrete;
      t.channel.train_estimator = e;
      runs.push_back(t);
      labels.push_back(to_string(e));
    }
  }
  std::vector<Row> rows(runs.size());
  run_jobs(runs.size(), jobs, [&](std::size_t i) {
    Population pop = make_population(senders, receivers, ctx.stores, runs[i]);
    const auto m = train_population(pop, ctx.stores, ctx.split, runs[i]);
    Row row;
    row.label = labels[i];
    row.vocab = runs[i].channel.discrete() ? runs[i].channel.vocab_size : 0;
    row.in_domain = m.peak_test_acc;
    row.epochs_to_peak = m.epochs_to_peak;
    if (!ctx.data.ood.empty()) {
      row.ood = eval_matrix(pop, ctx.ood, ctx.ood_split.train, runs[i].batch_size, ctx.seeds.eval).mean();
    }
    rows[i] = row;
  });

  nlohmann::json j = nlohmann::json::array();
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    j.push_back({{"run", r.label}, {"vocab_size", r.vocab}, {"in_domain_acc", r.in_domain}, {"ood_acc", r.ood},
                 {"epochs_to_peak", r.epochs_to_peak}});
    table.push_back({r.label, percent(r.in_domain), ctx.data.ood.empty() ? "" : percent(r.ood),
                     std::to_string(r.epochs_to_peak)});
  }
  const std::string name = kind == AnalyzeKind::vocab ? "vocab_sweep" : "reinforce";
  write_json(dir / (name + ".json"), j);
  const std::string text = format_table({"run", "in-domain", "ood", "epochs to peak"}, table);
  write_text(dir / (name + ".txt"), text);
  std::cout << text;
  write_json(dir / (name + ".timing.json"), {{"wall_seconds", seconds_since(t0)}});
  write_text(dir / (name + ".config"), resolved_config(config));
}

}  // namespace refcomm
