#include "refcomm/config.hpp"

#include "refcomm/report.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace refcomm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "': cannot parse '" + v + "' as a number");
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, ptr);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::vector<ArchitectureSpec> parse_architectures(const std::string& v, const std::string& key) {
  std::vector<ArchitectureSpec> out;
  for (const auto& item : split_list(v)) {
    std::vector<std::string> parts;
    std::stringstream ss(item);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() < 2) throw ConfigError("'" + key + "': expected name:dim[:tanh][:identity], got '" + item + "'");
    ArchitectureSpec a;
    a.name = parts[0];
    a.dim = parse_number<Index>(parts[1], key);
    for (std::size_t i = 2; i < parts.size(); ++i) {
      if (parts[i] == "tanh") {
        a.nonlinear = true;
      } else if (parts[i] == "identity") {
        a.identity_map = true;
      } else if (parts[i] != "linear") {
        throw ConfigError("'" + key + "': unknown architecture flag '" + parts[i] + "'");
      }
    }
    out.push_back(a);
  }
  return out;
}

std::string fmt_architectures(const std::vector<ArchitectureSpec>& v) {
  std::vector<std::string> items;
  for (const auto& a : v) {
    std::string s = a.name + ":" + std::to_string(a.dim) + (a.nonlinear ? ":tanh" : ":linear");
    if (a.identity_map) s += ":identity";
    items.push_back(s);
  }
  return join(items);
}

template <typename T>
std::vector<T> parse_numbers(const std::string& v, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(parse_number<T>(item, key));
  return out;
}

template <typename T>
std::string fmt_numbers(const std::vector<T>& v) {
  std::vector<std::string> items;
  for (const auto& x : v) {
    if constexpr (std::is_floating_point_v<T>) {
      items.push_back(fmt_double(x));
    } else {
      items.push_back(std::to_string(x));
    }
  }
  return join(items);
}

struct Entry {
  ConfigKey key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define REFCOMM_NUM(NAME, FIELD, HELP)                                                           \
  Entry {                                                                                        \
    {NAME, HELP}, [](const ExperimentConfig& c) {                                                \
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(c.FIELD)>>) {                 \
        return fmt_double(c.FIELD);                                                              \
      } else {                                                                                   \
        return std::to_string(c.FIELD);                                                          \
      }                                                                                          \
    },                                                                                           \
        [](ExperimentConfig& c, const std::string& v, const std::string& k) {                    \
          c.FIELD = parse_number<std::decay_t<decltype(c.FIELD)>>(v, k);                         \
        }                                                                                        \
  }

#define REFCOMM_BOOL(NAME, FIELD, HELP)                                                           \
  Entry {                                                                                         \
    {NAME, HELP}, [](const ExperimentConfig& c) { return fmt_bool(c.FIELD); },                    \
        [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.FIELD = parse_bool(v, k); } \
  }

#define REFCOMM_STR(NAME, FIELD, HELP)                                                          \
  Entry {                                                                                       \
    {NAME, HELP}, [](const ExperimentConfig& c) { return std::string(c.FIELD); },               \
        [](ExperimentConfig& c, const std::string& v, const std::string&) { c.FIELD = v; }      \
  }

#define REFCOMM_PATH(NAME, FIELD, HELP)                                                         \
  Entry {                                                                                       \
    {NAME, HELP}, [](const ExperimentConfig& c) { return c.FIELD.string(); },                   \
        [](ExperimentConfig& c, const std::string& v, const std::string&) { c.FIELD = v; }      \
  }

#define REFCOMM_LIST(NAME, FIELD, HELP)                                                           \
  Entry {                                                                                         \
    {NAME, HELP}, [](const ExperimentConfig& c) { return join(c.FIELD); },                        \
        [](ExperimentConfig& c, const std::string& v, const std::string&) { c.FIELD = split_list(v); } \
  }

#define REFCOMM_NUMS(NAME, FIELD, HELP)                                                          \
  Entry {                                                                                        \
    {NAME, HELP}, [](const ExperimentConfig& c) { return fmt_numbers(c.FIELD); },                \
        [](ExperimentConfig& c, const std::string& v, const std::string& k) {                    \
          c.FIELD = parse_numbers<typename std::decay_t<decltype(c.FIELD)>::value_type>(v, k);   \
        }                                                                                        \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      REFCOMM_NUM("seed", seed, "top-level seed; every stage derives its own stream from it"),
      REFCOMM_PATH("out", out, "output directory"),
      REFCOMM_PATH("data", data, "embedding store directory (default <out>/stores)"),

      REFCOMM_NUM("synth.num_classes", synth.num_classes, "in-domain classes"),
      REFCOMM_NUM("synth.images_per_class", synth.images_per_class, "images per in-domain class"),
      REFCOMM_NUM("synth.latent_dim", synth.latent_dim, "shared latent dimension"),
      Entry{{"synth.architectures", "comma list of name:dim[:tanh|:linear][:identity]"},
            [](const ExperimentConfig& c) { return fmt_architectures(c.synth.architectures); },
            [](ExperimentConfig& c, const std::string& v, const std::string& k) {
              c.synth.architectures = parse_architectures(v, k);
            }},
      REFCOMM_NUM("synth.within_class_noise", synth.within_class_noise, "latent spread around each class mean"),
      REFCOMM_NUM("synth.observation_noise", synth.observation_noise, "per-architecture observation noise"),
      REFCOMM_NUM("synth.ood_num_classes", synth.ood_num_classes, "held-out classes"),
      REFCOMM_NUM("synth.ood_images_per_class", synth.ood_images_per_class, "images per held-out class"),
      REFCOMM_NUM("synth.blob_count", blob_count, "records in the Gaussian blob store"),

      REFCOMM_NUM("split.test_fraction", test_fraction, "in-domain test share"),
      REFCOMM_NUM("split.ood_test_fraction", ood_test_fraction, "held-out share used to score probes"),

      Entry{{"channel.kind", "continuous or discrete"},
            [](const ExperimentConfig& c) { return std::string(to_string(c.train.channel.kind)); },
            [](ExperimentConfig& c, const std::string& v, const std::string& k) {
              if (v == "continuous") {
                c.train.channel.kind = ChannelKind::continuous;
              } else if (v == "discrete") {
                c.train.channel.kind = ChannelKind::discrete;
              } else {
                throw ConfigError("'" + k + "': expected continuous or discrete, got '" + v + "'");
              }
            }},
      REFCOMM_NUM("channel.message_dim", train.channel.message_dim, "message / comparison space width"),
      REFCOMM_NUM("channel.vocab_size", train.channel.vocab_size, "discrete vocabulary size"),
      REFCOMM_NUM("channel.gumbel_tau", train.channel.gumbel_tau, "Gumbel-Softmax temperature"),
      Entry{{"channel.estimator", "gumbel or reinforce (discrete training)"},
            [](const ExperimentConfig& c) { return std::string(to_string(c.train.channel.train_estimator)); },
            [](ExperimentConfig& c, const std::string& v, const std::string& k) {
              if (v == "gumbel") {
                c.train.channel.train_estimator = Estimator::gumbel;
              } else if (v == "reinforce") {
                c.train.channel.train_estimator = Estimator::reinforce;
              } else {
                throw ConfigError("'" + k + "': expected gumbel or reinforce, got '" + v + "'");
              }
            }},
      REFCOMM_BOOL("channel.straight_through", train.channel.straight_through, "hard one-hot forward pass"),
      REFCOMM_NUM("channel.decoder_hidden", train.channel.decoder_hidden, "decoder hidden width (0 = plain embedding)"),

      REFCOMM_NUM("train.batch_size", train.batch_size, "candidates per game batch"),
      REFCOMM_NUM("train.max_epochs", train.max_epochs, "epoch cap"),
      REFCOMM_NUM("train.patience", train.patience, "epochs without test improvement before stopping"),
      REFCOMM_NUM("train.lr", train.adam.lr, "Adam learning rate"),
      REFCOMM_NUM("train.beta1", train.adam.beta1, "Adam beta1"),
      REFCOMM_NUM("train.beta2", train.adam.beta2, "Adam beta2"),
      REFCOMM_NUM("train.eps", train.adam.eps, "Adam epsilon"),
      REFCOMM_NUM("train.cosine_temperature", train.cosine_temperature, "selection softmax temperature"),
      REFCOMM_NUM("train.receiver_hidden", train.receiver_hidden, "receiver mapper hidden width"),
      Entry{{"train.reinforce_reward", "success or neg_cross_entropy"},
            [](const ExperimentConfig& c) {
              return std::string(c.train.reinforce.reward == RewardKind::success ? "success" : "neg_cross_entropy");
            },
            [](ExperimentConfig& c, const std::string& v, const std::string& k) {
              if (v == "success") {
                c.train.reinforce.reward = RewardKind::success;
              } else if (v == "neg_cross_entropy") {
                c.train.reinforce.reward = RewardKind::neg_cross_entropy;
              } else {
                throw ConfigError("'" + k + "': expected success or neg_cross_entropy, got '" + v + "'");
              }
            }},
      Entry{{"train.reinforce_baseline", "none or batch_mean"},
            [](const ExperimentConfig& c) {
              return std::string(c.train.reinforce.baseline == BaselineKind::none ? "none" : "batch_mean");
            },
            [](ExperimentConfig& c, const std::string& v, const std::string& k) {
              if (v == "none") {
                c.train.reinforce.baseline = BaselineKind::none;
              } else if (v == "batch_mean") {
                c.train.reinforce.baseline = BaselineKind::batch_mean;
              } else {
                throw ConfigError("'" + k + "': expected none or batch_mean, got '" + v + "'");
              }
            }},
      REFCOMM_NUM("train.entropy_coef", train.reinforce.entropy_coef, "REINFORCE entropy bonus weight"),
      REFCOMM_BOOL("train.restore_best", train.restore_best, "keep the peak-test-accuracy parameters"),

      REFCOMM_LIST("population.senders", senders, "sender architectures (empty = all)"),
      REFCOMM_LIST("population.receivers", receivers, "receiver architectures (empty = all)"),
      REFCOMM_STR("pair.sender", pair_sender, "sender architecture for pair mode"),
      REFCOMM_STR("pair.receiver", pair_receiver, "receiver architecture for pair mode"),

      Entry{{"learner.role", "sender or receiver"},
            [](const ExperimentConfig& c) {
              return std::string(c.learner_role == LearnerRole::sender ? "sender" : "receiver");
            },
            [](ExperimentConfig& c, const std::string& v, const std::string& k) {
              if (v == "sender") {
                c.learner_role = LearnerRole::sender;
              } else if (v == "receiver") {
                c.learner_role = LearnerRole::receiver;
              } else {
                throw ConfigError("'" + k + "': expected sender or receiver, got '" + v + "'");
              }
            }},
      REFCOMM_STR("learner.architecture", learner_architecture, "architecture of the new agent"),
      REFCOMM_PATH("learner.community", community, "checkpoint directory of the frozen community"),

      REFCOMM_PATH("eval.checkpoints", checkpoints, "checkpoint directory to evaluate (default <out>/checkpoints)"),
      REFCOMM_LIST("eval.suites", suites, "matrix,single-class,ood,blob,discretize,noise,distances,pca or all"),
      REFCOMM_NUM("eval.repeats", eval_repeats, "full passes per accuracy estimate"),
      REFCOMM_NUM("eval.single_class_size", single_class_size, "candidates per single-class batch"),
      REFCOMM_NUMS("eval.noise_sigmas", noise_sigmas, "message noise levels"),
      REFCOMM_NUMS("eval.thresholds", thresholds, "quantization thresholds"),
      REFCOMM_NUMS("analyze.vocab_sizes", vocab_sizes, "vocabulary sizes for the sweep"),

      REFCOMM_NUM("probe.epochs", probe.epochs, "probe training epochs"),
      REFCOMM_NUM("probe.lr", probe.lr, "probe Adam learning rate"),
      REFCOMM_NUM("probe.batch_size", probe.batch_size, "probe minibatch size"),
      REFCOMM_BOOL("probe.normalize", probe.normalize, "unit-normalize messages before the probe"),
  };
  return table;
}

#undef REFCOMM_NUM
#undef REFCOMM_BOOL
#undef REFCOMM_STR
#undef REFCOMM_PATH
#undef REFCOMM_LIST
#undef REFCOMM_NUMS

const Entry& entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  entry(key).set(c, value, key);
}

std::string get_config_value(const ExperimentConfig& c, const std::string& key) { return entry(key).get(c); }

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text, std::move(base));
}

std::string resolved_config(const ExperimentConfig& c) {
  std::string out = "# resolved configuration\n";
  for (const auto& e : entries()) out += e.key.name + " = " + e.get(c) + "\n";
  return out;
}

void ExperimentConfig::validate() const {
  try {
    synth.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  train.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("split.test_fraction must be in (0, 1)");
  if (!(ood_test_fraction > 0.0 && ood_test_fraction < 1.0)) {
    throw ConfigError("split.ood_test_fraction must be in (0, 1)");
  }
  if (eval_repeats < 1) throw ConfigError("eval.repeats must be >= 1");
  if (single_class_size < 2) throw ConfigError("eval.single_class_size must be >= 2");
  for (double s : noise_sigmas) {
    if (s < 0.0) throw ConfigError("eval.noise_sigmas must be >= 0");
  }
  for (Index v : vocab_sizes) {
    if (v < 2) throw ConfigError("analyze.vocab_sizes entries must be >= 2");
  }
  if (probe.epochs < 1 || !(probe.lr > 0.0) || probe.batch_size < 1) {
    throw ConfigError("probe.epochs, probe.lr and probe.batch_size must be positive");
  }
}

Seeds derive_seeds(std::uint64_t seed) {
  return {derive_seed(seed, "synth"), derive_seed(seed, "blobs"), derive_seed(seed, "split"),
          derive_seed(seed, "ood-split"), derive_seed(seed, "train"), derive_seed(seed, "eval"),
          derive_seed(seed, "probe")};
}

}  // namespace refcomm
