#include "refcomm/data.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace refcomm {

using io::ByteReader;
using io::put_u16;
using io::put_u32;
using io::put_u64;

namespace {

constexpr char kStoreMagic[4] = {'E', 'M', 'B', '1'};

const char* source_name(StoreSource s) { return s == StoreSource::synthetic ? "synthetic" : "extracted"; }

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["source"] = source_name(m.source);
  j["perturbation"] = m.perturbation ? nlohmann::json(*m.perturbation) : nlohmann::json(nullptr);
  j["parameters"] = m.parameters;
  j["seed"] = m.seed;
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  const std::string source = j.value("source", "synthetic");
  if (source == "synthetic") {
    m.source = StoreSource::synthetic;
  } else if (source == "extracted") {
    m.source = StoreSource::extracted;
  } else {
    throw FormatError("manifest: unknown source '" + source + "'", 0);
  }
  if (j.contains("perturbation") && !j["perturbation"].is_null()) {
    m.perturbation = j["perturbation"].get<std::string>();
  }
  if (j.contains("parameters")) m.parameters = j["parameters"];
  m.seed = j.value("seed", std::uint64_t{0});
  return m;
}

// ---------------------------------------------------------------------------
// EmbeddingStore

EmbeddingStore::EmbeddingStore(std::string architecture, Index dim)
    : architecture_(std::move(architecture)), dim_(dim) {
  if (dim < 0) throw ShapeError("EmbeddingStore: negative dimension");
}

void EmbeddingStore::reserve(std::size_t records) {
  ids_.reserve(records);
  classes_.reserve(records);
  data_.reserve(records * static_cast<std::size_t>(dim_));
  index_.reserve(records);
}

void EmbeddingStore::add(std::uint64_t image_id, std::uint32_t class_id, std::span<const float> vector) {
  if (static_cast<Index>(vector.size()) != dim_) {
    throw ShapeError("EmbeddingStore::add: vector length " + std::to_string(vector.size()) +
                     " for store of dim " + std::to_string(dim_));
  }
  for (float x : vector) {
    if (!std::isfinite(x)) {
      throw NumericError("EmbeddingStore::add: non-finite value in image " + std::to_string(image_id));
    }
  }
  if (!index_.emplace(image_id, ids_.size()).second) {
    throw ParameterError("EmbeddingStore::add: duplicate image id " + std::to_string(image_id));
  }
  ids_.push_back(image_id);
  classes_.push_back(class_id);
  data_.insert(data_.end(), vector.begin(), vector.end());
}

std::optional<std::size_t> EmbeddingStore::find(std::uint64_t image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingStore::position(std::uint64_t image_id) const {
  auto it = index_.find(image_id);
  if (it == index_.end()) {
    throw IndexError("store '" + architecture_ + "' has no image " + std::to_string(image_id));
  }
  return it->second;
}

EmbeddingRecord EmbeddingStore::record(std::size_t i) const {
  EmbeddingRecord r;
  r.image_id = ids_.at(i);
  r.class_id = classes_[i];
  const float* p = data_.data() + i * static_cast<std::size_t>(dim_);
  r.vector.assign(p, p + dim_);
  return r;
}

std::vector<std::uint32_t> EmbeddingStore::classes() const {
  std::set<std::uint32_t> s(classes_.begin(), classes_.end());
  s.erase(kUnlabeled);
  return {s.begin(), s.end()};
}

std::vector<std::uint64_t> EmbeddingStore::ids_of_class(std::uint32_t class_id) const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (classes_[i] == class_id) out.push_back(ids_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string encode_store(const EmbeddingStore& store) {
  if (store.architecture().size() > 0xffff) {
    throw ParameterError("encode_store: architecture name too long");
  }
  std::string out;
  out.reserve(20 + store.architecture().size() + store.size() * (12 + 4 * store.dim()));
  out.append(kStoreMagic, 4);
  put_u16(out, kStoreFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(store.dim()));
  put_u64(out, store.size());
  put_u16(out, static_cast<std::uint16_t>(store.architecture().size()));
  out.append(store.architecture());
  for (std::size_t i = 0; i < store.size(); ++i) {
    put_u64(out, store.image_id(i));
    put_u32(out, store.class_id(i));
    const auto r = store.row(i);
    for (Index k = 0; k < store.dim(); ++k) put_u32(out, std::bit_cast<std::uint32_t>(r[k]));
  }
  return out;
}

EmbeddingStore decode_store(std::string_view bytes) {
  ByteReader in(bytes);
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kStoreMagic, 4) != 0) {
    throw FormatError("bad magic, expected \"EMB1\"", 0);
  }
  const auto version_at = in.offset();
  const auto version = in.uint<std::uint16_t>("format version");
  if (version != kStoreFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version), version_at);
  }
  const auto dim = in.uint<std::uint32_t>("dim");
  const auto count = in.uint<std::uint64_t>("record count");
  const auto name_len = in.uint<std::uint16_t>("architecture name length");
  const std::string name(in.take(name_len, "architecture name"));

  const std::uint64_t record_bytes = 12 + 4ULL * dim;
  const std::uint64_t complete = record_bytes ? in.remaining() / record_bytes : count;
  if (complete < count) {
    throw FormatError("truncated: header declares " + std::to_string(count) + " records, only " +
                          std::to_string(complete) + " complete",
                      in.offset() + complete * record_bytes);
  }

  EmbeddingStore store(name, dim);
  store.reserve(count);
  std::vector<float> v(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto record_at = in.offset();
    const auto id = in.uint<std::uint64_t>("image id");
    const auto cls = in.uint<std::uint32_t>("class id");
    for (std::uint32_t k = 0; k < dim; ++k) v[k] = in.f32("vector");
    try {
      store.add(id, cls, v);
    } catch (const Error& e) {
      throw FormatError(std::string("invalid record: ") + e.what(), record_at);
    }
  }
  if (in.remaining() != 0) {
    throw FormatError(std::to_string(in.remaining()) + " trailing bytes after last record", in.offset());
  }
  return store;
}

std::filesystem::path manifest_path(const std::filesystem::path& store_path) {
  auto p = store_path;
  p.replace_extension(".manifest.json");
  return p;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  const std::string bytes = encode_store(store);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("write_store: cannot open " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write_store: write failed for " + path.string());
  }
  nlohmann::json j = to_json(store.manifest);
  j["architecture"] = store.architecture();
  j["dim"] = store.dim();
  j["count"] = store.size();
  std::ofstream man(manifest_path(path), std::ios::trunc);
  man << j.dump(2) << "\n";
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_store: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  EmbeddingStore store = decode_store(buf.str());

  const auto mp = manifest_path(path);
  if (std::filesystem::exists(mp)) {
    std::ifstream min(mp);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(min);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(mp.string() + ": " + e.what(), 0);
    }
    if (j.contains("dim") && j["dim"].get<Index>() != store.dim()) {
      throw FormatError(mp.string() + ": manifest dim " + j["dim"].dump() + " does not match store dim " +
                            std::to_string(store.dim()),
                        0);
    }
    store.manifest = manifest_from_json(j);
  }
  return store;
}

// ---------------------------------------------------------------------------
// Synthetic generation

std::vector<ArchitectureSpec> SyntheticGenConfig::default_architectures() {
  return {
      {"lin64", 64, false, false},    {"tanh128", 128, true, false}, {"lin256", 256, false, false},
      {"tanh384", 384, true, false},  {"lin512", 512, false, false}, {"tanh1024", 1024, true, false},
  };
}

void SyntheticGenConfig::validate() const {
  if (num_classes < 1 || images_per_class < 1) throw ConfigError("synth: need >= 1 class and image");
  if (latent_dim < 1) throw ConfigError("synth: latent_dim must be >= 1");
  if (architectures.empty()) throw ConfigError("synth: no architectures");
  if (!(within_class_noise >= 0.0) || !(observation_noise >= 0.0)) {
    throw ConfigError("synth: noise levels must be >= 0");
  }
  std::set<std::string> names;
  for (const auto& a : architectures) {
    if (a.dim < 1) throw ConfigError("synth: architecture '" + a.name + "' has dim < 1");
    if (a.identity_map && a.dim != latent_dim) {
      throw ConfigError("synth: identity map for '" + a.name + "' needs dim == latent_dim");
    }
    if (!names.insert(a.name).second) throw ConfigError("synth: duplicate architecture '" + a.name + "'");
  }
}

nlohmann::json to_json(const SyntheticGenConfig& c) {
  nlohmann::json archs = nlohmann::json::array();
  for (const auto& a : c.architectures) {
    archs.push_back({{"name", a.name}, {"dim", a.dim}, {"nonlinear", a.nonlinear}, {"identity_map", a.identity_map}});
  }
  return {{"num_classes", c.num_classes},
          {"images_per_class", c.images_per_class},
          {"latent_dim", c.latent_dim},
          {"architectures", archs},
          {"within_class_noise", c.within_class_noise},
          {"observation_noise", c.observation_noise},
          {"ood_num_classes", c.ood_num_classes},
          {"ood_images_per_class", c.ood_images_per_class},
          {"seed", c.seed}};
}

SyntheticGenConfig synth_config_from_json(const nlohmann::json& j) {
  SyntheticGenConfig c;
  c.num_classes = j.at("num_classes");
  c.images_per_class = j.at("images_per_class");
  c.latent_dim = j.at("latent_dim");
  c.architectures.clear();
  for (const auto& a : j.at("architectures")) {
    c.architectures.push_back({a.at("name"), a.at("dim"), a.value("nonlinear", false), a.value("identity_map", false)});
  }
  c.within_class_noise = j.at("within_class_noise");
  c.observation_noise = j.at("observation_noise");
  c.ood_num_classes = j.at("ood_num_classes");
  c.ood_images_per_class = j.at("ood_images_per_class");
  c.seed = j.at("seed");
  return c;
}

namespace {

MatrixD gaussian_matrix(Index rows, Index cols, double sd, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = sd * normal(rng);
  return m;
}

struct LatentSet {
  std::vector<std::uint64_t> ids;
  std::vector<std::uint32_t> classes;
  MatrixD z;  // one row per image
};

LatentSet draw_latents(const SyntheticGenConfig& c, std::uint32_t num_classes, std::uint32_t per_class,
                       std::uint32_t class_offset, std::uint64_t id_offset, std::string_view stream) {
  Rng rng = make_rng(c.seed, stream);
  const MatrixD means = gaussian_matrix(num_classes, c.latent_dim, 1.0, rng);
  LatentSet s;
  const Index n = static_cast<Index>(num_classes) * per_class;
  s.z.resize(n, c.latent_dim);
  s.ids.reserve(n);
  s.classes.reserve(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  Index row = 0;
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    for (std::uint32_t j = 0; j < per_class; ++j, ++row) {
      for (Index d = 0; d < c.latent_dim; ++d) {
        s.z(row, d) = means(k, d) + c.within_class_noise * normal(rng);
      }
      s.ids.push_back(id_offset + static_cast<std::uint64_t>(k) * per_class + j);
      s.classes.push_back(class_offset + k);
    }
  }
  return s;
}

EmbeddingStore observe(const SyntheticGenConfig& c, const ArchitectureSpec& arch, const MatrixD& map,
                       const LatentSet& latents, std::string_view noise_stream, const char* role) {
  Rng rng = make_rng(c.seed, std::string(noise_stream) + ":" + arch.name);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD x = latents.z * map.transpose();
  if (arch.nonlinear) x = x.array().tanh();

  EmbeddingStore store(arch.name, arch.dim);
  store.reserve(latents.ids.size());
  std::vector<float> v(arch.dim);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index d = 0; d < arch.dim; ++d) {
      v[d] = static_cast<float>(x(i, d) + c.observation_noise * normal(rng));
    }
    store.add(latents.ids[i], latents.classes[i], v);
  }
  store.manifest.source = StoreSource::synthetic;
  store.manifest.seed = c.seed;
  store.manifest.parameters = {{"generator", to_json(c)}, {"role", role}, {"architecture", arch.name}};
  return store;
}

}  // namespace

SyntheticData synth_generate(const SyntheticGenConfig& config) {
  config.validate();
  const LatentSet in_domain =
      draw_latents(config, config.num_classes, config.images_per_class, 0, 0, "latent");
  const LatentSet ood = draw_latents(config, config.ood_num_classes, config.ood_images_per_class,
                                     config.num_classes, kOodIdOffset, "ood-latent");

  SyntheticData out;
  for (const auto& arch : config.architectures) {
    MatrixD map;
    if (arch.identity_map) {
      map = MatrixD::Identity(arch.dim, config.latent_dim);
    } else {
      Rng rng = make_rng(config.seed, "map:" + arch.name);
      map = gaussian_matrix(arch.dim, config.latent_dim, 1.0 / std::sqrt(double(config.latent_dim)), rng);
    }
    out.in_domain.push_back(observe(config, arch, map, in_domain, "obs", "in_domain"));
    if (config.ood_num_classes > 0) {
      out.ood.push_back(observe(config, arch, map, ood, "ood-obs", "ood"));
    }
  }
  return out;
}

EmbeddingStore synth_blobs(Index dim, std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, "blobs");
  std::normal_distribution<float> normal(0.0f, 1.0f);
  EmbeddingStore store("blobs", dim);
  store.reserve(count);
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& x : v) x = normal(rng);
    store.add(i, kUnlabeled, v);
  }
  store.manifest.source = StoreSource::synthetic;
  store.manifest.perturbation = "gaussian-blob";
  store.manifest.seed = seed;
  store.manifest.parameters = {{"generator", "iid-standard-normal"}, {"dim", dim}, {"count", count}};
  return store;
}

EmbeddingStore prefix_view(const EmbeddingStore& store, Index dim, std::string architecture) {
  if (dim > store.dim()) {
    throw ShapeError("prefix_view: dim " + std::to_string(dim) + " exceeds store dim " +
                     std::to_string(store.dim()));
  }
  EmbeddingStore out(std::move(architecture), dim);
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto r = store.row(i);
    out.add(store.image_id(i), store.class_id(i), std::span<const float>(r.data(), static_cast<std::size_t>(dim)));
  }
  out.manifest = store.manifest;
  return out;
}

// ---------------------------------------------------------------------------
// Splits and batches

Split make_splits(std::span<const std::uint64_t> ids, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ParameterError("make_splits: test_fraction must be in (0, 1), got " + std::to_string(test_fraction));
  }
  std::vector<std::uint64_t> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end());
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(order.size())));
  if (order.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, order.size() - 1);
  Rng rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);

  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

Split make_splits(const EmbeddingStore& store, double test_fraction, std::uint64_t seed) {
  return make_splits(store.image_ids(), test_fraction, seed);
}

std::vector<Index> GameBatch::targets() const {
  std::vector<Index> t;
  t.reserve(rounds.size());
  for (const auto& r : rounds) t.push_back(r.target);
  return t;
}

GameBatch batch_from_candidates(std::vector<std::uint64_t> candidate_ids) {
  GameBatch b;
  b.candidate_ids = std::move(candidate_ids);
  b.rounds.resize(b.candidate_ids.size());
  for (std::size_t i = 0; i < b.rounds.size(); ++i) b.rounds[i].target = static_cast<Index>(i);
  return b;
}

namespace {

std::vector<std::uint64_t> sample_distinct(std::span<const std::uint64_t> ids, std::size_t k, Rng& rng) {
  std::vector<std::uint64_t> pool(ids.begin(), ids.end());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

GameBatch build_batch(std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0 || ids.size() < batch_size) {
    throw InsufficientDataError("build_batch: need " + std::to_string(batch_size) + " ids, have " +
                                std::to_string(ids.size()));
  }
  return batch_from_candidates(sample_distinct(ids, batch_size, rng));
}

std::vector<GameBatch> epoch_batches(std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0 || ids.size() < batch_size) {
    throw InsufficientDataError("epoch_batches: need " + std::to_string(batch_size) + " ids, have " +
                                std::to_string(ids.size()));
  }
  std::vector<std::uint64_t> order(ids.begin(), ids.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<GameBatch> out;
  out.reserve(order.size() / batch_size);
  for (std::size_t start = 0; start + batch_size <= order.size(); start += batch_size) {
    out.push_back(batch_from_candidates({order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + batch_size)}));
  }
  return out;
}

GameBatch build_single_class_batch(const EmbeddingStore& store, std::uint32_t class_id, std::size_t size,
                                   Rng& rng, std::span<const std::uint64_t> pool) {
  std::vector<std::uint64_t> members;
  if (pool.empty()) {
    members = store.ids_of_class(class_id);
  } else {
    for (auto id : pool) {
      if (store.class_of(id) == class_id) members.push_back(id);
    }
  }
  if (size == 0 || members.size() < size) {
    throw InsufficientDataError("build_single_class_batch: class " + std::to_string(class_id) + " has " +
                                std::to_string(members.size()) + " images, need " + std::to_string(size));
  }
  return batch_from_candidates(sample_distinct(members, size, rng));
}

}  // namespace refcomm
