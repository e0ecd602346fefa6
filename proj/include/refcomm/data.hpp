#ifndef REFCOMM_DATA_HPP
#define REFCOMM_DATA_HPP

#include "refcomm/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace refcomm {

/// class_id carried by records with no class structure (blob stores).
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

struct EmbeddingRecord {
  std::uint64_t image_id = 0;
  std::uint32_t class_id = kUnlabeled;
  std::vector<float> vector;
};

enum class StoreSource { synthetic, extracted };

struct DatasetManifest {
  StoreSource source = StoreSource::synthetic;
  std::optional<std::string> perturbation;
  nlohmann::json parameters = nlohmann::json::object();
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// One frozen vision module's output: a labeled vector per image id.
/// Vectors are stored contiguously, row-major, one row per record.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::string architecture, Index dim);

  void reserve(std::size_t records);
  /// Appends one record. Rejects duplicate ids, wrong lengths and non-finite values.
  void add(std::uint64_t image_id, std::uint32_t class_id, std::span<const float> vector);

  const std::string& architecture() const noexcept { return architecture_; }
  Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  std::uint64_t image_id(std::size_t i) const { return ids_.at(i); }
  std::uint32_t class_id(std::size_t i) const { return classes_.at(i); }
  const std::vector<std::uint64_t>& image_ids() const noexcept { return ids_; }
  const std::vector<std::uint32_t>& class_ids() const noexcept { return classes_; }

  bool contains(std::uint64_t image_id) const { return index_.count(image_id) != 0; }
  std::optional<std::size_t> find(std::uint64_t image_id) const;
  /// Position of an id; throws IndexError when absent.
  std::size_t position(std::uint64_t image_id) const;
  std::uint32_t class_of(std::uint64_t image_id) const { return classes_[position(image_id)]; }

  /// All vectors as a (size x dim) row-major matrix view.
  Eigen::Map<const MatrixF> vectors() const {
    return Eigen::Map<const MatrixF>(data_.data(), static_cast<Index>(ids_.size()), dim_);
  }
  Eigen::Map<const VectorF> row(std::size_t i) const {
    return Eigen::Map<const VectorF>(data_.data() + i * static_cast<std::size_t>(dim_), dim_);
  }
  EmbeddingRecord record(std::size_t i) const;

  /// Rows for the given image ids, in order, cast to Scalar.
  template <typename Scalar>
  Matrix<Scalar> gather(std::span<const std::uint64_t> ids) const {
    Matrix<Scalar> out(static_cast<Index>(ids.size()), dim_);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      out.row(static_cast<Index>(k)) = row(position(ids[k])).template cast<Scalar>().transpose();
    }
    return out;
  }

  /// Distinct class ids present, ascending (excludes kUnlabeled).
  std::vector<std::uint32_t> classes() const;
  /// Image ids of one class, in store order.
  std::vector<std::uint64_t> ids_of_class(std::uint32_t class_id) const;

  DatasetManifest manifest;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.architecture_ == b.architecture_ && a.dim_ == b.dim_ && a.ids_ == b.ids_ &&
           a.classes_ == b.classes_ && a.data_ == b.data_;
  }

 private:
  std::string architecture_;
  Index dim_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint32_t> classes_;
  std::vector<float> data_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Binary store format (little-endian):
//   "EMB1" | u16 version | u32 dim | u64 count | u16 name_len | name bytes
//   count x (u64 image_id | u32 class_id | dim x f32)
// Sidecar manifest: <basename>.manifest.json

inline constexpr std::uint16_t kStoreFormatVersion = 1;

std::string encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(std::string_view bytes);

std::filesystem::path manifest_path(const std::filesystem::path& store_path);
/// Writes the binary file and its manifest sidecar.
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
/// Reads a binary store; the manifest sidecar is loaded when present.
EmbeddingStore read_store(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic heterogeneous embeddings.
//
// Every image has a latent z = mu_class + within_noise * eps shared by all
// architectures; architecture a observes f_a(z) + obs_noise * eps_a, where
// f_a is a fixed random linear map (optionally followed by tanh).

struct ArchitectureSpec {
  std::string name;
  Index dim = 0;
  bool nonlinear = false;
  bool identity_map = false;  ///< requires dim == latent_dim
};

struct SyntheticGenConfig {
  std::uint32_t num_classes = 100;
  std::uint32_t images_per_class = 100;
  Index latent_dim = 64;
  std::vector<ArchitectureSpec> architectures = default_architectures();
  double within_class_noise = 0.3;
  double observation_noise = 0.1;
  std::uint32_t ood_num_classes = 20;
  std::uint32_t ood_images_per_class = 100;
  std::uint64_t seed = 0;

  static std::vector<ArchitectureSpec> default_architectures();
  void validate() const;
};

nlohmann::json to_json(const SyntheticGenConfig& c);
SyntheticGenConfig synth_config_from_json(const nlohmann::json& j);

struct SyntheticData {
  std::vector<EmbeddingStore> in_domain;  ///< one per architecture, config order
  std::vector<EmbeddingStore> ood;        ///< one per architecture, disjoint classes
};

/// In-domain image ids start at 0; OOD ids start here.
inline constexpr std::uint64_t kOodIdOffset = 1ULL << 32;

SyntheticData synth_generate(const SyntheticGenConfig& config);

/// Structureless i.i.d. standard-normal store; all records unlabeled.
EmbeddingStore synth_blobs(Index dim, std::size_t count, std::uint64_t seed);

/// First `dim` coordinates of every record. A prefix of an i.i.d. normal
/// vector is again i.i.d. normal, so one blob store serves every width.
EmbeddingStore prefix_view(const EmbeddingStore& store, Index dim, std::string architecture);

// ---------------------------------------------------------------------------
// Splits and batches

struct Split {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> test;
};

/// Partition by image id; depends only on the id set and the seed, so every
/// architecture store of the same images splits identically.
Split make_splits(std::span<const std::uint64_t> ids, double test_fraction, std::uint64_t seed);
Split make_splits(const EmbeddingStore& store, double test_fraction, std::uint64_t seed);

struct GameRound {
  Index target = 0;                ///< position in candidate_ids
  std::uint32_t sender_store = 0;  ///< caller-defined store indices
  std::uint32_t receiver_store = 0;
};

/// One referential-game round set: every candidate is the target once.
struct GameBatch {
  std::vector<std::uint64_t> candidate_ids;
  std::vector<GameRound> rounds;

  std::size_t size() const noexcept { return candidate_ids.size(); }
  std::vector<Index> targets() const;
};

GameBatch batch_from_candidates(std::vector<std::uint64_t> candidate_ids);

/// `batch_size` distinct candidates drawn uniformly from `ids`.
GameBatch build_batch(std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng);

/// Shuffles `ids` and cuts them into consecutive full batches (remainder dropped).
std::vector<GameBatch> epoch_batches(std::span<const std::uint64_t> ids, std::size_t batch_size, Rng& rng);

/// All candidates from one class. `pool` restricts the ids considered; empty = whole store.
GameBatch build_single_class_batch(const EmbeddingStore& store, std::uint32_t class_id, std::size_t size,
                                   Rng& rng, std::span<const std::uint64_t> pool = {});

}  // namespace refcomm

#endif  // REFCOMM_DATA_HPP
