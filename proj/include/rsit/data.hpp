#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rsit/tensor.hpp"

namespace rsit::data {

/// X = summer, Y = winter.
enum class Domain { X, Y };
const char* domain_name(Domain d);

/// Unpaired image collection yielding seeded random crops in [-1, 1].
class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(Domain domain, int crop, std::uint64_t seed, std::vector<Tensor> images,
                std::vector<std::string> names = {});

  /// Lexicographic file order; undecodable files are skipped with a warning on stderr.
  /// Throws if an image is smaller than the crop or the folder does not exist.
  static DomainDataset load_folder(const std::filesystem::path& root, Domain domain, int crop,
                                   std::uint64_t seed);

  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  Domain domain() const { return domain_; }
  int crop() const { return crop_; }
  const std::vector<std::string>& names() const { return names_; }
  const Tensor& full_image(std::size_t index) const { return images_.at(index); }

  /// Crop offset (row, col) drawn from the stream keyed by (seed, epoch, index).
  std::pair<int, int> crop_offset(std::size_t index, std::uint64_t epoch) const;
  Tensor get(std::size_t index, std::uint64_t epoch) const;

 private:
  Domain domain_ = Domain::X;
  int crop_ = 256;
  std::uint64_t seed_ = 0;
  std::vector<Tensor> images_;
  std::vector<std::string> names_;
};

struct UnpairedDataset {
  DomainDataset x;
  DomainDataset y;
};

/// Synthetic season pair: shared layout, season-specific vegetation colors, and
/// `change_count` structures present in only one of the two dates.
struct SyntheticSceneSpec {
  int size = 64;
  int structure_count = 6;
  int structure_min = 4;
  int structure_max = 10;
  double vegetation_fraction = 0.35;
  int change_count = 2;
  double pixel_jitter = 0.04;
  double global_noise = 0.02;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument for infeasible or malformed specs.
  void validate() const;
};

struct SyntheticScene {
  Tensor summer_t1;       // [3, S, S]
  Tensor winter_t2;       // [3, S, S]
  Tensor change_mask;     // [S, S], 1 where a structure was added or removed
  Tensor vegetation_mask; // [S, S]
};

SyntheticScene generate_synthetic(const SyntheticSceneSpec& spec);

struct BenchmarkSpec {
  int train_per_domain = 16;
  int test_per_domain = 8;
  int pairs = 20;
  SyntheticSceneSpec scene;
  std::uint64_t seed = 7;
};

/// Scene spec for item `index` of `role` ("trainX", "pairs", ...): the base scene spec
/// with its seed derived from the benchmark seed.
SyntheticSceneSpec benchmark_scene(const BenchmarkSpec& spec, const std::string& role,
                                   int index);

/// Writes trainX/, trainY/, testX/, testY/, pairs/{t1,t2,mask}/ and manifest.json.
/// Returns the manifest path.
std::filesystem::path write_benchmark(const std::filesystem::path& root,
                                      const BenchmarkSpec& spec);

struct ChangePair {
  std::string name;
  Tensor t1;    // summer
  Tensor t2;    // winter
  Tensor mask;  // [H, W]
};

/// Reads <root>/pairs/{t1,t2,mask}; files matched by name.
std::vector<ChangePair> load_pairs(const std::filesystem::path& root);

/// Builds the benchmark in memory (identical content to write_benchmark).
UnpairedDataset synthetic_training_set(const BenchmarkSpec& spec);
std::vector<ChangePair> synthetic_pairs(const BenchmarkSpec& spec);

}  // namespace rsit::data
