#pragma once

#include <array>
#include <memory>
#include <random>
#include <vector>

#include "rsit/nn.hpp"
#include "rsit/srm.hpp"

namespace rsit {

/// Row-major flattening of the C x C channel-correlation matrix with the strict lower
/// triangle zeroed; length C * C.
struct StyleVector {
  Tensor data;
  int channels() const;
  double entry(int i, int j) const;
};

struct DiscriminatorOutput {
  double decision = 0.0;
  StyleVector style;
};

/// Differentiable outputs of one discriminator pass.
struct DiscriminatorGraph {
  Var decision;  // scalar in [0, 1]
  Var style;     // [C * C]
};

struct DiscriminatorConfig {
  std::array<int, 4> widths{64, 128, 256, 512};
  double leaky_slope = 0.2;
  bool use_srm = true;
  int head_kernel = 4;

  static DiscriminatorConfig scaled(double scale);
};

/// Spatial size the encoder must reach before the pooling-fusion pyramid.
inline constexpr int kStyleMapSize = 16;
inline constexpr int kFusionStages = 4;

/// Style discriminator: conv + SRM + leaky-ReLU encoder producing M, a patch decision
/// head averaged to one scalar, and a parameter-free style head.
class Discriminator : public nn::Module {
 public:
  Discriminator(const DiscriminatorConfig& config, std::mt19937_64& rng);

  /// Square images with side 16 * 2^k, k <= 4; the first k encoder convs use stride 2.
  Var encode(const Var& image) const;
  Var decide(const Var& feature_map) const;
  DiscriminatorGraph forward(const Var& image) const;

  DiscriminatorOutput evaluate(const Tensor& image) const;

  const DiscriminatorConfig& config() const { return config_; }
  nn::Conv2d& head() { return *head_; }
  std::vector<nn::Conv2d*> encoder_convs();

 private:
  DiscriminatorConfig config_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<srm::SrmLayer>> srms_;
  std::unique_ptr<nn::Conv2d> head_;
};

/// Number of stride-2 encoder stages needed to bring a side of `size` to 16.
int discriminator_downsamples(int size);

/// Four stages of max-pool 2x2 + avg-pool 2x2 fused by addition: [C, 16, 16] -> [C].
Var pool_fusion(const Var& feature_map);
/// v [C] -> masked outer product v^T v flattened row-major, strict lower triangle zero.
Var upper_correlation(const Var& v);
/// pool_fusion followed by upper_correlation.
Var style_vector(const Var& feature_map);
StyleVector style_vector(const Tensor& feature_map);

/// Multiply-accumulate count of one discriminator pass on a size x size image, in 1e9.
double discriminator_gmacs(const DiscriminatorConfig& config, int size);

/// Mean of per-patch sigmoid probabilities given raw patch logits.
double decide_from_logits(const Tensor& logits);

}  // namespace rsit
