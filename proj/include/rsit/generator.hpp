#pragma once

#include <array>
#include <memory>
#include <random>
#include <vector>

#include "rsit/nn.hpp"
#include "rsit/srm.hpp"

namespace rsit {

struct GeneratorConfig {
  /// Encoder widths; the decoder mirrors them.
  std::array<int, 3> widths{64, 128, 256};
  int blocks = 9;
  bool use_srm = true;
  bool affine_norm = false;

  /// Every width multiplied by `scale` and rounded (0.125 gives 8/16/32).
  static GeneratorConfig scaled(double scale);
  /// All widths zero: a network without layers or parameters.
  bool degenerate() const { return widths[0] == 0 && widths[1] == 0 && widths[2] == 0; }
};

/// Encoder (c7s1, two stride-2 convs) -> SRMConvBlocks -> decoder (two fractionally
/// strided convs, c7s1 to RGB, tanh). Images are [3, H, W] in [-1, 1] with H, W % 4 == 0.
class Generator : public nn::Module {
 public:
  Generator(const GeneratorConfig& config, std::mt19937_64& rng);

  Var forward(const Var& image) const;
  Tensor generate(const Tensor& image) const;

  const GeneratorConfig& config() const { return config_; }
  std::size_t count_parameters() const { return parameter_count(); }

  /// Final RGB projection; exposed for tests that pin it.
  nn::Conv2d& output_conv() { return *out_; }
  std::vector<srm::SrmConvBlock*> blocks();

 private:
  GeneratorConfig config_;
  std::unique_ptr<nn::Conv2d> enc0_, enc1_, enc2_;
  std::unique_ptr<nn::InstanceNorm2d> enc0_norm_, enc1_norm_, enc2_norm_;
  std::vector<std::unique_ptr<srm::SrmConvBlock>> blocks_;
  std::unique_ptr<nn::ConvTranspose2d> dec0_, dec1_;
  std::unique_ptr<nn::InstanceNorm2d> dec0_norm_, dec1_norm_;
  std::unique_ptr<nn::Conv2d> out_;
};

/// Throws ShapeError unless `image` is [3, H, W] with H and W positive multiples of 4.
void require_image(const Tensor& image, const char* what);

/// Multiply-accumulate count of one generator forward pass, in units of 1e9.
double generator_gmacs(const GeneratorConfig& config, int height, int width);

}  // namespace rsit
