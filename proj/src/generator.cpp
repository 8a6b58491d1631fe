#include "rsit/generator.hpp"

#include <cmath>

#include "rsit/ops.hpp"

namespace rsit {

GeneratorConfig GeneratorConfig::scaled(double scale) {
  if (!(scale >= 0.0)) throw std::invalid_argument("generator scale must be >= 0");
  GeneratorConfig c;
  for (int& w : c.widths) w = static_cast<int>(std::lround(w * scale));
  return c;
}

void require_image(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(what) + ": expected a [3, H, W] image, got " +
                     shape_str(image.shape()));
  }
  if (image.dim(1) < 4 || image.dim(2) < 4 || image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0) {
    throw ShapeError(std::string(what) + ": height and width must be positive multiples of 4, got " +
                     shape_str(image.shape()));
  }
}

Generator::Generator(const GeneratorConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.degenerate()) return;
  const auto [w0, w1, w2] = config.widths;
  if (w0 < 1 || w1 < 1 || w2 < 1 || config.blocks < 0) {
    throw std::invalid_argument("generator widths must all be positive (or all zero)");
  }
  enc0_ = std::make_unique<nn::Conv2d>(3, w0, 7, 1, 0, rng);
  enc0_norm_ = std::make_unique<nn::InstanceNorm2d>(w0, config.affine_norm);
  enc1_ = std::make_unique<nn::Conv2d>(w0, w1, 3, 2, 1, rng);
  enc1_norm_ = std::make_unique<nn::InstanceNorm2d>(w1, config.affine_norm);
  enc2_ = std::make_unique<nn::Conv2d>(w1, w2, 3, 2, 1, rng);
  enc2_norm_ = std::make_unique<nn::InstanceNorm2d>(w2, config.affine_norm);
  for (int b = 0; b < config.blocks; ++b) {
    blocks_.push_back(
        std::make_unique<srm::SrmConvBlock>(w2, rng, config.use_srm, config.affine_norm));
  }
  dec0_ = std::make_unique<nn::ConvTranspose2d>(w2, w1, 3, 2, 1, 1, rng);
  dec0_norm_ = std::make_unique<nn::InstanceNorm2d>(w1, config.affine_norm);
  dec1_ = std::make_unique<nn::ConvTranspose2d>(w1, w0, 3, 2, 1, 1, rng);
  dec1_norm_ = std::make_unique<nn::InstanceNorm2d>(w0, config.affine_norm);
  out_ = std::make_unique<nn::Conv2d>(w0, 3, 7, 1, 0, rng);

  register_module("enc0", *enc0_);
  register_module("enc0_norm", *enc0_norm_);
  register_module("enc1", *enc1_);
  register_module("enc1_norm", *enc1_norm_);
  register_module("enc2", *enc2_);
  register_module("enc2_norm", *enc2_norm_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    register_module("blocks." + std::to_string(b), *blocks_[b]);
  }
  register_module("dec0", *dec0_);
  register_module("dec0_norm", *dec0_norm_);
  register_module("dec1", *dec1_);
  register_module("dec1_norm", *dec1_norm_);
  register_module("out", *out_);
}

std::vector<srm::SrmConvBlock*> Generator::blocks() {
  std::vector<srm::SrmConvBlock*> out;
  for (auto& b : blocks_) out.push_back(b.get());
  return out;
}

Var Generator::forward(const Var& image) const {
  require_image(image.value(), "Generator");
  if (!enc0_) throw std::logic_error("Generator: degenerate zero-width network has no forward");
  Var h = ops::relu(enc0_norm_->forward(enc0_->forward(ops::reflection_pad2d(image, 3))));
  h = ops::relu(enc1_norm_->forward(enc1_->forward(h)));
  h = ops::relu(enc2_norm_->forward(enc2_->forward(h)));
  for (const auto& block : blocks_) h = block->forward(h);
  h = ops::relu(dec0_norm_->forward(dec0_->forward(h)));
  h = ops::relu(dec1_norm_->forward(dec1_->forward(h)));
  return ops::tanh(out_->forward(ops::reflection_pad2d(h, 3)));
}

Tensor Generator::generate(const Tensor& image) const {
  NoGradGuard guard;
  return forward(Var(image)).value();
}

double generator_gmacs(const GeneratorConfig& config, int height, int width) {
  if (config.degenerate()) return 0.0;
  const auto [w0, w1, w2] = config.widths;
  const double hw = static_cast<double>(height) * width;
  const double q = hw / 4.0, s = hw / 16.0;
  double macs = hw * w0 * 3 * 49;                       // c7s1
  macs += q * w1 * w0 * 9;                              // stride-2 conv
  macs += s * w2 * w1 * 9;                              // stride-2 conv
  macs += config.blocks * 2.0 * s * w2 * w2 * 9;        // residual convs
  // Transposed convs counted per output element times input taps (profiler convention).
  macs += q * w1 * w2 * 9;
  macs += hw * w0 * w1 * 9;
  macs += hw * 3 * w0 * 49;                             // output conv
  return macs / 1e9;
}

}  // namespace rsit
