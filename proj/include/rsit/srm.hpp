#pragma once

#include <random>

#include "rsit/autograd.hpp"
#include "rsit/nn.hpp"

// Style-based recalibration: per-channel (mean, std) pooling, a shared two-tap
// integration kernel with sigmoid gating, and channel-wise rescaling.
namespace rsit::srm {

/// Variance floor used inside the recalibration layer so that d(sigma)/dx stays finite
/// on constant channels.
inline constexpr double kStyleEps = 1e-5;

/// [C, 2]: column 0 is the channel mean, column 1 the population standard deviation.
struct StyleDescriptor {
  Tensor data;
  int channels() const { return data.dim(0); }
  double mean(int c) const { return data[static_cast<std::size_t>(2 * c)]; }
  double stddev(int c) const { return data[static_cast<std::size_t>(2 * c + 1)]; }
};

/// [C, 1], every entry in (0, 1).
struct StyleWeights {
  Tensor data;
  int channels() const { return data.dim(0); }
};

/// The shared 1-d kernel spanning the (mean, std) axis, plus bias.
struct IntegrationKernel {
  double w_mean = 0.0;
  double w_std = 0.0;
  double bias = 0.0;
};

StyleDescriptor style_pool(const Tensor& feature_map);
StyleWeights style_integrate(const StyleDescriptor& style, const IntegrationKernel& kernel);
Tensor recalibrate(const Tensor& feature_map, const StyleWeights& weights);
/// recalibrate(f, style_integrate(style_pool(f), kernel)) with the guarded deviation.
Tensor srm_layer(const Tensor& feature_map, const IntegrationKernel& kernel);

// Differentiable forms. `eps` is added to the variance before the square root.
Var style_pool(const Var& feature_map, double eps);
/// style [C, 2], weight [2], bias [1] -> [C, 1].
Var style_integrate(const Var& style, const Var& weight, const Var& bias);
/// feature_map [C, H, W], weights [C, 1].
Var recalibrate(const Var& feature_map, const Var& weights);

class SrmLayer : public nn::Module {
 public:
  explicit SrmLayer(std::mt19937_64& rng, double init_std = 0.02);
  Var forward(const Var& x) const;

  IntegrationKernel kernel() const;
  void set_kernel(const IntegrationKernel& k);

 private:
  Var weight_, bias_;
};

/// Residual block: x + [pad, conv3, norm, SRM, ReLU, pad, conv3, norm, SRM](x).
/// With `use_srm` false the SRM stages are skipped (plain residual block).
class SrmConvBlock : public nn::Module {
 public:
  SrmConvBlock(int channels, std::mt19937_64& rng, bool use_srm = true,
               bool affine_norm = false);
  Var forward(const Var& x) const;

  int channels() const { return channels_; }
  nn::Conv2d& conv1() { return conv1_; }
  nn::Conv2d& conv2() { return conv2_; }
  SrmLayer* srm1() { return srm1_.get(); }
  SrmLayer* srm2() { return srm2_.get(); }

 private:
  int channels_;
  nn::Conv2d conv1_;
  nn::InstanceNorm2d norm1_;
  std::unique_ptr<SrmLayer> srm1_;
  nn::Conv2d conv2_;
  nn::InstanceNorm2d norm2_;
  std::unique_ptr<SrmLayer> srm2_;
};

}  // namespace rsit::srm
