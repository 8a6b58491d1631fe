#include "rsit/srm.hpp"

#include <cmath>

#include "rsit/ops.hpp"

namespace rsit::srm {

Var style_pool(const Var& feature_map, double eps) {
  const Tensor& f = feature_map.value();
  require_chw(f, "style_pool");
  const int c = f.dim(0);
  const std::size_t plane = static_cast<std::size_t>(f.dim(1)) * f.dim(2);
  const double n = static_cast<double>(plane);
  Tensor t(Shape{c, 2});
  for (int ch = 0; ch < c; ++ch) {
    const double* p = f.ptr() + ch * plane;
    double mu = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mu += p[i];
    mu /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mu) * (p[i] - mu);
    var /= n;
    t[static_cast<std::size_t>(2 * ch)] = mu;
    t[static_cast<std::size_t>(2 * ch + 1)] = std::sqrt(var + eps);
  }
  Tensor saved = t;
  return make_result(std::move(t), {feature_map},
                     [stats = std::move(saved), c, plane, n](const Tensor& g,
                                                             std::vector<Var>& in) {
                       const Tensor& x = in[0].value();
                       Tensor& gx = in[0].grad_buffer();
                       for (int ch = 0; ch < c; ++ch) {
                         const double mu = stats[static_cast<std::size_t>(2 * ch)];
                         const double sigma = stats[static_cast<std::size_t>(2 * ch + 1)];
                         const double g_mu = g[static_cast<std::size_t>(2 * ch)] / n;
                         // d sigma / d x_i = (x_i - mu) / (n sigma); zero subgradient at sigma = 0.
                         const double g_sigma =
                             sigma > 0 ? g[static_cast<std::size_t>(2 * ch + 1)] / (n * sigma) : 0.0;
                         const double* p = x.ptr() + ch * plane;
                         double* q = gx.ptr() + ch * plane;
                         for (std::size_t i = 0; i < plane; ++i) q[i] += g_mu + g_sigma * (p[i] - mu);
                       }
                     });
}

Var style_integrate(const Var& style, const Var& weight, const Var& bias) {
  const Tensor& t = style.value();
  if (t.rank() != 2 || t.dim(1) != 2 || t.dim(0) < 1) {
    throw ShapeError("style_integrate: style must be [C, 2], got " + shape_str(t.shape()));
  }
  if (weight.value().size() != 2 || bias.value().size() != 1) {
    throw ShapeError("style_integrate: kernel must have 2 taps and 1 bias, got " +
                     shape_str(weight.shape()) + " and " + shape_str(bias.shape()));
  }
  const int c = t.dim(0);
  const double w0 = weight.value()[0], w1 = weight.value()[1], b = bias.value()[0];
  Tensor g(Shape{c, 1});
  for (int ch = 0; ch < c; ++ch) {
    const double z = w0 * t[static_cast<std::size_t>(2 * ch)] +
                     w1 * t[static_cast<std::size_t>(2 * ch + 1)] + b;
    g[static_cast<std::size_t>(ch)] = 1.0 / (1.0 + std::exp(-z));
  }
  Tensor saved = g;
  return make_result(std::move(g), {style, weight, bias},
                     [gate = std::move(saved), c](const Tensor& grad, std::vector<Var>& in) {
                       const Tensor& tv = in[0].value();
                       const double w0 = in[1].value()[0], w1 = in[1].value()[1];
                       double gw0 = 0.0, gw1 = 0.0, gb = 0.0;
                       Tensor* gt = in[0].requires_grad() ? &in[0].grad_buffer() : nullptr;
                       for (int ch = 0; ch < c; ++ch) {
                         const double s = gate[static_cast<std::size_t>(ch)];
                         const double dz = grad[static_cast<std::size_t>(ch)] * s * (1.0 - s);
                         gw0 += dz * tv[static_cast<std::size_t>(2 * ch)];
                         gw1 += dz * tv[static_cast<std::size_t>(2 * ch + 1)];
                         gb += dz;
                         if (gt) {
                           (*gt)[static_cast<std::size_t>(2 * ch)] += dz * w0;
                           (*gt)[static_cast<std::size_t>(2 * ch + 1)] += dz * w1;
                         }
                       }
                       if (in[1].requires_grad()) {
                         in[1].grad_buffer()[0] += gw0;
                         in[1].grad_buffer()[1] += gw1;
                       }
                       if (in[2].requires_grad()) in[2].grad_buffer()[0] += gb;
                     });
}

Var recalibrate(const Var& feature_map, const Var& weights) {
  const Tensor& f = feature_map.value();
  require_chw(f, "recalibrate");
  const int c = f.dim(0);
  if (weights.value().size() != static_cast<std::size_t>(c)) {
    throw ShapeError("recalibrate: " + std::to_string(weights.value().size()) +
                     " weights for " + std::to_string(c) + " channels");
  }
  const std::size_t plane = static_cast<std::size_t>(f.dim(1)) * f.dim(2);
  Tensor out = f;
  for (int ch = 0; ch < c; ++ch) {
    const double s = weights.value()[static_cast<std::size_t>(ch)];
    double* p = out.ptr() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] *= s;
  }
  return make_result(std::move(out), {feature_map, weights},
                     [c, plane](const Tensor& g, std::vector<Var>& in) {
                       const Tensor& x = in[0].value();
                       const Tensor& s = in[1].value();
                       Tensor* gx = in[0].requires_grad() ? &in[0].grad_buffer() : nullptr;
                       Tensor* gs = in[1].requires_grad() ? &in[1].grad_buffer() : nullptr;
                       for (int ch = 0; ch < c; ++ch) {
                         const double* gp = g.ptr() + ch * plane;
                         const double* xp = x.ptr() + ch * plane;
                         const double sc = s[static_cast<std::size_t>(ch)];
                         double acc = 0.0;
                         for (std::size_t i = 0; i < plane; ++i) {
                           acc += gp[i] * xp[i];
                           if (gx) gx->ptr()[ch * plane + i] += sc * gp[i];
                         }
                         if (gs) (*gs)[static_cast<std::size_t>(ch)] += acc;
                       }
                     });
}

StyleDescriptor style_pool(const Tensor& feature_map) {
  NoGradGuard guard;
  return {style_pool(Var(feature_map), 0.0).value()};
}

StyleWeights style_integrate(const StyleDescriptor& style, const IntegrationKernel& kernel) {
  NoGradGuard guard;
  Var w(Tensor(Shape{2}, {kernel.w_mean, kernel.w_std}));
  Var b(Tensor::scalar(kernel.bias));
  return {style_integrate(Var(style.data), w, b).value()};
}

Tensor recalibrate(const Tensor& feature_map, const StyleWeights& weights) {
  NoGradGuard guard;
  return recalibrate(Var(feature_map), Var(weights.data)).value();
}

Tensor srm_layer(const Tensor& feature_map, const IntegrationKernel& kernel) {
  NoGradGuard guard;
  Var f(feature_map);
  Var w(Tensor(Shape{2}, {kernel.w_mean, kernel.w_std}));
  Var b(Tensor::scalar(kernel.bias));
  return recalibrate(f, style_integrate(style_pool(f, kStyleEps), w, b)).value();
}

SrmLayer::SrmLayer(std::mt19937_64& rng, double init_std) {
  weight_ = register_parameter("weight", nn::normal_init({2}, init_std, rng));
  bias_ = register_parameter("bias", Tensor::zeros({1}));
}

Var SrmLayer::forward(const Var& x) const {
  return recalibrate(x, style_integrate(style_pool(x, kStyleEps), weight_, bias_));
}

IntegrationKernel SrmLayer::kernel() const {
  return {weight_.value()[0], weight_.value()[1], bias_.value()[0]};
}

void SrmLayer::set_kernel(const IntegrationKernel& k) {
  weight_.mutable_value()[0] = k.w_mean;
  weight_.mutable_value()[1] = k.w_std;
  bias_.mutable_value()[0] = k.bias;
}

SrmConvBlock::SrmConvBlock(int channels, std::mt19937_64& rng, bool use_srm, bool affine_norm)
    : channels_(channels),
      conv1_(channels, channels, 3, 1, 0, rng),
      norm1_(channels, affine_norm),
      srm1_(use_srm ? std::make_unique<SrmLayer>(rng) : nullptr),
      conv2_(channels, channels, 3, 1, 0, rng),
      norm2_(channels, affine_norm),
      srm2_(use_srm ? std::make_unique<SrmLayer>(rng) : nullptr) {
  register_module("conv1", conv1_);
  register_module("norm1", norm1_);
  if (srm1_) register_module("srm1", *srm1_);
  register_module("conv2", conv2_);
  register_module("norm2", norm2_);
  if (srm2_) register_module("srm2", *srm2_);
}

Var SrmConvBlock::forward(const Var& x) const {
  if (x.value().rank() != 3 || x.value().dim(0) != channels_) {
    throw ShapeError("SrmConvBlock: expected " + std::to_string(channels_) +
                     " channels, got input " + shape_str(x.shape()));
  }
  Var h = norm1_.forward(conv1_.forward(ops::reflection_pad2d(x, 1)));
  if (srm1_) h = srm1_->forward(h);
  h = ops::relu(h);
  h = norm2_.forward(conv2_.forward(ops::reflection_pad2d(h, 1)));
  if (srm2_) h = srm2_->forward(h);
  return ops::add(x, h);
}

}  // namespace rsit::srm
