#include "rsit/discriminator.hpp"

#include <cmath>

#include "rsit/ops.hpp"

namespace rsit {

int StyleVector::channels() const {
  const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(data.size()))));
  return n;
}

double StyleVector::entry(int i, int j) const {
  return data[static_cast<std::size_t>(i) * channels() + j];
}

DiscriminatorConfig DiscriminatorConfig::scaled(double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("discriminator scale must be > 0");
  DiscriminatorConfig c;
  for (int& w : c.widths) w = std::max(1, static_cast<int>(std::lround(w * scale)));
  return c;
}

int discriminator_downsamples(int size) {
  int stages = 0;
  int s = size;
  while (s > kStyleMapSize && s % 2 == 0) {
    s /= 2;
    ++stages;
  }
  if (s != kStyleMapSize || stages > 4) {
    throw ShapeError("discriminator input side " + std::to_string(size) +
                     " must be 16 * 2^k with k <= 4 so the style map is 16x16");
  }
  return stages;
}

Discriminator::Discriminator(const DiscriminatorConfig& config, std::mt19937_64& rng)
    : config_(config) {
  int in_c = 3;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    const int out_c = config.widths[i];
    if (out_c < 1) throw std::invalid_argument("discriminator widths must be positive");
    // Stride is chosen per call from the input size; 3x3/pad-1 keeps the weights valid for both.
    convs_.push_back(std::make_unique<nn::Conv2d>(in_c, out_c, 3, 1, 1, rng));
    register_module("conv" + std::to_string(i), *convs_.back());
    if (config.use_srm) {
      srms_.push_back(std::make_unique<srm::SrmLayer>(rng));
      register_module("srm" + std::to_string(i), *srms_.back());
    }
    in_c = out_c;
  }
  head_ = std::make_unique<nn::Conv2d>(in_c, 1, config.head_kernel, 1, 1, rng);
  register_module("head", *head_);
}

std::vector<nn::Conv2d*> Discriminator::encoder_convs() {
  std::vector<nn::Conv2d*> out;
  for (auto& c : convs_) out.push_back(c.get());
  return out;
}

Var Discriminator::encode(const Var& image) const {
  const Tensor& img = image.value();
  if (img.rank() != 3 || img.dim(0) != 3) {
    throw ShapeError("Discriminator: expected a [3, S, S] image, got " + shape_str(img.shape()));
  }
  if (img.dim(1) != img.dim(2)) {
    throw ShapeError("Discriminator: input must be square, got " + shape_str(img.shape()));
  }
  const int downsamples = discriminator_downsamples(img.dim(1));
  Var h = image;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const int stride = static_cast<int>(i) < downsamples ? 2 : 1;
    h = ops::conv2d(h, convs_[i]->weight(), convs_[i]->bias(), stride, 1, 1);
    if (!srms_.empty()) h = srms_[i]->forward(h);
    h = ops::leaky_relu(h, config_.leaky_slope);
  }
  return h;
}

Var Discriminator::decide(const Var& feature_map) const {
  return ops::mean(ops::sigmoid(head_->forward(feature_map)));
}

DiscriminatorGraph Discriminator::forward(const Var& image) const {
  Var m = encode(image);
  return {decide(m), style_vector(m)};
}

DiscriminatorOutput Discriminator::evaluate(const Tensor& image) const {
  NoGradGuard guard;
  auto g = forward(Var(image));
  return {g.decision.item(), StyleVector{g.style.value()}};
}

Var pool_fusion(const Var& feature_map) {
  const Tensor& m = feature_map.value();
  require_chw(m, "style_vector");
  if (m.dim(1) != kStyleMapSize || m.dim(2) != kStyleMapSize) {
    throw ShapeError("style_vector: feature map must be [C, 16, 16] so four 2x poolings reach "
                     "1x1, got " + shape_str(m.shape()));
  }
  Var h = feature_map;
  for (int stage = 0; stage < kFusionStages; ++stage) {
    h = ops::add(ops::max_pool2d(h, 2, 2), ops::avg_pool2d(h, 2, 2));
  }
  return ops::reshape(h, {m.dim(0)});
}

Var upper_correlation(const Var& v) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1 || vv.size() == 0) {
    throw ShapeError("upper_correlation: expected a non-empty vector, got " + shape_str(vv.shape()));
  }
  const int c = vv.dim(0);
  Tensor out(Shape{c * c});
  for (int i = 0; i < c; ++i)
    for (int j = i; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] =
          vv[static_cast<std::size_t>(i)] * vv[static_cast<std::size_t>(j)];
  return make_result(std::move(out), {v}, [c](const Tensor& g, std::vector<Var>& in) {
    const Tensor& x = in[0].value();
    Tensor& gx = in[0].grad_buffer();
    for (int i = 0; i < c; ++i) {
      for (int j = i; j < c; ++j) {
        const double gij = g[static_cast<std::size_t>(i * c + j)];
        gx[static_cast<std::size_t>(i)] += gij * x[static_cast<std::size_t>(j)];
        gx[static_cast<std::size_t>(j)] += gij * x[static_cast<std::size_t>(i)];
      }
    }
  });
}

Var style_vector(const Var& feature_map) { return upper_correlation(pool_fusion(feature_map)); }

StyleVector style_vector(const Tensor& feature_map) {
  NoGradGuard guard;
  return {style_vector(Var(feature_map)).value()};
}

double decide_from_logits(const Tensor& logits) {
  NoGradGuard guard;
  return ops::mean(ops::sigmoid(Var(logits))).item();
}

}  // namespace rsit

namespace rsit {

double discriminator_gmacs(const DiscriminatorConfig& config, int size) {
  const int downsamples = discriminator_downsamples(size);
  double macs = 0.0;
  int side = size, in_c = 3;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    if (static_cast<int>(i) < downsamples) side /= 2;
    macs += static_cast<double>(side) * side * config.widths[i] * in_c * 9;
    in_c = config.widths[i];
  }
  const int head_side = side + 2 - config.head_kernel + 1;
  macs += static_cast<double>(head_side) * head_side * in_c * config.head_kernel * config.head_kernel;
  return macs / 1e9;
}

}  // namespace rsit
