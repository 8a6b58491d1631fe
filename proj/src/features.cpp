#include "rsit/features.hpp"

#include <cmath>
#include <opencv2/imgproc.hpp>
#include <random>
#include <stdexcept>

#include "rsit/checkpoint.hpp"
#include "rsit/kernels.hpp"

namespace fs = std::filesystem;

namespace rsit::features {

namespace {

void relu_inplace(Tensor& t) {
  for (double& v : t.storage()) v = v > 0.0 ? v : 0.0;
}

Eigen::VectorXd global_average(const Tensor& t) {
  const int c = t.dim(0);
  const std::size_t hw = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  Eigen::VectorXd out(c);
  for (int k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += t[static_cast<std::size_t>(k) * hw + i];
    out(k) = s / static_cast<double>(hw);
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

void require_rgb(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) < 1 || image.dim(2) < 1) {
    throw ShapeError(std::string(what) + ": expected a [3, H, W] image, got " + shape_str(image.shape()));
  }
}

}  // namespace

TinyCnn::TinyCnn(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int widths[4] = {3, 16, 32, 64};
  for (int i = 0; i < 3; ++i) {
    const int in_c = widths[i], out_c = widths[i + 1];
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / (in_c * 9)));
    Tensor w(Shape{out_c, in_c, 3, 3});
    for (double& v : w.storage()) v = he(rng);
    conv_w_.push_back(std::move(w));
    conv_b_.push_back(Tensor::zeros({out_c}));
  }
  std::normal_distribution<double> fc(0.0, std::sqrt(1.0 / 64.0));
  fc_w_.resize(10, 64);
  for (Eigen::Index i = 0; i < fc_w_.size(); ++i) fc_w_.data()[i] = fc(rng);
  fc_b_ = Eigen::VectorXd::Zero(10);
}

FeatureOutput TinyCnn::extract(const Tensor& image) const {
  require_rgb(image, "tiny-cnn");
  Tensor h = image;
  for (std::size_t i = 0; i < conv_w_.size(); ++i) {
    h = kernels::conv2d(h, conv_w_[i], &conv_b_[i], 2, 1, 1);
    relu_inplace(h);
  }
  FeatureOutput out;
  out.features = global_average(h);
  out.probs = softmax(fc_w_ * out.features + fc_b_);
  return out;
}

namespace {

// Conv without bias followed by eval-mode batch norm (eps 1e-3) and ReLU, with the norm
// folded into the convolution at load time.
struct BasicConv {
  Tensor w, b;
  int stride = 1, pad_h = 0, pad_w = 0;

  Tensor operator()(const Tensor& x) const {
    Tensor y = kernels::conv2d(x, w, &b, stride, pad_h, pad_w);
    relu_inplace(y);
    return y;
  }
};

Tensor concat(const std::vector<Tensor>& parts) {
  int c = 0;
  for (const auto& p : parts) c += p.dim(0);
  Tensor out(Shape{c, parts[0].dim(1), parts[0].dim(2)});
  std::size_t off = 0;
  for (const auto& p : parts) {
    if (p.dim(1) != out.dim(1) || p.dim(2) != out.dim(2)) throw ShapeError("inception: branch size mismatch");
    std::copy(p.storage().begin(), p.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.size();
  }
  return out;
}

Tensor avg3(const Tensor& x) { return kernels::avg_pool2d(x, 3, 1, 1, true); }
Tensor max3s2(const Tensor& x) { return kernels::max_pool2d(x, 3, 2, 0, nullptr); }

class InceptionV3 : public FeatureExtractor {
 public:
  explicit InceptionV3(const ckpt::Container& c) : c_(c) {
    stem_ = {conv("Conv2d_1a_3x3", 2), conv("Conv2d_2a_3x3"), conv("Conv2d_2b_3x3", 1, 1, 1),
             conv("Conv2d_3b_1x1"), conv("Conv2d_4a_3x3")};
    fc_w_ = to_matrix(c_.get("fc.weight"));
    const Tensor& fb = c_.get("fc.bias");
    fc_b_ = Eigen::Map<const Eigen::VectorXd>(fb.ptr(), static_cast<Eigen::Index>(fb.size()));
    for (const char* m : {"Mixed_5b", "Mixed_5c", "Mixed_5d"}) {
      const std::string p = m;
      a_.push_back({conv(p + ".branch1x1"), conv(p + ".branch5x5_1"), conv(p + ".branch5x5_2", 1, 2, 2),
                    conv(p + ".branch3x3dbl_1"), conv(p + ".branch3x3dbl_2", 1, 1, 1),
                    conv(p + ".branch3x3dbl_3", 1, 1, 1), conv(p + ".branch_pool")});
    }
    b_ = {conv("Mixed_6a.branch3x3", 2), conv("Mixed_6a.branch3x3dbl_1"),
          conv("Mixed_6a.branch3x3dbl_2", 1, 1, 1), conv("Mixed_6a.branch3x3dbl_3", 2)};
    for (const char* m : {"Mixed_6b", "Mixed_6c", "Mixed_6d", "Mixed_6e"}) {
      const std::string p = m;
      c7_.push_back({conv(p + ".branch1x1"), conv(p + ".branch7x7_1"), conv(p + ".branch7x7_2", 1, 0, 3),
                     conv(p + ".branch7x7_3", 1, 3, 0), conv(p + ".branch7x7dbl_1"),
                     conv(p + ".branch7x7dbl_2", 1, 3, 0), conv(p + ".branch7x7dbl_3", 1, 0, 3),
                     conv(p + ".branch7x7dbl_4", 1, 3, 0), conv(p + ".branch7x7dbl_5", 1, 0, 3),
                     conv(p + ".branch_pool")});
    }
    d_ = {conv("Mixed_7a.branch3x3_1"), conv("Mixed_7a.branch3x3_2", 2), conv("Mixed_7a.branch7x7x3_1"),
          conv("Mixed_7a.branch7x7x3_2", 1, 0, 3), conv("Mixed_7a.branch7x7x3_3", 1, 3, 0),
          conv("Mixed_7a.branch7x7x3_4", 2)};
    for (const char* m : {"Mixed_7b", "Mixed_7c"}) {
      const std::string p = m;
      e_.push_back({conv(p + ".branch1x1"), conv(p + ".branch3x3_1"), conv(p + ".branch3x3_2a", 1, 0, 1),
                    conv(p + ".branch3x3_2b", 1, 1, 0), conv(p + ".branch3x3dbl_1"),
                    conv(p + ".branch3x3dbl_2", 1, 1, 1), conv(p + ".branch3x3dbl_3a", 1, 0, 1),
                    conv(p + ".branch3x3dbl_3b", 1, 1, 0), conv(p + ".branch_pool")});
    }
    c_ = {};
  }

  std::string name() const override { return "pretrained-inception"; }
  int feature_dim() const override { return 2048; }
  int classes() const override { return static_cast<int>(fc_b_.size()); }

  FeatureOutput extract(const Tensor& image) const override {
    require_rgb(image, "pretrained-inception");
    Tensor x = image.dim(1) == kSide && image.dim(2) == kSide ? image : resize(image);
    x = stem_[0](x);
    x = stem_[1](x);
    x = stem_[2](x);
    x = max3s2(x);
    x = stem_[3](x);
    x = stem_[4](x);
    x = max3s2(x);
    for (const auto& m : a_) {
      x = concat({m[0](x), m[2](m[1](x)), m[5](m[4](m[3](x))), m[6](avg3(x))});
    }
    x = concat({b_[0](x), b_[3](b_[2](b_[1](x))), max3s2(x)});
    for (const auto& m : c7_) {
      x = concat({m[0](x), m[3](m[2](m[1](x))), m[8](m[7](m[6](m[5](m[4](x))))), m[9](avg3(x))});
    }
    x = concat({d_[1](d_[0](x)), d_[5](d_[4](d_[3](d_[2](x)))), max3s2(x)});
    for (const auto& m : e_) {
      const Tensor t3 = m[1](x);
      const Tensor td = m[5](m[4](x));
      x = concat({m[0](x), m[2](t3), m[3](t3), m[6](td), m[7](td), m[8](avg3(x))});
    }
    FeatureOutput out;
    out.features = global_average(x);
    out.probs = softmax(fc_w_ * out.features + fc_b_);
    return out;
  }

  static constexpr int kSide = 299;

 private:
  BasicConv conv(const std::string& name, int stride = 1, int pad_h = 0, int pad_w = 0) const {
    const Tensor& w = c_.get(name + ".conv.weight");
    const Tensor& gamma = c_.get(name + ".bn.weight");
    const Tensor& beta = c_.get(name + ".bn.bias");
    const Tensor& mean = c_.get(name + ".bn.running_mean");
    const Tensor& var = c_.get(name + ".bn.running_var");
    BasicConv bc;
    bc.w = w;
    bc.b = Tensor(Shape{w.dim(0)});
    bc.stride = stride;
    bc.pad_h = pad_h;
    bc.pad_w = pad_w;
    const std::size_t per_out = w.size() / static_cast<std::size_t>(w.dim(0));
    for (int o = 0; o < w.dim(0); ++o) {
      const auto k = static_cast<std::size_t>(o);
      const double s = gamma[k] / std::sqrt(var[k] + 1e-3);
      for (std::size_t i = 0; i < per_out; ++i) bc.w[k * per_out + i] *= s;
      bc.b[k] = beta[k] - mean[k] * s;
    }
    return bc;
  }

  static Eigen::MatrixXd to_matrix(const Tensor& t) {
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (int i = 0; i < t.dim(0); ++i)
      for (int j = 0; j < t.dim(1); ++j) m(i, j) = t[static_cast<std::size_t>(i) * t.dim(1) + j];
    return m;
  }

  static Tensor resize(const Tensor& image) {
    Tensor out(Shape{3, kSide, kSide});
    for (int c = 0; c < 3; ++c) {
      cv::Mat src(image.dim(1), image.dim(2), CV_64F,
                  const_cast<double*>(image.ptr() + static_cast<std::size_t>(c) * image.dim(1) * image.dim(2)));
      cv::Mat dst(kSide, kSide, CV_64F, out.ptr() + static_cast<std::size_t>(c) * kSide * kSide);
      cv::resize(src, dst, cv::Size(kSide, kSide), 0, 0, cv::INTER_LINEAR);
    }
    return out;
  }

  ckpt::Container c_;
  std::vector<BasicConv> stem_;
  std::vector<std::vector<BasicConv>> a_, c7_, e_;
  std::vector<BasicConv> b_, d_;
  Eigen::MatrixXd fc_w_;
  Eigen::VectorXd fc_b_;
};

}  // namespace

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& kind, const fs::path& weights) {
  if (kind == "tiny-cnn") return std::make_unique<TinyCnn>();
  if (kind == "pretrained-inception") {
    if (weights.empty() || !fs::exists(weights)) {
      throw std::runtime_error(
          "pretrained-inception weights not found" +
          (weights.empty() ? std::string() : " at " + weights.string()) +
          "; export them with tools/export_inception.py and pass --weights, or use --extractor tiny-cnn");
    }
    auto c = ckpt::read(weights);
    if (c.meta.value("format", "") != "rsit-inception-v3") {
      throw std::runtime_error(weights.string() + " is not an exported Inception-v3 weight file");
    }
    return std::make_unique<InceptionV3>(c);
  }
  throw std::invalid_argument("unknown feature extractor '" + kind + "' (expected tiny-cnn or pretrained-inception)");
}

FeatureSet extract_all(const FeatureExtractor& extractor, const std::vector<Tensor>& images) {
  FeatureSet s;
  s.features.resize(static_cast<Eigen::Index>(images.size()), extractor.feature_dim());
  s.probs.resize(static_cast<Eigen::Index>(images.size()), extractor.classes());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto out = extractor.extract(images[i]);
    s.features.row(static_cast<Eigen::Index>(i)) = out.features.transpose();
    s.probs.row(static_cast<Eigen::Index>(i)) = out.probs.transpose();
  }
  return s;
}

}  // namespace rsit::features
