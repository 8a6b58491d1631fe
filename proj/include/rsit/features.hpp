#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rsit/metrics.hpp"
#include "rsit/tensor.hpp"

namespace rsit::features {

struct FeatureOutput {
  Eigen::VectorXd features;  // length feature_dim()
  Eigen::VectorXd probs;     // length classes(), sums to 1
};

/// Image -> (feature vector, class distribution). Images are [3, H, W] in [-1, 1].
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual int feature_dim() const = 0;
  virtual int classes() const = 0;
  virtual FeatureOutput extract(const Tensor& image) const = 0;
};

/// Small fixed random CNN: three stride-2 3x3 convs with ReLU, global average pooling to
/// 64 features, linear layer to 10 logits, softmax. Deterministic in `seed`.
class TinyCnn : public FeatureExtractor {
 public:
  explicit TinyCnn(std::uint64_t seed = 20240601);
  std::string name() const override { return "tiny-cnn"; }
  int feature_dim() const override { return 64; }
  int classes() const override { return 10; }
  FeatureOutput extract(const Tensor& image) const override;

 private:
  std::vector<Tensor> conv_w_, conv_b_;
  Eigen::MatrixXd fc_w_;
  Eigen::VectorXd fc_b_;
};

/// Builds "tiny-cnn" or "pretrained-inception". The latter reads an exported weight file
/// and throws std::runtime_error suggesting tiny-cnn when it is missing.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& kind,
                                                 const std::filesystem::path& weights = {});

struct FeatureSet {
  metrics::FeatureMatrix features;  // one row per image
  metrics::FeatureMatrix probs;
};

FeatureSet extract_all(const FeatureExtractor& extractor, const std::vector<Tensor>& images);

}  // namespace rsit::features
