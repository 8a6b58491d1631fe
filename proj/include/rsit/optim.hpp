#pragma once

#include <cstdint>
#include <vector>

#include "rsit/nn.hpp"

namespace rsit::optim {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of named parameters.
class Adam {
 public:
  Adam(std::vector<nn::NamedParameter> params, AdamConfig config = {});

  /// Applies one update with learning rate `lr` using the accumulated gradients.
  /// Parameters without a gradient are left untouched.
  void step(double lr);
  void zero_grad();

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<nn::NamedParameter>& params() const { return params_; }

  // Moment access for checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  std::vector<nn::NamedParameter> params_;
  AdamConfig config_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace rsit::optim
