#include "rsit/optim.hpp"

#include <cmath>

namespace rsit::optim {

Adam::Adam(std::vector<nn::NamedParameter> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.var.shape()));
    v_.push_back(Tensor::zeros(p.var.shape()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i].var;
    if (!p.has_grad()) continue;
    const Tensor& g = p.grad_buffer();
    Tensor& w = p.mutable_value();
    double* m = m_[i].ptr();
    double* v = v_[i].ptr();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

}  // namespace rsit::optim
