#include "rsit/nn.hpp"

#include "rsit/ops.hpp"

namespace rsit::nn {

std::vector<NamedParameter> Module::named_parameters() const {
  std::vector<NamedParameter> out;
  collect("", out);
  return out;
}

void Module::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
  for (const auto& p : params_) out.push_back({prefix + p.name, p.var});
  for (const auto& [name, child] : children_) child->collect(prefix + name + ".", out);
}

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (auto& p : named_parameters()) out.push_back(p.var);
  return out;
}

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.var.value().size();
  return n;
}

void Module::set_requires_grad(bool on) {
  for (auto& p : named_parameters()) p.var.set_requires_grad(on);
}

void Module::zero_grad() {
  for (auto& p : named_parameters()) p.var.zero_grad();
}

Var Module::register_parameter(std::string name, Tensor init) {
  Var v(std::move(init), true);
  params_.push_back({std::move(name), v});
  return v;
}

void Module::register_module(std::string name, Module& child) {
  children_.emplace_back(std::move(name), &child);
}

Tensor normal_init(Shape shape, double std, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std);
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

Conv2d::Conv2d(int in_c, int out_c, int k, int stride, int pad, std::mt19937_64& rng, bool bias,
               double init_std)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {
  weight_ = register_parameter("weight", normal_init({out_c, in_c, k, k}, init_std, rng));
  if (bias) bias_ = register_parameter("bias", Tensor::zeros({out_c}));
}

Var Conv2d::forward(const Var& x) const {
  return ops::conv2d(x, weight_, bias_, stride_, pad_, pad_);
}

ConvTranspose2d::ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad,
                                 int output_pad, std::mt19937_64& rng, double init_std)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), output_pad_(output_pad) {
  weight_ = register_parameter("weight", normal_init({in_c, out_c, k, k}, init_std, rng));
  bias_ = register_parameter("bias", Tensor::zeros({out_c}));
}

Var ConvTranspose2d::forward(const Var& x) const {
  return ops::conv_transpose2d(x, weight_, bias_, stride_, pad_, output_pad_);
}

InstanceNorm2d::InstanceNorm2d(int channels, bool affine, double eps) : eps_(eps) {
  if (affine) {
    gamma_ = register_parameter("weight", Tensor::full({channels}, 1.0));
    beta_ = register_parameter("bias", Tensor::zeros({channels}));
  }
}

Var InstanceNorm2d::forward(const Var& x) const {
  return ops::instance_norm(x, gamma_, beta_, eps_);
}

}  // namespace rsit::nn
