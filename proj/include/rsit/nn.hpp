#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rsit/autograd.hpp"

namespace rsit::nn {

struct NamedParameter {
  std::string name;
  Var var;
};

/// Owns named parameters and child modules. Children are registered by address, so
/// modules are neither copyable nor movable; hold them by value inside their parent
/// or through unique_ptr.
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  /// Depth-first, registration order, dotted names ("blocks.3.conv1.weight").
  std::vector<NamedParameter> named_parameters() const;
  std::vector<Var> parameters() const;
  std::size_t parameter_count() const;

  void set_requires_grad(bool on);
  void zero_grad();

 protected:
  Var register_parameter(std::string name, Tensor init);
  void register_module(std::string name, Module& child);

 private:
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;

  std::vector<NamedParameter> params_;
  std::vector<std::pair<std::string, Module*>> children_;
};

/// N(0, std) initialization, the convention for this model family.
Tensor normal_init(Shape shape, double std, std::mt19937_64& rng);

/// Zero-padded 2-d convolution, weight [out, in, k, k] plus bias [out].
class Conv2d : public Module {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad, std::mt19937_64& rng,
         bool bias = true, double init_std = 0.02);
  Var forward(const Var& x) const;

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  Var weight_, bias_;
};

/// Fractionally-strided convolution, weight [in, out, k, k] plus bias [out].
class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad, int output_pad,
                  std::mt19937_64& rng, double init_std = 0.02);
  Var forward(const Var& x) const;

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }
  int kernel() const { return k_; }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  int in_c_, out_c_, k_, stride_, pad_, output_pad_;
  Var weight_, bias_;
};

class InstanceNorm2d : public Module {
 public:
  explicit InstanceNorm2d(int channels, bool affine = false, double eps = 1e-5);
  Var forward(const Var& x) const;

 private:
  double eps_;
  Var gamma_, beta_;
};

}  // namespace rsit::nn
