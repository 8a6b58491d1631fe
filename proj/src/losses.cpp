#include "rsit/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "rsit/ops.hpp"

namespace rsit::losses {

namespace {

double mean_sq_to(std::span<const double> v, double target, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty decision batch");
  double s = 0.0;
  for (double d : v) s += (d - target) * (d - target);
  return s / static_cast<double>(v.size());
}

double mean_abs(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  if (a.empty()) throw ShapeError(std::string(what) + ": empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

double gan_loss_generator(std::span<const double> decisions) {
  return mean_sq_to(decisions, 1.0, "gan_loss_generator");
}

double gan_loss_discriminator(std::span<const double> real, std::span<const double> fake) {
  return mean_sq_to(real, 1.0, "gan_loss_discriminator") +
         mean_sq_to(fake, 0.0, "gan_loss_discriminator");
}

double cycle_loss(const Tensor& x, const Tensor& reconstructed) {
  return mean_abs(x, reconstructed, "cycle_loss");
}

double identity_loss(const Tensor& y, const Tensor& mapped) {
  return mean_abs(y, mapped, "identity_loss");
}

double style_loss(const Tensor& style_fake, const Tensor& style_real) {
  if (style_fake.size() != style_real.size()) {
    throw ShapeError("style_loss: length mismatch " + std::to_string(style_fake.size()) + " vs " +
                     std::to_string(style_real.size()));
  }
  return mean_abs(style_fake.reshaped({static_cast<int>(style_fake.size())}),
                  style_real.reshaped({static_cast<int>(style_real.size())}), "style_loss");
}

LossReport generator_objective(const GeneratorTerms& terms, const ObjectiveWeights& weights) {
  LossReport r;
  r.gan = terms.gan;
  r.cycle = terms.cycle;
  r.identity = terms.identity;
  r.style = terms.style;
  r.total = terms.gan + weights.lambda_cyc * terms.cycle + weights.lambda_id * terms.identity +
            weights.style_to_generator * terms.style;
  return r;
}

LossReport discriminator_objective(double gan, double style) {
  LossReport r;
  r.gan = gan;
  r.style = style;
  r.total = gan + style;
  return r;
}

double system_objective(const GeneratorTerms& xy, const GeneratorTerms& yx, double lambda_cyc) {
  return xy.gan + xy.style + yx.gan + yx.style + lambda_cyc * (xy.cycle + yx.cycle);
}

Var gan_generator(const Var& decision) { return ops::squared_error_to(decision, 1.0); }

Var gan_discriminator(const Var& real_decision, const Var& fake_decision) {
  return ops::add(ops::squared_error_to(real_decision, 1.0),
                  ops::squared_error_to(fake_decision, 0.0));
}

Var l1(const Var& a, const Var& b) { return ops::mean_abs_diff(a, b); }

}  // namespace rsit::losses
