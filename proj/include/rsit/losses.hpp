#pragma once

#include <span>

#include "rsit/autograd.hpp"

namespace rsit::losses {

/// Components of one network's objective. All entries are non-negative.
struct LossReport {
  double gan = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double style = 0.0;
  double total = 0.0;
};

struct ObjectiveWeights {
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  /// Weight of the style term in the generator objective; 0 unless style_to_generator.
  double style_to_generator = 0.0;
};

/// mean (d - 1)^2
double gan_loss_generator(std::span<const double> decisions);
/// mean (d_real - 1)^2 + mean d_fake^2
double gan_loss_discriminator(std::span<const double> real, std::span<const double> fake);
/// Element-mean L1 distances.
double cycle_loss(const Tensor& x, const Tensor& reconstructed);
double identity_loss(const Tensor& y, const Tensor& mapped);
double style_loss(const Tensor& style_fake, const Tensor& style_real);

struct GeneratorTerms {
  double gan = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double style = 0.0;
};

/// total = gan + lambda_cyc * cycle + lambda_id * identity (+ style_to_generator * style).
LossReport generator_objective(const GeneratorTerms& terms, const ObjectiveWeights& weights = {});
/// total = gan + style.
LossReport discriminator_objective(double gan, double style);

/// Full system objective across both directions: the two adversarial terms, the two
/// style terms, and lambda times the summed cycle terms.
double system_objective(const GeneratorTerms& xy, const GeneratorTerms& yx, double lambda_cyc);

// Differentiable counterparts used during training.
Var gan_generator(const Var& decision);
Var gan_discriminator(const Var& real_decision, const Var& fake_decision);
Var l1(const Var& a, const Var& b);

}  // namespace rsit::losses
