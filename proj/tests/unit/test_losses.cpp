#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "rsit/losses.hpp"

using namespace rsit;
using namespace rsit::losses;
using rsit::testing::random_tensor;

namespace {

constexpr double kTol = 1e-9;

Tensor vec(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

}  // namespace

TEST_CASE("least-squares generator loss") {
  CHECK(gan_loss_generator(std::vector<double>{1.0, 1.0, 1.0}) == 0.0);
  CHECK(gan_loss_generator(std::vector<double>{0.0, 0.0}) == 1.0);
  CHECK(std::abs(gan_loss_generator(std::vector<double>{0.5}) - 0.25) < kTol);
  CHECK_THROWS_AS(gan_loss_generator(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("least-squares discriminator loss") {
  CHECK(gan_loss_discriminator(std::vector<double>{1.0}, std::vector<double>{0.0}) == 0.0);
  CHECK(gan_loss_discriminator(std::vector<double>{0.0}, std::vector<double>{1.0}) == 2.0);
  CHECK(std::abs(gan_loss_discriminator(std::vector<double>{0.8}, std::vector<double>{0.3}) - 0.13) < kTol);
  CHECK_THROWS_AS(gan_loss_discriminator(std::vector<double>{}, std::vector<double>{0.1}), std::invalid_argument);
}

TEST_CASE("unique minimisers of the adversarial losses") {
  for (double d = 0.0; d <= 1.0; d += 0.125) {
    const double g = gan_loss_generator(std::vector<double>{d});
    CHECK((g == 0.0) == (d == 1.0));
    for (double f = 0.0; f <= 1.0; f += 0.125) {
      const double v = gan_loss_discriminator(std::vector<double>{d}, std::vector<double>{f});
      CHECK((v == 0.0) == (d == 1.0 && f == 0.0));
    }
  }
}

TEST_CASE("cycle loss") {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({3, 4, 4}, rng);
  CHECK(cycle_loss(x, x) == 0.0);
  CHECK(std::abs(cycle_loss(Tensor({3, 4, 4}), Tensor::full({3, 4, 4}, 0.5)) - 0.5) < kTol);
  CHECK(std::abs(cycle_loss(vec({0.0, 1.0}), vec({1.0, 0.0})) - 1.0) < kTol);
  CHECK_THROWS_AS(cycle_loss(Tensor({3, 4, 4}), Tensor({3, 4, 5})), ShapeError);
}

TEST_CASE("identity loss") {
  std::mt19937_64 rng(2);
  Tensor y = random_tensor({3, 4, 4}, rng);
  CHECK(identity_loss(y, y) == 0.0);
  Tensor shifted = y;
  for (double& v : shifted.storage()) v += 0.25;
  CHECK(std::abs(identity_loss(y, shifted) - 0.25) < kTol);
  CHECK(std::abs(identity_loss(vec({0.0, 0.0}), vec({-0.2, 0.4})) - 0.3) < kTol);
  CHECK_THROWS_AS(identity_loss(vec({0.0}), vec({0.0, 1.0})), ShapeError);
}

TEST_CASE("L1 distances are symmetric and satisfy the triangle inequality") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({2, 3, 3}, rng), c = random_tensor({2, 3, 3}, rng);
    CHECK(cycle_loss(a, b) == cycle_loss(b, a));
    CHECK(identity_loss(a, c) <= identity_loss(a, b) + identity_loss(b, c) + 1e-15);
    CHECK(cycle_loss(a, b) >= 0.0);
  }
}

TEST_CASE("style loss") {
  CHECK(style_loss(vec({1, 2, 0, 4}), vec({1, 2, 0, 4})) == 0.0);
  CHECK(std::abs(style_loss(vec({1, 2, 0, 4}), vec({0, 2, 0, 1})) - 1.0) < kTol);
  CHECK(style_loss(vec({0, 2, 0, 1}), vec({1, 2, 0, 4})) == style_loss(vec({1, 2, 0, 4}), vec({0, 2, 0, 1})));
  CHECK_THROWS_AS(style_loss(vec({1, 2, 0, 4}), vec({1, 2, 0})), ShapeError);
}

TEST_CASE("generator objective") {
  CHECK(generator_objective({}).total == 0.0);
  auto r = generator_objective({1.0, 0.1, 0.0, 0.0});
  CHECK(std::abs(r.total - 2.0) < kTol);
  CHECK(r.gan == 1.0);
  CHECK(r.cycle == 0.1);
  SUBCASE("identity weight and optional style term") {
    auto s = generator_objective({0.0, 0.0, 0.2, 0.7});
    CHECK(std::abs(s.total - 1.0) < kTol);  // 5 * 0.2, style excluded by default
    auto t = generator_objective({0.0, 0.0, 0.2, 0.7}, {10.0, 5.0, 1.0});
    CHECK(std::abs(t.total - 1.7) < kTol);
  }
  SUBCASE("monotone in every component") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
      GeneratorTerms base{u(rng), u(rng), u(rng), u(rng)};
      const double t0 = generator_objective(base, {10.0, 5.0, 1.0}).total;
      for (int k = 0; k < 4; ++k) {
        GeneratorTerms up = base;
        double* f[4] = {&up.gan, &up.cycle, &up.identity, &up.style};
        *f[k] += u(rng);
        CHECK(generator_objective(up, {10.0, 5.0, 1.0}).total >= t0);
      }
    }
  }
}

TEST_CASE("discriminator objective") {
  CHECK(discriminator_objective(0.0, 0.0).total == 0.0);
  CHECK(std::abs(discriminator_objective(0.13, 1.0).total - 1.13) < kTol);
  const double plain = gan_loss_discriminator(std::vector<double>{0.8}, std::vector<double>{0.3});
  CHECK(discriminator_objective(plain, 0.0).total == plain);
}

TEST_CASE("system objective composition") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    GeneratorTerms xy{u(rng), u(rng), u(rng), u(rng)}, yx{u(rng), u(rng), u(rng), u(rng)};
    const double by_hand = xy.gan + yx.gan + xy.style + yx.style + 10.0 * (xy.cycle + yx.cycle);
    CHECK(std::abs(system_objective(xy, yx, 10.0) - by_hand) < kTol);
  }
}

TEST_CASE("differentiable losses agree with scalar versions") {
  std::mt19937_64 rng(6);
  Tensor a = random_tensor({3, 4, 4}, rng), b = random_tensor({3, 4, 4}, rng);
  CHECK(l1(Var(a), Var(b)).item() == doctest::Approx(cycle_loss(a, b)).epsilon(1e-14));
  CHECK(gan_generator(Var(Tensor::scalar(0.5))).item() == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(gan_discriminator(Var(Tensor::scalar(0.8)), Var(Tensor::scalar(0.3))).item() ==
        doctest::Approx(0.13).epsilon(1e-14));
}
