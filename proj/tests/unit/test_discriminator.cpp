#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "rsit/discriminator.hpp"
#include "rsit/ops.hpp"

using namespace rsit;
using rsit::testing::grad_check;
using rsit::testing::random_projection;
using rsit::testing::random_tensor;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_CASE("encoder reaches a 16x16 style map") {
  std::mt19937_64 rng(1);
  SUBCASE("full scale at 256") {
    Discriminator d(DiscriminatorConfig{}, rng);
    Var m = d.encode(Var(random_tensor({3, 256, 256}, rng)));
    CHECK(m.shape() == Shape{512, 16, 16});
  }
  SUBCASE("desk scale at 64") {
    Discriminator d(DiscriminatorConfig::scaled(0.125), rng);
    Var m = d.encode(Var(random_tensor({3, 64, 64}, rng)));
    CHECK(m.shape() == Shape{64, 16, 16});
  }
  SUBCASE("stride budget") {
    CHECK(discriminator_downsamples(16) == 0);
    CHECK(discriminator_downsamples(64) == 2);
    CHECK(discriminator_downsamples(256) == 4);
    CHECK_THROWS_AS(discriminator_downsamples(8), ShapeError);
    CHECK_THROWS_AS(discriminator_downsamples(48), ShapeError);
    CHECK_THROWS_AS(discriminator_downsamples(512), ShapeError);
  }
  SUBCASE("rejects non-square and tiny inputs") {
    Discriminator d(DiscriminatorConfig::scaled(0.125), rng);
    CHECK_THROWS_AS(d.encode(Var(Tensor({3, 64, 32}))), ShapeError);
    CHECK_THROWS_AS(d.encode(Var(Tensor({3, 8, 8}))), ShapeError);
    CHECK_THROWS_AS(d.encode(Var(Tensor({1, 64, 64}))), ShapeError);
  }
  SUBCASE("zero image and zero weights give a zero map") {
    Discriminator d(DiscriminatorConfig::scaled(0.125), rng);
    for (auto& p : d.parameters()) p.mutable_value().fill(0.0);
    Var m = d.encode(Var(Tensor({3, 64, 64})));
    CHECK(m.value().max_abs() == 0.0);
  }
}

TEST_CASE("patch decision averaging") {
  SUBCASE("zero logits") { CHECK(decide_from_logits(Tensor({1, 5, 5})) == 0.5); }
  SUBCASE("saturated logits") {
    CHECK(decide_from_logits(Tensor::full({1, 3, 3}, 800.0)) == 1.0);
    CHECK(decide_from_logits(Tensor::full({1, 3, 3}, 40.0)) > 1.0 - 1e-15);
  }
  SUBCASE("mean of patch probabilities") {
    Tensor l({1, 2, 2}, {logit(0.2), logit(0.4), logit(0.6), logit(0.8)});
    CHECK(decide_from_logits(l) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("invariant to patch order") {
    std::mt19937_64 rng(2);
    Tensor l = random_tensor({1, 6, 6}, rng, -4.0, 4.0);
    Tensor p = l;
    std::shuffle(p.storage().begin(), p.storage().end(), rng);
    CHECK(decide_from_logits(l) == doctest::Approx(decide_from_logits(p)).epsilon(1e-14));
  }
}

TEST_CASE("style vector algebra") {
  SUBCASE("two channels by hand") {
    Var s = upper_correlation(Var(Tensor({2}, {1.0, 2.0})));
    const std::vector<double> expect{1.0, 2.0, 0.0, 4.0};
    for (std::size_t i = 0; i < 4; ++i) CHECK(s.value()[i] == expect[i]);
  }
  SUBCASE("zero summary") {
    Var s = upper_correlation(Var(Tensor({5})));
    CHECK(s.value().max_abs() == 0.0);
  }
  SUBCASE("constant map fuses to v * 2^4") {
    StyleVector sv = style_vector(Tensor::full({3, 16, 16}, 0.75));
    const double v = 0.75 * 16.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(sv.entry(i, j) == doctest::Approx(i <= j ? v * v : 0.0).epsilon(1e-14));
    Var fused = pool_fusion(Var(Tensor::full({2, 16, 16}, -1.5)));
    CHECK(fused.shape() == Shape{2});
    CHECK(fused.value()[0] == -24.0);
  }
  SUBCASE("structure and quadratic scaling for random summaries") {
    std::mt19937_64 rng(3);
    for (int c : {2, 4, 8}) {
      Tensor v = random_tensor({c}, rng, 0.1, 2.0);
      Tensor sv = upper_correlation(Var(v)).value();
      REQUIRE(sv.size() == static_cast<std::size_t>(c * c));
      int zeros = 0;
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) {
          const double e = sv[static_cast<std::size_t>(i * c + j)];
          if (i > j) CHECK(e == 0.0);
          if (e == 0.0) ++zeros;
          if (i == j) CHECK(e >= 0.0);
        }
      CHECK(zeros == c * (c - 1) / 2);
      const double alpha = -1.7;
      Tensor va = v;
      va *= alpha;
      Tensor sa = upper_correlation(Var(va)).value();
      for (std::size_t k = 0; k < sv.size(); ++k) CHECK(std::abs(sa[k] - alpha * alpha * sv[k]) < 1e-9);
    }
  }
  SUBCASE("masking is idempotent") {
    std::mt19937_64 rng(4);
    const int c = 6;
    Tensor sv = upper_correlation(Var(random_tensor({c}, rng))).value();
    Tensor remasked = sv;
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < i; ++j) remasked[static_cast<std::size_t>(i * c + j)] = 0.0;
    for (std::size_t k = 0; k < sv.size(); ++k) CHECK(remasked[k] == sv[k]);
  }
  SUBCASE("rejects maps that do not reduce to 1x1 in four stages") {
    CHECK_THROWS_AS(style_vector(Tensor({2, 8, 8})), ShapeError);
    CHECK_THROWS_AS(style_vector(Tensor({2, 32, 32})), ShapeError);
  }
  SUBCASE("style head gradient") {
    std::mt19937_64 rng(5);
    Var m(random_tensor({3, 16, 16}, rng), true);
    Tensor r = random_tensor({9}, rng);
    auto res = grad_check([&] { return random_projection(style_vector(m), r); }, {m}, 1e-6, 128);
    CHECK(res.rel_error < 1e-7);
  }
}

TEST_CASE("discriminator forward") {
  std::mt19937_64 rng(6);
  Discriminator d(DiscriminatorConfig::scaled(0.125), rng);
  const int c = d.config().widths.back();
  for (int trial = 0; trial < 3; ++trial) {
    auto out = d.evaluate(random_tensor({3, 64, 64}, rng));
    CHECK(out.decision >= 0.0);
    CHECK(out.decision <= 1.0);
    REQUIRE(out.style.data.size() == static_cast<std::size_t>(c * c));
    int lower_zeros = 0;
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < i; ++j) lower_zeros += out.style.entry(i, j) == 0.0;
    CHECK(lower_zeros == c * (c - 1) / 2);
  }
}

TEST_CASE("discriminator gradient through both heads") {
  std::mt19937_64 rng(7);
  DiscriminatorConfig cfg = DiscriminatorConfig::scaled(0.0625);
  Discriminator d(cfg, rng);
  for (auto& p : d.parameters()) p.mutable_value() *= 10.0;
  Var x(random_tensor({3, 32, 32}, rng), true);
  const int c = cfg.widths.back();
  Tensor r = random_tensor({c * c}, rng);
  auto params = d.parameters();
  std::vector<Var> wrt{x};
  for (std::size_t i = 0; i < params.size(); i += 2) wrt.push_back(params[i]);
  auto loss = [&] {
    auto g = d.forward(x);
    return ops::add(ops::scale(g.decision, 3.0), random_projection(g.style, r));
  };
  auto res = grad_check(loss, wrt, 1e-6, 24);
  INFO("relative error " << res.rel_error);
  CHECK(res.rel_error < 1e-3);
}
