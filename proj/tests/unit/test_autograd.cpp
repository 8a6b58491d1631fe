#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "rsit/kernels.hpp"
#include "rsit/ops.hpp"

using namespace rsit;
using rsit::testing::grad_check;
using rsit::testing::random_projection;
using rsit::testing::random_tensor;

namespace {

// Direct-summation convolution used as the forward oracle.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int oc = w.dim(0), ic = w.dim(1), k = w.dim(2);
  const int oh = (x.dim(1) + 2 * pad - k) / stride + 1;
  const int ow = (x.dim(2) + 2 * pad - k) / stride + 1;
  Tensor y({oc, oh, ow});
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        double s = b[o];
        for (int c = 0; c < ic; ++c)
          for (int a = 0; a < k; ++a)
            for (int d = 0; d < k; ++d) {
              const int yy = i * stride - pad + a, xx = j * stride - pad + d;
              if (yy < 0 || xx < 0 || yy >= x.dim(1) || xx >= x.dim(2)) continue;
              s += w[((static_cast<std::size_t>(o) * ic + c) * k + a) * k + d] * x.at(c, yy, xx);
            }
        y.at(o, i, j) = s;
      }
  return y;
}

// Scatter form of the transposed convolution.
Tensor naive_conv_transpose(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                            int pad, int out_pad) {
  const int ic = w.dim(0), oc = w.dim(1), k = w.dim(2);
  const int oh = (x.dim(1) - 1) * stride - 2 * pad + k + out_pad;
  const int ow = (x.dim(2) - 1) * stride - 2 * pad + k + out_pad;
  Tensor y({oc, oh, ow});
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) y.at(o, i, j) = b[o];
  for (int c = 0; c < ic; ++c)
    for (int i = 0; i < x.dim(1); ++i)
      for (int j = 0; j < x.dim(2); ++j)
        for (int o = 0; o < oc; ++o)
          for (int a = 0; a < k; ++a)
            for (int d = 0; d < k; ++d) {
              const int yy = i * stride - pad + a, xx = j * stride - pad + d;
              if (yy < 0 || xx < 0 || yy >= oh || xx >= ow) continue;
              y.at(o, yy, xx) +=
                  w[((static_cast<std::size_t>(c) * oc + o) * k + a) * k + d] * x.at(c, i, j);
            }
  return y;
}

double max_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("conv2d forward matches direct summation") {
  std::mt19937_64 rng(1);
  for (auto [stride, pad, k] : {std::tuple{1, 0, 3}, {1, 1, 3}, {2, 1, 3}, {2, 1, 4}, {1, 0, 1}}) {
    Tensor x = random_tensor({3, 9, 8}, rng);
    Tensor w = random_tensor({4, 3, k, k}, rng);
    Tensor b = random_tensor({4}, rng);
    CHECK(max_diff(kernels::conv2d(x, w, &b, stride, pad, pad),
                   naive_conv(x, w, b, stride, pad)) < 1e-12);
  }
}

TEST_CASE("conv_transpose2d forward matches scatter form") {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({4, 5, 6}, rng);
  Tensor w = random_tensor({4, 2, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  Tensor y = kernels::conv_transpose2d(x, w, &b, 2, 1, 1);
  CHECK(y.shape() == Shape{2, 10, 12});
  CHECK(max_diff(y, naive_conv_transpose(x, w, b, 2, 1, 1)) < 1e-12);
}

TEST_CASE("reflection padding mirrors without repeating the edge") {
  Tensor x({1, 1, 3}, {1.0, 2.0, 3.0});
  Tensor y = kernels::reflection_pad2d(Tensor({1, 2, 3}, {1, 2, 3, 4, 5, 6}), 1);
  CHECK(y.shape() == Shape{1, 4, 5});
  // Row 0 mirrors input row 1.
  CHECK(y.at(0, 0, 0) == 5.0);
  CHECK(y.at(0, 0, 1) == 4.0);
  CHECK(y.at(0, 1, 0) == 2.0);
  CHECK(y.at(0, 1, 4) == 2.0);
  CHECK_THROWS_AS(kernels::reflection_pad2d(x, 1), ShapeError);
}

TEST_CASE("gradients of convolution ops match finite differences") {
  std::mt19937_64 rng(3);
  SUBCASE("conv2d stride 2") {
    Var x(random_tensor({3, 8, 8}, rng), true), w(random_tensor({5, 3, 3, 3}, rng), true),
        b(random_tensor({5}, rng), true);
    Tensor r = random_tensor({5, 4, 4}, rng);
    auto res = grad_check([&] { return random_projection(ops::conv2d(x, w, b, 2, 1, 1), r); },
                          {x, w, b});
    CHECK(res.rel_error < 1e-7);
  }
  SUBCASE("conv2d pointwise") {
    Var x(random_tensor({3, 5, 5}, rng), true), w(random_tensor({2, 3, 1, 1}, rng), true);
    Tensor r = random_tensor({2, 5, 5}, rng);
    auto res = grad_check([&] { return random_projection(ops::conv2d(x, w, Var(), 1, 0, 0), r); },
                          {x, w});
    CHECK(res.rel_error < 1e-7);
  }
  SUBCASE("conv_transpose2d") {
    Var x(random_tensor({4, 4, 4}, rng), true), w(random_tensor({4, 3, 3, 3}, rng), true),
        b(random_tensor({3}, rng), true);
    Tensor r = random_tensor({3, 8, 8}, rng);
    auto res = grad_check(
        [&] { return random_projection(ops::conv_transpose2d(x, w, b, 2, 1, 1), r); }, {x, w, b});
    CHECK(res.rel_error < 1e-7);
  }
  SUBCASE("reflection pad") {
    Var x(random_tensor({2, 5, 6}, rng), true);
    Tensor r = random_tensor({2, 11, 12}, rng);
    auto res =
        grad_check([&] { return random_projection(ops::reflection_pad2d(x, 3), r); }, {x});
    CHECK(res.rel_error < 1e-7);
  }
}

TEST_CASE("gradients of normalization, activations and pooling match finite differences") {
  std::mt19937_64 rng(4);
  Var x(random_tensor({3, 6, 6}, rng), true);
  Tensor r = random_tensor({3, 6, 6}, rng);
  SUBCASE("instance norm") {
    auto res = grad_check(
        [&] { return random_projection(ops::instance_norm(x, Var(), Var()), r); }, {x});
    CHECK(res.rel_error < 1e-6);
  }
  SUBCASE("affine instance norm") {
    Var g(random_tensor({3}, rng), true), b(random_tensor({3}, rng), true);
    auto res =
        grad_check([&] { return random_projection(ops::instance_norm(x, g, b), r); }, {x, g, b});
    CHECK(res.rel_error < 1e-6);
  }
  SUBCASE("activations") {
    auto res = grad_check(
        [&] {
          Var h = ops::leaky_relu(x, 0.2);
          h = ops::add(ops::tanh(h), ops::sigmoid(ops::scale(x, 1.5)));
          h = ops::sub(ops::relu(h), ops::add_scalar(x, 0.3));
          return random_projection(h, r);
        },
        {x});
    CHECK(res.rel_error < 1e-7);
  }
  SUBCASE("pooling") {
    Tensor r3 = random_tensor({3, 3, 3}, rng);
    auto res = grad_check(
        [&] {
          return random_projection(ops::add(ops::max_pool2d(x, 2, 2), ops::avg_pool2d(x, 2, 2)),
                                   r3);
        },
        {x});
    CHECK(res.rel_error < 1e-7);
  }
  SUBCASE("losses and reductions") {
    Var y(random_tensor({3, 6, 6}, rng), true);
    auto res = grad_check(
        [&] {
          Var a = ops::squared_error_to(ops::reshape(x, {108}), 0.4);
          Var b = ops::mean_abs_diff(x, y);
          Var c = ops::mean(y);
          return ops::weighted_sum({a, b, c}, {1.0, 2.5, -0.7});
        },
        {x, y});
    CHECK(res.rel_error < 1e-7);
  }
}

TEST_CASE("graph bookkeeping") {
  SUBCASE("no-grad guard records nothing") {
    Var x(Tensor::full({2}, 1.0), true);
    NoGradGuard g;
    Var y = ops::scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
  }
  SUBCASE("shared subexpression accumulates both paths") {
    Var x(Tensor::scalar(3.0), true);
    Var y = ops::scale(x, 2.0);
    Var z = ops::weighted_sum({y, y, x}, {1.0, 1.0, 1.0});
    backward(z);
    CHECK(x.grad()[0] == doctest::Approx(5.0));
  }
  SUBCASE("frozen inputs receive no gradient") {
    Var x(Tensor::scalar(3.0), false), w(Tensor::scalar(2.0), true);
    backward(ops::weighted_sum({x, w}, {1.0, 1.0}));
    CHECK_FALSE(x.has_grad());
    CHECK(w.grad()[0] == 1.0);
  }
  SUBCASE("shape errors surface as ShapeError") {
    Var a(Tensor::zeros({2, 2, 2})), b(Tensor::zeros({2, 2, 3}));
    CHECK_THROWS_AS(ops::add(a, b), ShapeError);
    CHECK_THROWS_AS(ops::mean_abs_diff(a, b), ShapeError);
  }
}
