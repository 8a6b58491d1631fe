#pragma once

// Central finite-difference oracle for reverse-mode gradients. Uses only forward
// evaluation, so it stays independent of every backward closure it checks.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rsit/autograd.hpp"

namespace rsit::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.storage()) v = d(rng);
  return t;
}

struct GradCheckResult {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||numeric||, 1e-12)
  std::size_t checked = 0;
};

/// `loss` rebuilds the scalar from the current values of `wrt` on every call.
/// At most `max_entries` coordinates per tensor are probed (spread evenly).
inline GradCheckResult grad_check(const std::function<Var()>& loss, std::vector<Var> wrt,
                                  double h = 1e-6, std::size_t max_entries = 64) {
  for (auto& v : wrt) v.zero_grad();
  backward(loss());
  std::vector<Tensor> analytic;
  for (auto& v : wrt) analytic.push_back(v.grad());

  double diff2 = 0.0, num2 = 0.0;
  std::size_t checked = 0;
  NoGradGuard guard;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    Tensor& value = wrt[k].mutable_value();
    const std::size_t n = value.size();
    const std::size_t step = n > max_entries ? n / max_entries : 1;
    for (std::size_t i = 0; i < n; i += step) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = loss().item();
      value[i] = saved - h;
      const double down = loss().item();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[k][i] - numeric) * (analytic[k][i] - numeric);
      num2 += numeric * numeric;
      ++checked;
    }
  }
  return {std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-12), checked};
}

/// Scalar probe sum(r * out) with a fixed random r, exercising every output entry.
inline Var random_projection(const Var& out, const Tensor& r) {
  Tensor prod = out.value();
  double s = 0.0;
  for (std::size_t i = 0; i < prod.size(); ++i) s += prod[i] * r[i];
  return make_result(Tensor::scalar(s), {out}, [r](const Tensor& g, std::vector<Var>& in) {
    Tensor scaled = r;
    scaled *= g[0];
    in[0].accumulate_grad(scaled.reshaped(in[0].shape()));
  });
}

}  // namespace rsit::testing
