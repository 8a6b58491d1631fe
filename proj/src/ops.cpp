#include "rsit/ops.hpp"

#include <cmath>

#include "rsit/kernels.hpp"

namespace rsit::ops {

namespace {

void require_same(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <class F>
Tensor map(const Tensor& t, F&& f) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = f(t[i]);
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return make_result(std::move(out), {a, b}, [](const Tensor& g, std::vector<Var>& in) {
    if (in[0].requires_grad()) in[0].accumulate_grad(g);
    if (in[1].requires_grad()) in[1].accumulate_grad(g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(std::move(out), {a, b}, [](const Tensor& g, std::vector<Var>& in) {
    if (in[0].requires_grad()) in[0].accumulate_grad(g);
    if (in[1].requires_grad()) {
      Tensor& gb = in[1].grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out *= s;
  return make_result(std::move(out), {a}, [s](const Tensor& g, std::vector<Var>& in) {
    Tensor& ga = in[0].grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = map(a.value(), [s](double v) { return v + s; });
  return make_result(std::move(out), {a},
                     [](const Tensor& g, std::vector<Var>& in) { in[0].accumulate_grad(g); });
}

Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size() || terms.empty()) {
    throw std::invalid_argument("weighted_sum: terms and weights must be non-empty and aligned");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) total += weights[i] * terms[i].item();
  return make_result(Tensor::scalar(total), terms,
                     [weights](const Tensor& g, std::vector<Var>& in) {
                       for (std::size_t i = 0; i < in.size(); ++i) {
                         if (in[i].requires_grad())
                           in[i].accumulate_grad(Tensor::scalar(weights[i] * g[0]));
                       }
                     });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](const Tensor& g, std::vector<Var>& in) {
    in[0].accumulate_grad(g.reshaped(in[0].shape()));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return make_result(Tensor::scalar(a.value().sum() / n), {a},
                     [n](const Tensor& g, std::vector<Var>& in) {
                       Tensor& ga = in[0].grad_buffer();
                       const double share = g[0] / n;
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += share;
                     });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
  Tensor out = map(a.value(), [slope](double v) { return v > 0 ? v : slope * v; });
  return make_result(std::move(out), {a}, [slope](const Tensor& g, std::vector<Var>& in) {
    const Tensor& x = in[0].value();
    Tensor& gx = in[0].grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += x[i] > 0 ? g[i] : slope * g[i];
  });
}

Var tanh(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return std::tanh(v); });
  Tensor saved = out;
  return make_result(std::move(out), {a},
                     [y = std::move(saved)](const Tensor& g, std::vector<Var>& in) {
                       Tensor& gx = in[0].grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gx[i] += g[i] * (1.0 - y[i] * y[i]);
                     });
}

Var sigmoid(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Tensor saved = out;
  return make_result(std::move(out), {a},
                     [y = std::move(saved)](const Tensor& g, std::vector<Var>& in) {
                       Tensor& gx = in[0].grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gx[i] += g[i] * y[i] * (1.0 - y[i]);
                     });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad_h, int pad_w) {
  const bool has_bias = bias.defined();
  Tensor out = kernels::conv2d(x.value(), w.value(), has_bias ? &bias.value() : nullptr, stride,
                               pad_h, pad_w);
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs),
                     [stride, pad_h, pad_w](const Tensor& g, std::vector<Var>& in) {
                       Tensor* gx = in[0].requires_grad() ? &in[0].grad_buffer() : nullptr;
                       Tensor* gw = in[1].requires_grad() ? &in[1].grad_buffer() : nullptr;
                       Tensor* gb = (in.size() > 2 && in[2].requires_grad())
                                        ? &in[2].grad_buffer()
                                        : nullptr;
                       kernels::conv2d_backward(in[0].value(), in[1].value(), g, stride, pad_h,
                                                pad_w, gx, gw, gb);
                     });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& bias, int stride, int pad,
                     int output_pad) {
  const bool has_bias = bias.defined();
  Tensor out = kernels::conv_transpose2d(x.value(), w.value(),
                                         has_bias ? &bias.value() : nullptr, stride, pad,
                                         output_pad);
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs),
                     [stride, pad](const Tensor& g, std::vector<Var>& in) {
                       Tensor* gx = in[0].requires_grad() ? &in[0].grad_buffer() : nullptr;
                       Tensor* gw = in[1].requires_grad() ? &in[1].grad_buffer() : nullptr;
                       Tensor* gb = (in.size() > 2 && in[2].requires_grad())
                                        ? &in[2].grad_buffer()
                                        : nullptr;
                       kernels::conv_transpose2d_backward(in[0].value(), in[1].value(), g,
                                                          stride, pad, gx, gw, gb);
                     });
}

Var reflection_pad2d(const Var& x, int pad) {
  if (pad == 0) return x;
  return make_result(kernels::reflection_pad2d(x.value(), pad), {x},
                     [pad](const Tensor& g, std::vector<Var>& in) {
                       kernels::reflection_pad2d_backward(g, pad, in[0].grad_buffer());
                     });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.value();
  require_chw(xv, "instance_norm");
  const int c = xv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  const bool affine = gamma.defined();
  if (affine && (!beta.defined() || gamma.value().size() != static_cast<std::size_t>(c) ||
                 beta.value().size() != static_cast<std::size_t>(c))) {
    throw ShapeError("instance_norm: affine parameters must both have " + std::to_string(c) +
                     " entries");
  }
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const double* p = xv.ptr() + ch * plane;
    double mu = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mu += p[i];
    mu /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mu) * (p[i] - mu);
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(ch)] = is;
    double* q = xhat.ptr() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - mu) * is;
  }
  Tensor out = xhat;
  if (affine) {
    for (int ch = 0; ch < c; ++ch) {
      const double gm = gamma.value()[static_cast<std::size_t>(ch)];
      const double bt = beta.value()[static_cast<std::size_t>(ch)];
      double* q = out.ptr() + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) q[i] = gm * q[i] + bt;
    }
  }
  std::vector<Var> inputs{x};
  if (affine) {
    inputs.push_back(gamma);
    inputs.push_back(beta);
  }
  return make_result(
      std::move(out), std::move(inputs),
      [xhat = std::move(xhat), inv_std = std::move(inv_std), c, plane, affine](
          const Tensor& g, std::vector<Var>& in) {
        const double n = static_cast<double>(plane);
        for (int ch = 0; ch < c; ++ch) {
          const double* gy = g.ptr() + ch * plane;
          const double* xh = xhat.ptr() + ch * plane;
          const double gm = affine ? in[1].value()[static_cast<std::size_t>(ch)] : 1.0;
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < plane; ++i) {
            sum_g += gy[i];
            sum_gx += gy[i] * xh[i];
          }
          if (affine) {
            if (in[1].requires_grad()) in[1].grad_buffer()[static_cast<std::size_t>(ch)] += sum_gx;
            if (in[2].requires_grad()) in[2].grad_buffer()[static_cast<std::size_t>(ch)] += sum_g;
          }
          if (in[0].requires_grad()) {
            double* gx = in[0].grad_buffer().ptr() + ch * plane;
            const double k = gm * inv_std[static_cast<std::size_t>(ch)];
            const double mg = sum_g / n, mgx = sum_gx / n;
            for (std::size_t i = 0; i < plane; ++i) gx[i] += k * (gy[i] - mg - xh[i] * mgx);
          }
        }
      });
}

Var max_pool2d(const Var& x, int k, int stride) {
  std::vector<long> argmax;
  Tensor out = kernels::max_pool2d(x.value(), k, stride, 0, &argmax);
  return make_result(std::move(out), {x},
                     [argmax = std::move(argmax)](const Tensor& g, std::vector<Var>& in) {
                       Tensor& gx = in[0].grad_buffer();
                       for (std::size_t o = 0; o < g.size(); ++o) {
                         if (argmax[o] >= 0) gx[static_cast<std::size_t>(argmax[o])] += g[o];
                       }
                     });
}

Var avg_pool2d(const Var& x, int k, int stride) {
  return make_result(kernels::avg_pool2d(x.value(), k, stride, 0, false), {x},
                     [k, stride](const Tensor& g, std::vector<Var>& in) {
                       kernels::avg_pool2d_backward(g, k, stride, 0, false, in[0].grad_buffer());
                     });
}

Var squared_error_to(const Var& a, double target) {
  const Tensor& v = a.value();
  if (v.empty()) throw ShapeError("squared_error_to: empty input");
  double s = 0.0;
  for (double d : v.data()) s += (d - target) * (d - target);
  const double n = static_cast<double>(v.size());
  return make_result(Tensor::scalar(s / n), {a},
                     [target, n](const Tensor& g, std::vector<Var>& in) {
                       const Tensor& x = in[0].value();
                       Tensor& gx = in[0].grad_buffer();
                       for (std::size_t i = 0; i < x.size(); ++i)
                         gx[i] += g[0] * 2.0 * (x[i] - target) / n;
                     });
}

Var mean_abs_diff(const Var& a, const Var& b) {
  require_same(a, b, "mean_abs_diff");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.empty()) throw ShapeError("mean_abs_diff: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return make_result(Tensor::scalar(s / n), {a, b}, [n](const Tensor& g, std::vector<Var>& in) {
    const Tensor& x = in[0].value();
    const Tensor& y = in[1].value();
    const double share = g[0] / n;
    auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
    if (in[0].requires_grad()) {
      Tensor& gx = in[0].grad_buffer();
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += share * sign(x[i] - y[i]);
    }
    if (in[1].requires_grad()) {
      Tensor& gy = in[1].grad_buffer();
      for (std::size_t i = 0; i < x.size(); ++i) gy[i] -= share * sign(x[i] - y[i]);
    }
  });
}

}  // namespace rsit::ops
