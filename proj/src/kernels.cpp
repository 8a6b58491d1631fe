#include "rsit/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <limits>

namespace rsit::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0;
}

void check_weight(const Tensor& x, const Tensor& w, const char* what) {
  require_chw(x, what);
  if (w.rank() != 4 || w.dim(1) != x.dim(0)) {
    throw ShapeError(std::string(what) + ": weight " + shape_str(w.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
}

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace

ConvGeometry ConvGeometry::make(int in_c, int in_h, int in_w, int kh, int kw, int stride,
                                int pad_h, int pad_w) {
  if (stride < 1) throw ShapeError("convolution stride must be >= 1");
  ConvGeometry g;
  g.in_c = in_c;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kh = kh;
  g.kw = kw;
  g.stride = stride;
  g.pad_h = pad_h;
  g.pad_w = pad_w;
  const int span_h = in_h + 2 * pad_h - kh;
  const int span_w = in_w + 2 * pad_w - kw;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("convolution kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                     " larger than padded input " + std::to_string(in_h) + "x" +
                     std::to_string(in_w));
  }
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;
  return g;
}

void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const int positions = g.positions();
  for (int c = 0; c < g.in_c; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        double* row = cols + (static_cast<std::size_t>(c * g.kh + i) * g.kw + j) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_h + i;
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_w + j;
            dst[ox] = (ix < 0 || ix >= g.in_w) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* x) {
  const int positions = g.positions();
  for (int c = 0; c < g.in_c; ++c) {
    double* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double* row =
            cols + (static_cast<std::size_t>(c * g.kh + i) * g.kw + j) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_h + i;
          if (iy < 0 || iy >= g.in_h) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.out_w;
          double* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_w + j;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad_h,
              int pad_w) {
  check_weight(x, w, "conv2d");
  const int out_c = w.dim(0);
  const auto g =
      ConvGeometry::make(x.dim(0), x.dim(1), x.dim(2), w.dim(2), w.dim(3), stride, pad_h, pad_w);
  Tensor y(Shape{out_c, g.out_h, g.out_w});
  if (out_c == 0) return y;
  ConstMatMap wm(w.ptr(), out_c, g.patch());
  MatMap ym(y.ptr(), out_c, g.positions());
  if (is_pointwise(g)) {
    ym.noalias() = wm * ConstMatMap(x.ptr(), g.in_c, g.positions());
  } else {
    Storage cols(static_cast<std::size_t>(g.patch()) * g.positions());
    im2col(x.ptr(), g, cols.data());
    ym.noalias() = wm * ConstMatMap(cols.data(), g.patch(), g.positions());
  }
  if (bias) {
    for (int o = 0; o < out_c; ++o) ym.row(o).array() += (*bias)[static_cast<std::size_t>(o)];
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride,
                     int pad_h, int pad_w, Tensor* grad_x, Tensor* grad_w, Tensor* grad_b) {
  const int out_c = w.dim(0);
  const auto g =
      ConvGeometry::make(x.dim(0), x.dim(1), x.dim(2), w.dim(2), w.dim(3), stride, pad_h, pad_w);
  ConstMatMap gy(grad_out.ptr(), out_c, g.positions());
  if (grad_b) {
    for (int o = 0; o < out_c; ++o) (*grad_b)[static_cast<std::size_t>(o)] += gy.row(o).sum();
  }
  const bool pointwise = is_pointwise(g);
  Storage cols;
  if (grad_w) {
    MatMap gw(grad_w->ptr(), out_c, g.patch());
    if (pointwise) {
      gw.noalias() += gy * ConstMatMap(x.ptr(), g.in_c, g.positions()).transpose();
    } else {
      cols.resize(static_cast<std::size_t>(g.patch()) * g.positions());
      im2col(x.ptr(), g, cols.data());
      gw.noalias() += gy * ConstMatMap(cols.data(), g.patch(), g.positions()).transpose();
    }
  }
  if (grad_x) {
    ConstMatMap wm(w.ptr(), out_c, g.patch());
    if (pointwise) {
      MatMap(grad_x->ptr(), g.in_c, g.positions()).noalias() += wm.transpose() * gy;
    } else {
      cols.resize(static_cast<std::size_t>(g.patch()) * g.positions());
      MatMap cm(cols.data(), g.patch(), g.positions());
      cm.noalias() = wm.transpose() * gy;
      col2im(cols.data(), g, grad_x->ptr());
    }
  }
}

namespace {

// Geometry of the forward convolution whose adjoint is this transposed convolution.
ConvGeometry transpose_geometry(const Tensor& x, const Tensor& w, int stride, int pad,
                                int output_pad) {
  require_chw(x, "conv_transpose2d");
  if (w.rank() != 4 || w.dim(0) != x.dim(0) || w.dim(2) != w.dim(3)) {
    throw ShapeError("conv_transpose2d: weight " + shape_str(w.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
  if (output_pad < 0 || output_pad >= stride) {
    throw ShapeError("conv_transpose2d: output padding must be in [0, stride)");
  }
  const int k = w.dim(2);
  const int out_h = (x.dim(1) - 1) * stride - 2 * pad + k + output_pad;
  const int out_w = (x.dim(2) - 1) * stride - 2 * pad + k + output_pad;
  if (out_h < 1 || out_w < 1) throw ShapeError("conv_transpose2d: empty output");
  auto g = ConvGeometry::make(w.dim(1), out_h, out_w, k, k, stride, pad, pad);
  if (g.out_h != x.dim(1) || g.out_w != x.dim(2)) {
    throw ShapeError("conv_transpose2d: inconsistent geometry");
  }
  return g;
}

}  // namespace

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad,
                        int output_pad) {
  const auto g = transpose_geometry(x, w, stride, pad, output_pad);
  const int in_c = x.dim(0);
  Storage cols(static_cast<std::size_t>(g.patch()) * g.positions());
  MatMap cm(cols.data(), g.patch(), g.positions());
  cm.noalias() = ConstMatMap(w.ptr(), in_c, g.patch()).transpose() *
                 ConstMatMap(x.ptr(), in_c, g.positions());
  Tensor y(Shape{g.in_c, g.in_h, g.in_w});
  col2im(cols.data(), g, y.ptr());
  if (bias) {
    const std::size_t plane = static_cast<std::size_t>(g.in_h) * g.in_w;
    for (int o = 0; o < g.in_c; ++o) {
      double* p = y.ptr() + o * plane;
      const double b = (*bias)[static_cast<std::size_t>(o)];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
  return y;
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out,
                               int stride, int pad, Tensor* grad_x, Tensor* grad_w,
                               Tensor* grad_b) {
  const int k = w.dim(2);
  const int output_pad = grad_out.dim(1) - ((x.dim(1) - 1) * stride - 2 * pad + k);
  const auto g = transpose_geometry(x, w, stride, pad, output_pad);
  const int in_c = x.dim(0);
  if (grad_b) {
    const std::size_t plane = static_cast<std::size_t>(g.in_h) * g.in_w;
    for (int o = 0; o < g.in_c; ++o) {
      const double* p = grad_out.ptr() + o * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      (*grad_b)[static_cast<std::size_t>(o)] += s;
    }
  }
  Storage cols(static_cast<std::size_t>(g.patch()) * g.positions());
  im2col(grad_out.ptr(), g, cols.data());
  ConstMatMap cm(cols.data(), g.patch(), g.positions());
  if (grad_x) {
    MatMap(grad_x->ptr(), in_c, g.positions()).noalias() +=
        ConstMatMap(w.ptr(), in_c, g.patch()) * cm;
  }
  if (grad_w) {
    MatMap(grad_w->ptr(), in_c, g.patch()).noalias() +=
        ConstMatMap(x.ptr(), in_c, g.positions()) * cm.transpose();
  }
}

Tensor max_pool2d(const Tensor& x, int k, int stride, int pad, std::vector<long>* argmax) {
  require_chw(x, "max_pool2d");
  const auto g = ConvGeometry::make(x.dim(0), x.dim(1), x.dim(2), k, k, stride, pad, pad);
  Tensor y(Shape{g.in_c, g.out_h, g.out_w});
  if (argmax) argmax->assign(y.size(), -1);
  std::size_t o = 0;
  for (int c = 0; c < g.in_c; ++c) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        long best_idx = -1;
        for (int i = 0; i < k; ++i) {
          const int iy = oy * stride - pad + i;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int j = 0; j < k; ++j) {
            const int ix = ox * stride - pad + j;
            if (ix < 0 || ix >= g.in_w) continue;
            const long idx = (static_cast<long>(c) * g.in_h + iy) * g.in_w + ix;
            if (best_idx < 0 || x[static_cast<std::size_t>(idx)] > best) {
              best = x[static_cast<std::size_t>(idx)];
              best_idx = idx;
            }
          }
        }
        y[o] = best_idx < 0 ? 0.0 : best;
        if (argmax) (*argmax)[o] = best_idx;
      }
    }
  }
  return y;
}

namespace {

template <class Visit>
void for_each_avg_window(const ConvGeometry& g, int k, int stride, int pad, bool count_pad,
                         Visit&& visit) {
  std::size_t o = 0;
  for (int c = 0; c < g.in_c; ++c) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox, ++o) {
        const int y0 = oy * stride - pad, x0 = ox * stride - pad;
        const int ya = std::max(y0, 0), yb = std::min(y0 + k, g.in_h);
        const int xa = std::max(x0, 0), xb = std::min(x0 + k, g.in_w);
        const int count = count_pad ? k * k : (yb - ya) * (xb - xa);
        visit(o, c, ya, yb, xa, xb, count);
      }
    }
  }
}

}  // namespace

Tensor avg_pool2d(const Tensor& x, int k, int stride, int pad, bool count_pad) {
  require_chw(x, "avg_pool2d");
  const auto g = ConvGeometry::make(x.dim(0), x.dim(1), x.dim(2), k, k, stride, pad, pad);
  Tensor y(Shape{g.in_c, g.out_h, g.out_w});
  for_each_avg_window(g, k, stride, pad, count_pad,
                      [&](std::size_t o, int c, int ya, int yb, int xa, int xb, int count) {
                        double s = 0.0;
                        for (int iy = ya; iy < yb; ++iy)
                          for (int ix = xa; ix < xb; ++ix) s += x.at(c, iy, ix);
                        y[o] = count > 0 ? s / count : 0.0;
                      });
  return y;
}

void avg_pool2d_backward(const Tensor& grad_out, int k, int stride, int pad, bool count_pad,
                         Tensor& grad_x) {
  const auto g = ConvGeometry::make(grad_x.dim(0), grad_x.dim(1), grad_x.dim(2), k, k, stride,
                                    pad, pad);
  for_each_avg_window(g, k, stride, pad, count_pad,
                      [&](std::size_t o, int c, int ya, int yb, int xa, int xb, int count) {
                        if (count == 0) return;
                        const double share = grad_out[o] / count;
                        for (int iy = ya; iy < yb; ++iy)
                          for (int ix = xa; ix < xb; ++ix) grad_x.at(c, iy, ix) += share;
                      });
}

Tensor reflection_pad2d(const Tensor& x, int pad) {
  require_chw(x, "reflection_pad2d");
  if (pad < 0 || pad >= x.dim(1) || pad >= x.dim(2)) {
    throw ShapeError("reflection_pad2d: pad " + std::to_string(pad) +
                     " must be smaller than spatial dims of " + shape_str(x.shape()));
  }
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y(Shape{c, h + 2 * pad, w + 2 * pad});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h + 2 * pad; ++i)
      for (int j = 0; j < w + 2 * pad; ++j)
        y.at(ch, i, j) = x.at(ch, reflect(i - pad, h), reflect(j - pad, w));
  return y;
}

void reflection_pad2d_backward(const Tensor& grad_out, int pad, Tensor& grad_x) {
  const int c = grad_x.dim(0), h = grad_x.dim(1), w = grad_x.dim(2);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h + 2 * pad; ++i)
      for (int j = 0; j < w + 2 * pad; ++j)
        grad_x.at(ch, reflect(i - pad, h), reflect(j - pad, w)) += grad_out.at(ch, i, j);
}

}  // namespace rsit::kernels
