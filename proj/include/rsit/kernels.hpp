#pragma once

#include <vector>

#include "rsit/tensor.hpp"

// Graph-free numeric kernels. The autodiff ops in ops.hpp wrap these.
namespace rsit::kernels {

struct ConvGeometry {
  int in_c = 0, in_h = 0, in_w = 0;
  int kh = 1, kw = 1;
  int stride = 1;
  int pad_h = 0, pad_w = 0;
  int out_h = 0, out_w = 0;

  static ConvGeometry make(int in_c, int in_h, int in_w, int kh, int kw, int stride, int pad_h,
                           int pad_w);
  int patch() const { return in_c * kh * kw; }
  int positions() const { return out_h * out_w; }
};

/// cols[(c*kh + i)*kw + j, oy*out_w + ox] = x[c, oy*s - pad_h + i, ox*s - pad_w + j], zero outside.
void im2col(const double* x, const ConvGeometry& g, double* cols);
/// Adjoint of im2col: scatter-adds columns back onto an [in_c, in_h, in_w] buffer.
void col2im(const double* cols, const ConvGeometry& g, double* x);

/// w: [out_c, in_c, kh, kw]; bias optional ([out_c]).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad_h,
              int pad_w);
/// Accumulates into non-null gradient outputs.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride,
                     int pad_h, int pad_w, Tensor* grad_x, Tensor* grad_w, Tensor* grad_b);

/// w: [in_c, out_c, k, k] (fractionally-strided convolution).
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad,
                        int output_pad);
void conv_transpose2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out,
                               int stride, int pad, Tensor* grad_x, Tensor* grad_w,
                               Tensor* grad_b);

/// Max pooling; `argmax` receives the flat input index chosen for every output cell
/// (-1 where the window only covers padding).
Tensor max_pool2d(const Tensor& x, int k, int stride, int pad, std::vector<long>* argmax);
/// Average pooling over the in-bounds part of each window when `count_pad` is false.
Tensor avg_pool2d(const Tensor& x, int k, int stride, int pad, bool count_pad);
void avg_pool2d_backward(const Tensor& grad_out, int k, int stride, int pad, bool count_pad,
                         Tensor& grad_x);

Tensor reflection_pad2d(const Tensor& x, int pad);
void reflection_pad2d_backward(const Tensor& grad_out, int pad, Tensor& grad_x);

}  // namespace rsit::kernels
