#pragma once

#include "chromasem/tensor.hpp"

namespace chromasem::kernels {

/// Square-kernel convolution geometry. `output_padding` only applies to the
/// transposed convolution and must be smaller than `stride`.
struct ConvParams {
  int stride = 1;
  int pad = 1;
  int output_padding = 0;
};

inline int conv_out_size(int in, int kernel, const ConvParams& p) {
  return (in + 2 * p.pad - kernel) / p.stride + 1;
}

inline int conv_transpose_out_size(int in, int kernel, const ConvParams& p) {
  return (in - 1) * p.stride - 2 * p.pad + kernel + p.output_padding;
}

/// x: [N, Cin, H, W], w: [Cout, Cin, k, k].
inline Shape conv2d_output_shape(const Shape& x, const Shape& w, const ConvParams& p) {
  if (x.c != w.c || w.h != w.w)
    throw ShapeError("conv2d: input " + x.str() + " incompatible with weight " + w.str());
  Shape y{x.n, w.n, conv_out_size(x.h, w.h, p), conv_out_size(x.w, w.w, p)};
  if (y.h < 1 || y.w < 1) throw ShapeError("conv2d: empty output for input " + x.str());
  return y;
}

/// x: [N, Cin, H, W], w: [Cin, Cout, k, k].
inline Shape conv_transpose2d_output_shape(const Shape& x, const Shape& w, const ConvParams& p) {
  if (x.c != w.n || w.h != w.w)
    throw ShapeError("conv_transpose2d: input " + x.str() + " incompatible with weight " +
                     w.str());
  if (p.output_padding < 0 || p.output_padding >= p.stride)
    throw ShapeError("conv_transpose2d: output_padding must be in [0, stride)");
  return Shape{x.n, w.c, conv_transpose_out_size(x.h, w.h, p),
               conv_transpose_out_size(x.w, w.w, p)};
}

}  // namespace chromasem::kernels
