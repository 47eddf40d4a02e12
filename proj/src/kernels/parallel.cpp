// OpenMP kernels. Convolutions lower to im2col + packed GEMM over chunks of the
// batch; every reduction runs in an order fixed by the shapes alone, so results
// are bit-reproducible regardless of the thread count.

#include <algorithm>
#include <cmath>
#include <memory>

#include "chromasem/kernels/gemm.hpp"
#include "chromasem/kernels/ops.hpp"
#include "instantiate.hpp"

namespace chromasem::kernels::parallel {
namespace {

// Upper bound on im2col scratch (elements) before the batch is split into chunks.
constexpr std::size_t kColBudget = std::size_t(1) << 24;

// Reduction blocks for the losses; constant so partial sums never depend on threads.
constexpr std::size_t kReduceBlock = 4096;

struct Geometry {
  int channels, height, width;  // image being unfolded / folded
  int kernel, stride, pad;
  int out_h, out_w;             // sliding-window grid
};

int images_per_chunk(int n, std::size_t per_image) {
  const std::size_t fit = std::max<std::size_t>(1, kColBudget / std::max<std::size_t>(1, per_image));
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), fit));
}

// col[(c*k + kh)*k + kw][b*P + oh*out_w + ow] = img[b][c][oh*s - p + kh][ow*s - p + kw]
template <typename T>
void im2col(const T* img, int nb, const Geometry& g, T* col) {
  const int k = g.kernel;
  const int rows = g.channels * k * k;
  const std::size_t plane_out = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t width = plane_out * nb;
  const std::size_t image_size = static_cast<std::size_t>(g.channels) * g.height * g.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / (k * k);
    const int kh = (r / k) % k;
    const int kw = r % k;
    T* dst_row = col + static_cast<std::size_t>(r) * width;
    for (int b = 0; b < nb; ++b) {
      const T* src = img + b * image_size + static_cast<std::size_t>(c) * g.height * g.width;
      T* dst = dst_row + b * plane_out;
      for (int oh = 0; oh < g.out_h; ++oh) {
        const int ih = oh * g.stride - g.pad + kh;
        T* drow = dst + static_cast<std::size_t>(oh) * g.out_w;
        if (ih < 0 || ih >= g.height) {
          std::fill(drow, drow + g.out_w, T(0));
          continue;
        }
        const T* srow = src + static_cast<std::size_t>(ih) * g.width;
        for (int ow = 0; ow < g.out_w; ++ow) {
          const int iw = ow * g.stride - g.pad + kw;
          drow[ow] = (iw >= 0 && iw < g.width) ? srow[iw] : T(0);
        }
      }
    }
  }
}

// Adjoint of im2col: img += fold(col). Parallel over channels, which own
// disjoint output planes.
template <typename T>
void col2im(const T* col, int nb, const Geometry& g, T* img) {
  const int k = g.kernel;
  const std::size_t plane_out = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t width = plane_out * nb;
  const std::size_t image_size = static_cast<std::size_t>(g.channels) * g.height * g.width;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) {
        const std::size_t r = (static_cast<std::size_t>(c) * k + kh) * k + kw;
        const T* src_row = col + r * width;
        for (int b = 0; b < nb; ++b) {
          T* dst = img + b * image_size + static_cast<std::size_t>(c) * g.height * g.width;
          const T* src = src_row + b * plane_out;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.stride - g.pad + kh;
            if (ih < 0 || ih >= g.height) continue;
            T* drow = dst + static_cast<std::size_t>(ih) * g.width;
            const T* srow = src + static_cast<std::size_t>(oh) * g.out_w;
            for (int ow = 0; ow < g.out_w; ++ow) {
              const int iw = ow * g.stride - g.pad + kw;
              if (iw >= 0 && iw < g.width) drow[iw] += srow[ow];
            }
          }
        }
      }
  }
}

// [nb][C][P] (batch-major) <-> [C][nb*P] (channel-major) for batched GEMM operands.
template <typename T>
void gather_channels(const T* src, int nb, int channels, std::size_t plane, T* dst) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c)
    for (int b = 0; b < nb; ++b)
      std::copy_n(src + (static_cast<std::size_t>(b) * channels + c) * plane, plane,
                  dst + (static_cast<std::size_t>(c) * nb + b) * plane);
}

template <typename T>
void scatter_channels(const T* src, int nb, int channels, std::size_t plane, T* dst,
                      bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c)
    for (int b = 0; b < nb; ++b) {
      const T* s = src + (static_cast<std::size_t>(c) * nb + b) * plane;
      T* d = dst + (static_cast<std::size_t>(b) * channels + c) * plane;
      if (accumulate)
        for (std::size_t i = 0; i < plane; ++i) d[i] += s[i];
      else
        std::copy_n(s, plane, d);
    }
}

template <typename T>
void add_bias(Tensor<T>& y, const Tensor<T>* bias) {
  if (!bias) return;
  const Shape& s = y.shape();
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const T b = (*bias)[nc % s.c];
    T* p = y.data() + static_cast<std::size_t>(nc) * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

template <typename T>
void bias_grad(const Tensor<T>& dy, Tensor<T>& db) {
  const Shape& s = dy.shape();
  const std::size_t plane = s.plane();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.c; ++c) {
    T sum = T(0);
    for (int n = 0; n < s.n; ++n) {
      const T* p = dy.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    db[c] += sum;
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvParams& p) {
  const Shape xs = x.shape();
  const Shape ys = conv2d_output_shape(xs, w.shape(), p);
  const int k = w.shape().h;
  const int kdim = xs.c * k * k;
  const std::size_t plane_out = ys.plane();
  const Geometry g{xs.c, xs.h, xs.w, k, p.stride, p.pad, ys.h, ys.w};

  Tensor<T> y(ys);
  const int chunk = images_per_chunk(xs.n, static_cast<std::size_t>(kdim) * plane_out);
  std::unique_ptr<T[]> col(new T[static_cast<std::size_t>(kdim) * chunk * plane_out]);
  std::unique_ptr<T[]> out(chunk > 1 ? new T[static_cast<std::size_t>(ys.c) * chunk * plane_out]
                                     : nullptr);
  const MatView<T> wm{w.data(), kdim, 1};
  for (int n0 = 0; n0 < xs.n; n0 += chunk) {
    const int nb = std::min(chunk, xs.n - n0);
    const int cols = static_cast<int>(nb * plane_out);
    im2col(x.plane(n0, 0), nb, g, col.get());
    if (nb == 1) {
      gemm(ys.c, cols, kdim, wm, MatView<T>{col.get(), cols, 1}, y.plane(n0, 0), cols, false);
    } else {
      gemm(ys.c, cols, kdim, wm, MatView<T>{col.get(), cols, 1}, out.get(), cols, false);
      scatter_channels(out.get(), nb, ys.c, plane_out, y.plane(n0, 0), false);
    }
  }
  add_bias(y, bias);
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const ConvParams& p, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* dbias) {
  const Shape xs = x.shape();
  const Shape ys = conv2d_output_shape(xs, w.shape(), p);
  if (dy.shape() != ys) throw ShapeError("conv2d_backward: dy shape " + dy.shape().str());
  const int k = w.shape().h;
  const int kdim = xs.c * k * k;
  const std::size_t plane_out = ys.plane();
  const Geometry g{xs.c, xs.h, xs.w, k, p.stride, p.pad, ys.h, ys.w};

  if (dbias) bias_grad(dy, *dbias);
  if (!dx && !dw) return;

  const int chunk = images_per_chunk(xs.n, static_cast<std::size_t>(kdim) * plane_out);
  std::unique_ptr<T[]> col(new T[static_cast<std::size_t>(kdim) * chunk * plane_out]);
  std::unique_ptr<T[]> dymat(chunk > 1 ? new T[static_cast<std::size_t>(ys.c) * chunk * plane_out]
                                       : nullptr);
  for (int n0 = 0; n0 < xs.n; n0 += chunk) {
    const int nb = std::min(chunk, xs.n - n0);
    const int cols = static_cast<int>(nb * plane_out);
    const T* g_out = dy.plane(n0, 0);
    if (nb > 1) {
      gather_channels(g_out, nb, ys.c, plane_out, dymat.get());
      g_out = dymat.get();
    }
    if (dw) {
      im2col(x.plane(n0, 0), nb, g, col.get());
      // dW[Cout, K] += dY[Cout, cols] * col^T
      gemm(ys.c, kdim, cols, MatView<T>{g_out, cols, 1}, MatView<T>{col.get(), 1, cols},
           dw->data(), kdim, true);
    }
    if (dx) {
      // dcol[K, cols] = W^T * dY, then fold back onto the input.
      gemm(kdim, cols, ys.c, MatView<T>{w.data(), 1, kdim}, MatView<T>{g_out, cols, 1}, col.get(),
           cols, false);
      col2im(col.get(), nb, g, dx->plane(n0, 0));
    }
  }
}

template <typename T>
Tensor<T> conv_transpose2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                                   const ConvParams& p) {
  const Shape xs = x.shape();
  const Shape ys = conv_transpose2d_output_shape(xs, w.shape(), p);
  const int k = w.shape().h;
  const int kdim = ys.c * k * k;
  const std::size_t plane_in = xs.plane();
  // The transposed convolution folds columns onto the output, with the input
  // grid as the sliding-window positions.
  const Geometry g{ys.c, ys.h, ys.w, k, p.stride, p.pad, xs.h, xs.w};

  Tensor<T> y(ys);
  const int chunk = images_per_chunk(xs.n, static_cast<std::size_t>(kdim) * plane_in);
  std::unique_ptr<T[]> col(new T[static_cast<std::size_t>(kdim) * chunk * plane_in]);
  std::unique_ptr<T[]> xmat(chunk > 1 ? new T[static_cast<std::size_t>(xs.c) * chunk * plane_in]
                                      : nullptr);
  for (int n0 = 0; n0 < xs.n; n0 += chunk) {
    const int nb = std::min(chunk, xs.n - n0);
    const int cols = static_cast<int>(nb * plane_in);
    const T* xin = x.plane(n0, 0);
    if (nb > 1) {
      gather_channels(xin, nb, xs.c, plane_in, xmat.get());
      xin = xmat.get();
    }
    // col[Cout*k*k, cols] = W^T * X with W viewed as [Cin, Cout*k*k].
    gemm(kdim, cols, xs.c, MatView<T>{w.data(), 1, kdim}, MatView<T>{xin, cols, 1}, col.get(), cols,
         false);
    col2im(col.get(), nb, g, y.plane(n0, 0));
  }
  add_bias(y, bias);
  return y;
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                               const ConvParams& p, Tensor<T>* dx, Tensor<T>* dw,
                               Tensor<T>* dbias) {
  const Shape xs = x.shape();
  const Shape ys = conv_transpose2d_output_shape(xs, w.shape(), p);
  if (dy.shape() != ys)
    throw ShapeError("conv_transpose2d_backward: dy shape " + dy.shape().str());
  const int k = w.shape().h;
  const int kdim = ys.c * k * k;
  const std::size_t plane_in = xs.plane();
  const Geometry g{ys.c, ys.h, ys.w, k, p.stride, p.pad, xs.h, xs.w};

  if (dbias) bias_grad(dy, *dbias);
  if (!dx && !dw) return;

  const int chunk = images_per_chunk(xs.n, static_cast<std::size_t>(kdim) * plane_in);
  std::unique_ptr<T[]> col(new T[static_cast<std::size_t>(kdim) * chunk * plane_in]);
  std::unique_ptr<T[]> scratch(
      chunk > 1 ? new T[static_cast<std::size_t>(xs.c) * chunk * plane_in] : nullptr);
  for (int n0 = 0; n0 < xs.n; n0 += chunk) {
    const int nb = std::min(chunk, xs.n - n0);
    const int cols = static_cast<int>(nb * plane_in);
    im2col(dy.plane(n0, 0), nb, g, col.get());
    if (dw) {
      const T* xin = x.plane(n0, 0);
      if (nb > 1) {
        gather_channels(xin, nb, xs.c, plane_in, scratch.get());
        xin = scratch.get();
      }
      // dW[Cin, Cout*k*k] += X[Cin, cols] * dYcol^T
      gemm(xs.c, kdim, cols, MatView<T>{xin, cols, 1}, MatView<T>{col.get(), 1, cols}, dw->data(),
           kdim, true);
    }
    if (dx) {
      const MatView<T> wm{w.data(), kdim, 1};
      if (nb == 1) {
        gemm(xs.c, cols, kdim, wm, MatView<T>{col.get(), cols, 1}, dx->plane(n0, 0), cols, true);
      } else {
        gemm(xs.c, cols, kdim, wm, MatView<T>{col.get(), cols, 1}, scratch.get(), cols, false);
        scatter_channels(scratch.get(), nb, xs.c, plane_in, dx->plane(n0, 0), true);
      }
    }
  }
}

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& x, T eps, NormStats<T>* stats) {
  const Shape& s = x.shape();
  const std::size_t count = s.plane();
  const int planes = s.n * s.c;
  Tensor<T> y(s);
  if (stats) {
    stats->mean.assign(planes, T(0));
    stats->inv_std.assign(planes, T(0));
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < planes; ++i) {
    const T* in = x.data() + static_cast<std::size_t>(i) * count;
    double sum = 0.0;
    for (std::size_t j = 0; j < count; ++j) sum += in[j];
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      const double d = in[j] - mean;
      ss += d * d;
    }
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(count) + static_cast<double>(eps));
    T* out = y.data() + static_cast<std::size_t>(i) * count;
    for (std::size_t j = 0; j < count; ++j) out[j] = static_cast<T>((in[j] - mean) * inv);
    if (stats) {
      stats->mean[i] = static_cast<T>(mean);
      stats->inv_std[i] = static_cast<T>(inv);
    }
  }
  return y;
}

template <typename T>
void instance_norm_backward(const Tensor<T>& y, const NormStats<T>& stats, const Tensor<T>& dy,
                            Tensor<T>& dx) {
  const Shape& s = y.shape();
  const std::size_t count = s.plane();
  const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < planes; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * count;
    const T* yh = y.data() + off;
    const T* g = dy.data() + off;
    double sum_g = 0.0, sum_gy = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      sum_g += g[j];
      sum_gy += static_cast<double>(g[j]) * yh[j];
    }
    const double mean_g = sum_g / static_cast<double>(count);
    const double mean_gy = sum_gy / static_cast<double>(count);
    const double inv = stats.inv_std[i];
    T* out = dx.data() + off;
    for (std::size_t j = 0; j < count; ++j)
      out[j] += static_cast<T>(inv * (g[j] - mean_g - yh[j] * mean_gy));
  }
}

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope) {
  Tensor<T> y(x.shape());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const T* in = x.data();
  T* out = y.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : slope * in[i];
  return y;
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& dy, T slope, Tensor<T>& dx) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const T* in = x.data();
  const T* g = dy.data();
  T* out = dx.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] += in[i] > T(0) ? g[i] : slope * g[i];
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
void tanh_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                             Tensor<T>* dlogits) {
  const Shape& s = logits.shape();
  const std::size_t plane = s.plane();
  const std::size_t pixels = static_cast<std::size_t>(s.n) * plane;
  if (labels.size() != pixels) throw ShapeError("softmax_cross_entropy: label count mismatch");
  for (std::uint8_t l : labels)
    if (l >= s.c)
      throw InvalidLabelError("label " + std::to_string(l) + " >= " + std::to_string(s.c));

  const std::size_t blocks = (pixels + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  const double scale = 1.0 / static_cast<double>(pixels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
    std::vector<double> z(s.c);
    double acc = 0.0;
    const std::size_t end = std::min(pixels, (blk + 1) * kReduceBlock);
    for (std::size_t px = blk * kReduceBlock; px < end; ++px) {
      const std::size_t n = px / plane;
      const std::size_t q = px % plane;
      const T* base = logits.data() + n * s.c * plane + q;
      double zmax = base[0];
      for (int c = 1; c < s.c; ++c) zmax = std::max(zmax, static_cast<double>(base[c * plane]));
      double sum = 0.0;
      for (int c = 0; c < s.c; ++c) {
        z[c] = std::exp(static_cast<double>(base[c * plane]) - zmax);
        sum += z[c];
      }
      const int label = labels[px];
      acc += std::log(sum) + zmax - static_cast<double>(base[label * plane]);
      if (dlogits) {
        T* gbase = dlogits->data() + n * s.c * plane + q;
        for (int c = 0; c < s.c; ++c)
          gbase[c * plane] += static_cast<T>((z[c] / sum - (c == label ? 1.0 : 0.0)) * scale);
      }
    }
    partial[blk] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total * scale;
}

template <typename T>
double huber(const Tensor<T>& pred, const Tensor<T>& target, double delta, Tensor<T>* dpred) {
  if (pred.shape() != target.shape())
    throw ShapeError("huber: " + pred.shape().str() + " vs " + target.shape().str());
  const std::size_t count = pred.size();
  const std::size_t blocks = (count + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  const double scale = 1.0 / static_cast<double>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
    double acc = 0.0;
    const std::size_t end = std::min(count, (blk + 1) * kReduceBlock);
    for (std::size_t i = blk * kReduceBlock; i < end; ++i) {
      const double r = static_cast<double>(target[i]) - static_cast<double>(pred[i]);
      const double a = std::abs(r);
      const bool quadratic = a <= delta;
      acc += quadratic ? 0.5 * r * r : delta * (a - 0.5 * delta);
      if (dpred) (*dpred)[i] += static_cast<T>((quadratic ? -r : std::copysign(delta, -r)) * scale);
    }
    partial[blk] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total * scale;
}

CHROMASEM_INSTANTIATE(float)
CHROMASEM_INSTANTIATE(double)

}  // namespace chromasem::kernels::parallel

namespace chromasem::kernels {

template <typename T>
void add_into(const Tensor<T>& src, Tensor<T>& dst) {
  if (src.shape() != dst.shape())
    throw ShapeError("add: " + src.shape().str() + " vs " + dst.shape().str());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(src.size());
  const T* s = src.data();
  T* d = dst.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] += s[i];
}

template void add_into(const Tensor<float>&, Tensor<float>&);
template void add_into(const Tensor<double>&, Tensor<double>&);

}  // namespace chromasem::kernels
