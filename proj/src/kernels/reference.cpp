// Serial reference kernels: direct loops, no im2col, no packing, no threads.

#include <cmath>

#include "chromasem/kernels/ops.hpp"
#include "instantiate.hpp"

namespace chromasem::kernels::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvParams& p) {
  const Shape ys = conv2d_output_shape(x.shape(), w.shape(), p);
  const int k = w.shape().h;
  Tensor<T> y(ys);
  for (int n = 0; n < ys.n; ++n)
    for (int co = 0; co < ys.c; ++co)
      for (int oh = 0; oh < ys.h; ++oh)
        for (int ow = 0; ow < ys.w; ++ow) {
          T sum = bias ? (*bias)[co] : T(0);
          for (int ci = 0; ci < x.shape().c; ++ci)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int ih = oh * p.stride - p.pad + kh;
                const int iw = ow * p.stride - p.pad + kw;
                if (ih < 0 || iw < 0 || ih >= x.shape().h || iw >= x.shape().w) continue;
                sum += x.at(n, ci, ih, iw) * w.at(co, ci, kh, kw);
              }
          y.at(n, co, oh, ow) = sum;
        }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     const ConvParams& p, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* dbias) {
  const Shape ys = conv2d_output_shape(x.shape(), w.shape(), p);
  if (dy.shape() != ys) throw ShapeError("conv2d_backward: dy shape " + dy.shape().str());
  const int k = w.shape().h;
  for (int n = 0; n < ys.n; ++n)
    for (int co = 0; co < ys.c; ++co)
      for (int oh = 0; oh < ys.h; ++oh)
        for (int ow = 0; ow < ys.w; ++ow) {
          const T g = dy.at(n, co, oh, ow);
          if (dbias) (*dbias)[co] += g;
          for (int ci = 0; ci < x.shape().c; ++ci)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int ih = oh * p.stride - p.pad + kh;
                const int iw = ow * p.stride - p.pad + kw;
                if (ih < 0 || iw < 0 || ih >= x.shape().h || iw >= x.shape().w) continue;
                if (dx) dx->at(n, ci, ih, iw) += g * w.at(co, ci, kh, kw);
                if (dw) dw->at(co, ci, kh, kw) += g * x.at(n, ci, ih, iw);
              }
        }
}

template <typename T>
Tensor<T> conv_transpose2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                                   const ConvParams& p) {
  const Shape ys = conv_transpose2d_output_shape(x.shape(), w.shape(), p);
  const int k = w.shape().h;
  Tensor<T> y(ys);
  for (int n = 0; n < ys.n; ++n) {
    for (int co = 0; co < ys.c; ++co)
      for (int i = 0; i < static_cast<int>(ys.plane()); ++i)
        y.plane(n, co)[i] = bias ? (*bias)[co] : T(0);
    for (int ci = 0; ci < x.shape().c; ++ci)
      for (int ih = 0; ih < x.shape().h; ++ih)
        for (int iw = 0; iw < x.shape().w; ++iw)
          for (int co = 0; co < ys.c; ++co)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int oh = ih * p.stride - p.pad + kh;
                const int ow = iw * p.stride - p.pad + kw;
                if (oh < 0 || ow < 0 || oh >= ys.h || ow >= ys.w) continue;
                y.at(n, co, oh, ow) += x.at(n, ci, ih, iw) * w.at(ci, co, kh, kw);
              }
  }
  return y;
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                               const ConvParams& p, Tensor<T>* dx, Tensor<T>* dw,
                               Tensor<T>* dbias) {
  const Shape ys = conv_transpose2d_output_shape(x.shape(), w.shape(), p);
  if (dy.shape() != ys)
    throw ShapeError("conv_transpose2d_backward: dy shape " + dy.shape().str());
  const int k = w.shape().h;
  if (dbias)
    for (int n = 0; n < ys.n; ++n)
      for (int co = 0; co < ys.c; ++co)
        for (std::size_t i = 0; i < ys.plane(); ++i) (*dbias)[co] += dy.plane(n, co)[i];
  for (int n = 0; n < ys.n; ++n)
    for (int ci = 0; ci < x.shape().c; ++ci)
      for (int ih = 0; ih < x.shape().h; ++ih)
        for (int iw = 0; iw < x.shape().w; ++iw)
          for (int co = 0; co < ys.c; ++co)
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int oh = ih * p.stride - p.pad + kh;
                const int ow = iw * p.stride - p.pad + kw;
                if (oh < 0 || ow < 0 || oh >= ys.h || ow >= ys.w) continue;
                const T g = dy.at(n, co, oh, ow);
                if (dx) dx->at(n, ci, ih, iw) += g * w.at(ci, co, kh, kw);
                if (dw) dw->at(ci, co, kh, kw) += g * x.at(n, ci, ih, iw);
              }
}

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& x, T eps, NormStats<T>* stats) {
  const Shape& s = x.shape();
  const std::size_t count = s.plane();
  Tensor<T> y(s);
  if (stats) {
    stats->mean.assign(static_cast<std::size_t>(s.n) * s.c, T(0));
    stats->inv_std.assign(static_cast<std::size_t>(s.n) * s.c, T(0));
  }
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.plane(n, c);
      double mean = 0.0;
      for (std::size_t i = 0; i < count; ++i) mean += in[i];
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (std::size_t i = 0; i < count; ++i) var += (in[i] - mean) * (in[i] - mean);
      var /= static_cast<double>(count);
      const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
      T* out = y.plane(n, c);
      for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<T>((in[i] - mean) * inv);
      if (stats) {
        stats->mean[static_cast<std::size_t>(n) * s.c + c] = static_cast<T>(mean);
        stats->inv_std[static_cast<std::size_t>(n) * s.c + c] = static_cast<T>(inv);
      }
    }
  return y;
}

template <typename T>
void instance_norm_backward(const Tensor<T>& y, const NormStats<T>& stats, const Tensor<T>& dy,
                            Tensor<T>& dx) {
  const Shape& s = y.shape();
  const std::size_t count = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* yh = y.plane(n, c);
      const T* g = dy.plane(n, c);
      double sum_g = 0.0, sum_gy = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        sum_g += g[i];
        sum_gy += static_cast<double>(g[i]) * yh[i];
      }
      const double inv = stats.inv_std[static_cast<std::size_t>(n) * s.c + c];
      T* out = dx.plane(n, c);
      for (std::size_t i = 0; i < count; ++i)
        out[i] += static_cast<T>(
            inv * (g[i] - sum_g / count - yh[i] * sum_gy / count));
    }
}

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return y;
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& dy, T slope, Tensor<T>& dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] += x[i] > T(0) ? dy[i] : slope * dy[i];
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
void tanh_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                             Tensor<T>* dlogits) {
  const Shape& s = logits.shape();
  const std::size_t pixels = static_cast<std::size_t>(s.n) * s.plane();
  if (labels.size() != pixels) throw ShapeError("softmax_cross_entropy: label count mismatch");
  double total = 0.0;
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const int label = labels[(static_cast<std::size_t>(n) * s.h + y) * s.w + x];
        if (label >= s.c) throw InvalidLabelError("label " + std::to_string(label) + " >= C");
        double z = 0.0;
        for (int c = 0; c < s.c; ++c) z += std::exp(static_cast<double>(logits.at(n, c, y, x)));
        total += std::log(z) - logits.at(n, label, y, x);
        if (dlogits)
          for (int c = 0; c < s.c; ++c) {
            const double prob = std::exp(static_cast<double>(logits.at(n, c, y, x))) / z;
            dlogits->at(n, c, y, x) +=
                static_cast<T>((prob - (c == label ? 1.0 : 0.0)) / static_cast<double>(pixels));
          }
      }
  return total / static_cast<double>(pixels);
}

template <typename T>
double huber(const Tensor<T>& pred, const Tensor<T>& target, double delta, Tensor<T>* dpred) {
  if (pred.shape() != target.shape())
    throw ShapeError("huber: " + pred.shape().str() + " vs " + target.shape().str());
  double total = 0.0;
  const double count = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = static_cast<double>(target[i]) - static_cast<double>(pred[i]);
    const double a = std::abs(r);
    total += a <= delta ? 0.5 * r * r : delta * a - 0.5 * delta * delta;
    if (dpred) {
      const double g = a <= delta ? -r : (r > 0 ? -delta : delta);
      (*dpred)[i] += static_cast<T>(g / count);
    }
  }
  return total / count;
}

CHROMASEM_INSTANTIATE(float)
CHROMASEM_INSTANTIATE(double)

}  // namespace chromasem::kernels::reference
