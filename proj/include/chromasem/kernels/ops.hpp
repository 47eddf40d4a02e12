#pragma once

// Numeric kernels used by the networks. Two implementations share one
// interface:
//   kernels::parallel  -- im2col + packed GEMM, OpenMP over independent rows,
//                         planes and column panels. Used by the networks.
//   kernels::reference -- direct serial loops written straight from the
//                         definitions. Kept as a test oracle and benchmark
//                         baseline.
//
// Backward functions accumulate into their outputs (dx += ...), so shared
// parameters and fan-out inputs sum their gradients naturally. Pass nullptr for
// gradients that are not needed.

#include <cstdint>
#include <span>
#include <vector>

#include "chromasem/kernels/params.hpp"
#include "chromasem/tensor.hpp"

namespace chromasem::kernels {

/// Per-plane statistics cached by the instance-norm forward pass.
template <typename T>
struct NormStats {
  std::vector<T> mean;
  std::vector<T> inv_std;
};

#define CHROMASEM_KERNEL_API                                                                    \
  template <typename T>                                                                         \
  Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,       \
                           const ConvParams& p);                                                \
  template <typename T>                                                                         \
  void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,             \
                       const ConvParams& p, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* dbias);    \
  template <typename T>                                                                         \
  Tensor<T> conv_transpose2d_forward(const Tensor<T>& x, const Tensor<T>& w,                    \
                                     const Tensor<T>* bias, const ConvParams& p);               \
  template <typename T>                                                                         \
  void conv_transpose2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,   \
                                 const ConvParams& p, Tensor<T>* dx, Tensor<T>* dw,             \
                                 Tensor<T>* dbias);                                             \
  template <typename T>                                                                         \
  Tensor<T> instance_norm_forward(const Tensor<T>& x, T eps, NormStats<T>* stats);              \
  template <typename T>                                                                         \
  void instance_norm_backward(const Tensor<T>& y, const NormStats<T>& stats,                    \
                              const Tensor<T>& dy, Tensor<T>& dx);                              \
  template <typename T>                                                                         \
  Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope);                                    \
  template <typename T>                                                                         \
  void leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& dy, T slope, Tensor<T>& dx);    \
  template <typename T>                                                                         \
  Tensor<T> tanh_forward(const Tensor<T>& x);                                                   \
  template <typename T>                                                                         \
  void tanh_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx);                   \
  /* Mean over pixels of -log softmax(logits)[label]; labels are N*H*W, NHW order. */           \
  template <typename T>                                                                         \
  double softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> labels,   \
                               Tensor<T>* dlogits);                                             \
  /* Mean over elements of the Huber penalty of (target - pred). */                             \
  template <typename T>                                                                         \
  double huber(const Tensor<T>& pred, const Tensor<T>& target, double delta, Tensor<T>* dpred);

namespace parallel {
CHROMASEM_KERNEL_API
}  // namespace parallel

namespace reference {
CHROMASEM_KERNEL_API
}  // namespace reference

#undef CHROMASEM_KERNEL_API

/// Elementwise helpers shared by both backends.
template <typename T>
void add_into(const Tensor<T>& src, Tensor<T>& dst);

}  // namespace chromasem::kernels
