#pragma once

// Explicit instantiation list shared by the parallel and reference kernel files.
#define CHROMASEM_INSTANTIATE(T)                                                              \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,     \
                                    const ConvParams&);                                       \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                const ConvParams&, Tensor<T>*, Tensor<T>*, Tensor<T>*);       \
  template Tensor<T> conv_transpose2d_forward(const Tensor<T>&, const Tensor<T>&,             \
                                              const Tensor<T>*, const ConvParams&);           \
  template void conv_transpose2d_backward(const Tensor<T>&, const Tensor<T>&,                 \
                                          const Tensor<T>&, const ConvParams&, Tensor<T>*,    \
                                          Tensor<T>*, Tensor<T>*);                            \
  template Tensor<T> instance_norm_forward(const Tensor<T>&, T, NormStats<T>*);               \
  template void instance_norm_backward(const Tensor<T>&, const NormStats<T>&,                 \
                                       const Tensor<T>&, Tensor<T>&);                         \
  template Tensor<T> leaky_relu_forward(const Tensor<T>&, T);                                 \
  template void leaky_relu_backward(const Tensor<T>&, const Tensor<T>&, T, Tensor<T>&);       \
  template Tensor<T> tanh_forward(const Tensor<T>&);                                          \
  template void tanh_backward(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                \
  template double softmax_cross_entropy(const Tensor<T>&, std::span<const std::uint8_t>,     \
                                        Tensor<T>*);                                          \
  template double huber(const Tensor<T>&, const Tensor<T>&, double, Tensor<T>*);
