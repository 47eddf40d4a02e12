#pragma once

#include <string>

#include "chromasem/graph.hpp"

namespace chromasem::layers {

inline std::string weight(const std::string& layer) { return layer + ".weight"; }
inline std::string bias(const std::string& layer) { return layer + ".bias"; }

inline void add_conv(Layout& layout, const std::string& name, int in, int out, int k) {
  layout.push_back({weight(name), Shape{out, in, k, k}, static_cast<double>(in) * k * k});
  layout.push_back({bias(name), Shape{out, 1, 1, 1}, 0.0});
}

// Transposed-conv weights are [in, out, k, k]; each output sees roughly
// in * k * k / stride^2 inputs.
inline void add_deconv(Layout& layout, const std::string& name, int in, int out, int k,
                       int stride) {
  layout.push_back(
      {weight(name), Shape{in, out, k, k}, static_cast<double>(in) * k * k / (stride * stride)});
  layout.push_back({bias(name), Shape{out, 1, 1, 1}, 0.0});
}

template <typename T>
typename Graph<T>::Var conv(Graph<T>& g, const NetWeights<T>& w, const std::string& name,
                            typename Graph<T>::Var x, kernels::ConvParams p) {
  return g.conv2d(x, g.param(w.get(weight(name))), g.param(w.get(bias(name))), p);
}

template <typename T>
typename Graph<T>::Var deconv(Graph<T>& g, const NetWeights<T>& w, const std::string& name,
                              typename Graph<T>::Var x, kernels::ConvParams p) {
  return g.conv_transpose2d(x, g.param(w.get(weight(name))), g.param(w.get(bias(name))), p);
}

}  // namespace chromasem::layers
