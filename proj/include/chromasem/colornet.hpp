#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "chromasem/graph.hpp"
#include "chromasem/weights.hpp"

namespace chromasem {

/// Two-stream U-Net colorizer. One encoder parameter set is applied to both the
/// gray plane and the encoded semantic plane; at every level the gray features
/// are instance-normalized and fused with the raw semantic features.
struct ColorNetConfig {
  std::vector<int> encoder_depths{32, 64, 128, 256, 512};
  std::vector<int> decoder_input_depths{1024, 512, 256, 128, 64};
  int kernel = 3;
  double leaky_slope = 0.01;
  double in_epsilon = 1e-5;
  int output_channels = 2;
  /// Off only for the ablation variant.
  bool use_instance_norm = true;

  void validate() const;
  int levels() const { return static_cast<int>(encoder_depths.size()); }
  int size_divisor() const { return 1 << (levels() - 1); }

  nlohmann::json to_json() const;
  static ColorNetConfig from_json(const nlohmann::json& j);
};

Layout colornet_layout(const ColorNetConfig& cfg);

/// Parameters of one encoder stream, i.e. what a single-stream U-Net encoder
/// with the same depths would hold.
std::size_t single_stream_encoder_parameter_count(const ColorNetConfig& cfg);

template <typename T>
NetWeights<T> init_colornet(const ColorNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return init_from_layout<T>(colornet_layout(cfg), seed);
}

/// Shapes (and graph handles) observed during one forward pass.
struct ColorNetTrace {
  std::vector<Shape> gray_features;
  std::vector<Shape> sem_features;
  std::vector<Shape> decoder_inputs;
  Shape output;
  std::vector<int> gray_vars;
  std::vector<int> sem_vars;
};

template <typename T>
class ColorNet {
 public:
  using Var = typename Graph<T>::Var;

  ColorNet(ColorNetConfig cfg, NetWeights<T> weights);
  static ColorNet init(const ColorNetConfig& cfg, std::uint64_t seed) {
    return ColorNet(cfg, init_colornet<T>(cfg, seed));
  }

  /// plane: [N,1,H,W] -> feature pyramid, level i at H/2^i with encoder_depths[i] channels.
  std::vector<Var> encoder_forward(Graph<T>& g, Var plane) const;

  /// gray, sem: [N,1,H,W] in [-1,1] -> chroma [N,2,H,W] in (-1,1).
  Var forward(Graph<T>& g, Var gray, Var sem, ColorNetTrace* trace = nullptr) const;
  Tensor<T> forward(const Tensor<T>& gray, const Tensor<T>& sem,
                    Backend backend = Backend::parallel) const;

  const ColorNetConfig& config() const { return cfg_; }
  const NetWeights<T>& weights() const { return weights_; }
  NetWeights<T>& weights() { return weights_; }

 private:
  void check_input(const Shape& s) const;

  ColorNetConfig cfg_;
  NetWeights<T> weights_;
};

/// Instance normalization without affine terms: per image and channel,
/// (f - mean) / sqrt(var + eps) with the population variance.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& f, T eps = T(1e-5));

/// Mean over elements of the Huber penalty of r = y - y_hat:
/// r^2/2 when |r| <= delta, otherwise delta * |r| - delta^2 / 2.
/// Adds d(loss)/d(y_hat) into `grad` when given.
template <typename T>
double huber_loss(const Tensor<T>& y_hat, const Tensor<T>& y, double delta = 1.0,
                  Tensor<T>* grad = nullptr);

}  // namespace chromasem
