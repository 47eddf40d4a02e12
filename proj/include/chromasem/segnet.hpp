#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "chromasem/graph.hpp"
#include "chromasem/semantic_map.hpp"
#include "chromasem/weights.hpp"

namespace chromasem {

/// GridNet segmenter geometry. Row r runs at 1/2^r resolution with
/// row_depths[r] channels; the first half of the columns carries strided
/// convolutions from row r to r+1, the second half transposed convolutions
/// back up.
struct GridNetConfig {
  int rows = 5;
  int columns = 6;
  std::vector<int> row_depths{16, 32, 64, 128, 256};
  int kernel = 3;
  int padding = 1;
  int num_classes = kDefaultNumClasses;
  double leaky_slope = 0.01;

  void validate() const;
  /// Input height and width must be multiples of this.
  int size_divisor() const { return 1 << (rows - 1); }

  nlohmann::json to_json() const;
  static GridNetConfig from_json(const nlohmann::json& j);
};

Layout gridnet_layout(const GridNetConfig& cfg);

template <typename T>
NetWeights<T> init_gridnet(const GridNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return init_from_layout<T>(gridnet_layout(cfg), seed);
}

template <typename T>
class GridNet {
 public:
  using Var = typename Graph<T>::Var;

  /// Throws TensorNameError / ShapeError if `weights` does not match `cfg`.
  GridNet(GridNetConfig cfg, NetWeights<T> weights);
  static GridNet init(const GridNetConfig& cfg, std::uint64_t seed) {
    return GridNet(cfg, init_gridnet<T>(cfg, seed));
  }

  /// x: [N,1,H,W] -> logits [N,C,H,W].
  Var forward(Graph<T>& g, Var x) const;
  Tensor<T> forward(const Tensor<T>& x, Backend backend = Backend::parallel) const;

  const GridNetConfig& config() const { return cfg_; }
  const NetWeights<T>& weights() const { return weights_; }
  NetWeights<T>& weights() { return weights_; }

 private:
  void check_input(const Shape& s) const;

  GridNetConfig cfg_;
  NetWeights<T> weights_;
};

/// Per-pixel argmax of logits[image]; ties go to the lowest class index.
template <typename T>
SemanticMap predict_map(const Tensor<T>& logits, int image = 0);

/// Mean over pixels of -log softmax(logits)[target]. `targets` holds one map per
/// batch item. Adds d(loss)/d(logits) into `dlogits` when given.
template <typename T>
double seg_loss(const Tensor<T>& logits, std::span<const SemanticMap> targets,
                Tensor<T>* dlogits = nullptr);

/// Fraction of pixels where predict_map agrees with the target.
template <typename T>
double pixel_accuracy(const Tensor<T>& logits, std::span<const SemanticMap> targets);

}  // namespace chromasem
