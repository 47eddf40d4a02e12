#include "chromasem/segnet.hpp"

#include <cmath>

#include "layers.hpp"

namespace chromasem {
namespace {

std::string cell(const char* kind, int r, int c) {
  return std::string("grid.") + kind + ".r" + std::to_string(r) + ".c" + std::to_string(c);
}

}  // namespace

void GridNetConfig::validate() const {
  if (rows < 1 || static_cast<int>(row_depths.size()) != rows)
    throw ConfigError("gridnet: rows must equal the number of row depths");
  if (columns < 2 || columns % 2 != 0)
    throw ConfigError("gridnet: columns must be even and >= 2");
  for (int d : row_depths)
    if (d < 1) throw ConfigError("gridnet: row depths must be positive");
  if (kernel < 1 || kernel % 2 == 0 || padding != kernel / 2)
    throw ConfigError("gridnet: kernel must be odd with same-size padding");
  if (num_classes < 2 || num_classes > 256)
    throw ConfigError("gridnet: num_classes must be in [2, 256]");
}

nlohmann::json GridNetConfig::to_json() const {
  return {{"rows", rows},           {"columns", columns},         {"row_depths", row_depths},
          {"kernel", kernel},       {"padding", padding},         {"num_classes", num_classes},
          {"leaky_slope", leaky_slope}};
}

GridNetConfig GridNetConfig::from_json(const nlohmann::json& j) {
  GridNetConfig c;
  try {
    c.rows = j.value("rows", c.rows);
    c.columns = j.value("columns", c.columns);
    c.row_depths = j.value("row_depths", c.row_depths);
    c.kernel = j.value("kernel", c.kernel);
    c.padding = j.value("padding", c.padding);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gridnet config: ") + e.what());
  }
  c.validate();
  return c;
}

Layout gridnet_layout(const GridNetConfig& cfg) {
  cfg.validate();
  const int k = cfg.kernel;
  const auto& d = cfg.row_depths;
  const int half = cfg.columns / 2;
  Layout layout;
  layers::add_conv(layout, "stem", 1, d[0], k);
  for (int c = 0; c < cfg.columns; ++c) {
    for (int r = 0; r < cfg.rows; ++r) {
      const bool has_lateral = c > 0;
      if (has_lateral) {
        layers::add_conv(layout, cell("lateral", r, c) + ".conv1", d[r], d[r], k);
        layers::add_conv(layout, cell("lateral", r, c) + ".conv2", d[r], d[r], k);
        // Residual branches start at zero so the untrained grid is a plain
        // (non-exploding) down/up path; see the README.
        layout[layout.size() - 2].fan_in = 0.0;
      }
      if (c < half && r + 1 < cfg.rows) {
        layers::add_conv(layout, cell("down", r, c) + ".conv1", d[r], d[r + 1], k);
        layers::add_conv(layout, cell("down", r, c) + ".conv2", d[r + 1], d[r + 1], k);
      }
      if (c >= half && r + 1 < cfg.rows) {
        layers::add_deconv(layout, cell("up", r + 1, c) + ".deconv", d[r + 1], d[r], k, 2);
        layers::add_conv(layout, cell("up", r + 1, c) + ".conv", d[r], d[r], k);
      }
    }
  }
  layers::add_conv(layout, "head", d[0], cfg.num_classes, 1);
  return layout;
}

template <typename T>
GridNet<T>::GridNet(GridNetConfig cfg, NetWeights<T> weights)
    : cfg_(std::move(cfg)), weights_(std::move(weights)) {
  validate_layout(weights_, gridnet_layout(cfg_), "gridnet");
}

template <typename T>
void GridNet<T>::check_input(const Shape& s) const {
  const int div = cfg_.size_divisor();
  if (s.c != 1) throw ShapeError("gridnet: expected a single-channel input, got " + s.str());
  if (s.h < div || s.w < div || s.h % div != 0 || s.w % div != 0)
    throw ShapeError("gridnet: input " + s.str() + " must have H and W divisible by " +
                     std::to_string(div));
}

template <typename T>
typename GridNet<T>::Var GridNet<T>::forward(Graph<T>& g, Var x) const {
  check_input(g.value(x).shape());
  const T slope = static_cast<T>(cfg_.leaky_slope);
  const kernels::ConvParams same{1, cfg_.padding, 0};
  const kernels::ConvParams down{2, cfg_.padding, 0};
  const kernels::ConvParams up{2, cfg_.padding, 1};
  const auto& w = weights_;

  auto lateral = [&](int r, int c, Var v) {
    const std::string name = cell("lateral", r, c);
    Var h = layers::conv(g, w, name + ".conv1", g.leaky_relu(v, slope), same);
    h = layers::conv(g, w, name + ".conv2", g.leaky_relu(h, slope), same);
    return g.add(v, h);
  };
  auto downsample = [&](int r, int c, Var v) {
    const std::string name = cell("down", r, c);
    Var h = layers::conv(g, w, name + ".conv1", g.leaky_relu(v, slope), down);
    return layers::conv(g, w, name + ".conv2", g.leaky_relu(h, slope), same);
  };
  auto upsample = [&](int r, int c, Var v) {
    const std::string name = cell("up", r, c);
    Var h = layers::deconv(g, w, name + ".deconv", g.leaky_relu(v, slope), up);
    return layers::conv(g, w, name + ".conv", g.leaky_relu(h, slope), same);
  };

  const int rows = cfg_.rows;
  const int half = cfg_.columns / 2;
  std::vector<Var> prev(rows, -1), cur(rows, -1);
  for (int c = 0; c < cfg_.columns; ++c) {
    if (c < half) {
      for (int r = 0; r < rows; ++r) {
        Var v = -1;
        if (c > 0)
          v = lateral(r, c, prev[r]);
        else if (r == 0)
          v = layers::conv(g, w, "stem", x, same);
        if (r > 0) {
          const Var d = downsample(r - 1, c, cur[r - 1]);
          v = v < 0 ? d : g.add(v, d);
        }
        cur[r] = v;
      }
    } else {
      for (int r = rows - 1; r >= 0; --r) {
        Var v = lateral(r, c, prev[r]);
        if (r + 1 < rows) v = g.add(v, upsample(r + 1, c, cur[r + 1]));
        cur[r] = v;
      }
    }
    std::swap(prev, cur);
  }
  return layers::conv(g, w, "head", g.leaky_relu(prev[0], slope), kernels::ConvParams{1, 0, 0});
}

template <typename T>
Tensor<T> GridNet<T>::forward(const Tensor<T>& x, Backend backend) const {
  Graph<T> g(false, backend);
  const Var out = forward(g, g.input(x));
  return std::move(g.mutable_value(out));
}

template <typename T>
SemanticMap predict_map(const Tensor<T>& logits, int image) {
  const Shape s = logits.shape();
  if (image < 0 || image >= s.n) throw ShapeError("predict_map: image index out of range");
  SemanticMap map{s.h, s.w, s.c, std::vector<std::uint8_t>(s.plane())};
  const std::size_t plane = s.plane();
  const T* base = logits.plane(image, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    T best_v = base[i];
    for (int c = 1; c < s.c; ++c) {
      const T v = base[c * plane + i];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    map.labels[i] = static_cast<std::uint8_t>(best);
  }
  return map;
}

namespace {

template <typename T>
std::vector<std::uint8_t> stack_labels(const Shape& s, std::span<const SemanticMap> targets) {
  if (static_cast<int>(targets.size()) != s.n)
    throw ShapeError("segmentation targets: expected " + std::to_string(s.n) + " maps");
  std::vector<std::uint8_t> labels;
  labels.reserve(static_cast<std::size_t>(s.n) * s.plane());
  for (const auto& t : targets) {
    if (t.height != s.h || t.width != s.w)
      throw ShapeError("segmentation target " + std::to_string(t.height) + "x" +
                       std::to_string(t.width) + " does not match logits " + s.str());
    for (std::uint8_t l : t.labels)
      if (l >= s.c)
        throw InvalidLabelError("target label " + std::to_string(l) + " >= " +
                                std::to_string(s.c));
    labels.insert(labels.end(), t.labels.begin(), t.labels.end());
  }
  return labels;
}

}  // namespace

template <typename T>
double seg_loss(const Tensor<T>& logits, std::span<const SemanticMap> targets, Tensor<T>* dlogits) {
  const auto labels = stack_labels<T>(logits.shape(), targets);
  return kernels::parallel::softmax_cross_entropy(logits, labels, dlogits);
}

template <typename T>
double pixel_accuracy(const Tensor<T>& logits, std::span<const SemanticMap> targets) {
  const Shape s = logits.shape();
  stack_labels<T>(s, targets);
  std::size_t hits = 0;
  for (int n = 0; n < s.n; ++n) {
    const SemanticMap pred = predict_map(logits, n);
    for (std::size_t i = 0; i < pred.labels.size(); ++i)
      hits += pred.labels[i] == targets[n].labels[i];
  }
  return static_cast<double>(hits) / (static_cast<double>(s.n) * s.plane());
}

template class GridNet<float>;
template class GridNet<double>;
template SemanticMap predict_map(const Tensor<float>&, int);
template SemanticMap predict_map(const Tensor<double>&, int);
template double seg_loss(const Tensor<float>&, std::span<const SemanticMap>, Tensor<float>*);
template double seg_loss(const Tensor<double>&, std::span<const SemanticMap>, Tensor<double>*);
template double pixel_accuracy(const Tensor<float>&, std::span<const SemanticMap>);
template double pixel_accuracy(const Tensor<double>&, std::span<const SemanticMap>);

}  // namespace chromasem
