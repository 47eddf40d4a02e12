#include "chromasem/colornet.hpp"

#include "layers.hpp"

namespace chromasem {
namespace {

std::string encoder_name(int level, int conv) {
  return "encoder.e" + std::to_string(level + 1) + ".conv" + std::to_string(conv);
}
std::string fuse_name(int level) { return "fuse.l" + std::to_string(level + 1); }
std::string decoder_name(int level, const char* part) {
  return "decoder.d" + std::to_string(level + 1) + "." + part;
}

}  // namespace

void ColorNetConfig::validate() const {
  const int n = levels();
  if (n < 1) throw ConfigError("colornet: at least one encoder level required");
  for (int d : encoder_depths)
    if (d < 1) throw ConfigError("colornet: encoder depths must be positive");
  if (static_cast<int>(decoder_input_depths.size()) != n)
    throw ConfigError("colornet: decoder_input_depths must have one entry per level");
  for (int i = 0; i < n; ++i)
    if (decoder_input_depths[i] != 2 * encoder_depths[n - 1 - i])
      throw ConfigError("colornet: decoder_input_depths[i] must be 2 x reversed encoder depth");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("colornet: kernel must be odd");
  if (!(in_epsilon > 0.0)) throw ConfigError("colornet: in_epsilon must be positive");
  if (output_channels < 1) throw ConfigError("colornet: output_channels must be positive");
}

nlohmann::json ColorNetConfig::to_json() const {
  return {{"encoder_depths", encoder_depths},
          {"decoder_input_depths", decoder_input_depths},
          {"kernel", kernel},
          {"leaky_slope", leaky_slope},
          {"in_epsilon", in_epsilon},
          {"output_channels", output_channels},
          {"use_instance_norm", use_instance_norm}};
}

ColorNetConfig ColorNetConfig::from_json(const nlohmann::json& j) {
  ColorNetConfig c;
  try {
    c.encoder_depths = j.value("encoder_depths", c.encoder_depths);
    std::vector<int> derived;
    for (auto it = c.encoder_depths.rbegin(); it != c.encoder_depths.rend(); ++it)
      derived.push_back(2 * *it);
    c.decoder_input_depths = j.value("decoder_input_depths", derived);
    c.kernel = j.value("kernel", c.kernel);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.in_epsilon = j.value("in_epsilon", c.in_epsilon);
    c.output_channels = j.value("output_channels", c.output_channels);
    c.use_instance_norm = j.value("use_instance_norm", c.use_instance_norm);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("colornet config: ") + e.what());
  }
  c.validate();
  return c;
}

Layout colornet_layout(const ColorNetConfig& cfg) {
  cfg.validate();
  const auto& d = cfg.encoder_depths;
  const int n = cfg.levels();
  const int k = cfg.kernel;
  Layout layout;
  for (int i = 0; i < n; ++i) {
    layers::add_conv(layout, encoder_name(i, 1), i == 0 ? 1 : d[i - 1], d[i], k);
    layers::add_conv(layout, encoder_name(i, 2), d[i], d[i], k);
  }
  for (int i = 0; i + 1 < n; ++i) layers::add_conv(layout, fuse_name(i), 2 * d[i], d[i], 1);
  for (int i = n - 1; i >= 1; --i) {
    layers::add_deconv(layout, decoder_name(i, "up"), 2 * d[i], d[i - 1], k, 2);
    layers::add_conv(layout, decoder_name(i, "conv"), d[i - 1], d[i - 1], k);
  }
  layers::add_conv(layout, decoder_name(0, "conv1"), 2 * d[0], d[0], k);
  layers::add_conv(layout, decoder_name(0, "conv2"), d[0], cfg.output_channels, k);
  return layout;
}

std::size_t single_stream_encoder_parameter_count(const ColorNetConfig& cfg) {
  std::size_t total = 0;
  int in = 1;
  const std::size_t kk = static_cast<std::size_t>(cfg.kernel) * cfg.kernel;
  for (int d : cfg.encoder_depths) {
    total += kk * in * d + d;
    total += kk * d * d + d;
    in = d;
  }
  return total;
}

template <typename T>
ColorNet<T>::ColorNet(ColorNetConfig cfg, NetWeights<T> weights)
    : cfg_(std::move(cfg)), weights_(std::move(weights)) {
  validate_layout(weights_, colornet_layout(cfg_), "colornet");
}

template <typename T>
void ColorNet<T>::check_input(const Shape& s) const {
  const int div = cfg_.size_divisor();
  if (s.c != 1) throw ShapeError("colornet: expected single-channel planes, got " + s.str());
  if (s.h < div || s.w < div || s.h % div != 0 || s.w % div != 0)
    throw ShapeError("colornet: input " + s.str() + " must have H and W divisible by " +
                     std::to_string(div));
}

template <typename T>
std::vector<typename ColorNet<T>::Var> ColorNet<T>::encoder_forward(Graph<T>& g, Var plane) const {
  check_input(g.value(plane).shape());
  const T slope = static_cast<T>(cfg_.leaky_slope);
  const int pad = cfg_.kernel / 2;
  std::vector<Var> pyramid;
  Var h = plane;
  for (int i = 0; i < cfg_.levels(); ++i) {
    const kernels::ConvParams first{i == 0 ? 1 : 2, pad, 0};
    h = g.leaky_relu(layers::conv(g, weights_, encoder_name(i, 1), h, first), slope);
    h = g.leaky_relu(layers::conv(g, weights_, encoder_name(i, 2), h, {1, pad, 0}), slope);
    pyramid.push_back(h);
  }
  return pyramid;
}

template <typename T>
typename ColorNet<T>::Var ColorNet<T>::forward(Graph<T>& g, Var gray, Var sem,
                                               ColorNetTrace* trace) const {
  if (g.value(gray).shape() != g.value(sem).shape())
    throw ShapeError("colornet: gray " + g.value(gray).shape().str() + " vs semantic " +
                     g.value(sem).shape().str());
  const T slope = static_cast<T>(cfg_.leaky_slope);
  const T eps = static_cast<T>(cfg_.in_epsilon);
  const int pad = cfg_.kernel / 2;
  const int n = cfg_.levels();

  const auto gray_f = encoder_forward(g, gray);
  const auto sem_f = encoder_forward(g, sem);

  auto fused_input = [&](int i) {
    const Var gi = cfg_.use_instance_norm ? g.instance_norm(gray_f[i], eps) : gray_f[i];
    return g.concat(gi, sem_f[i]);
  };

  std::vector<Var> skips(n - 1);
  for (int i = 0; i + 1 < n; ++i)
    skips[i] = g.leaky_relu(
        layers::conv(g, weights_, fuse_name(i), fused_input(i), kernels::ConvParams{1, 0, 0}),
        slope);

  std::vector<Shape> decoder_inputs;
  Var h = fused_input(n - 1);
  for (int i = n - 1; i >= 1; --i) {
    decoder_inputs.push_back(g.value(h).shape());
    Var u = g.leaky_relu(
        layers::deconv(g, weights_, decoder_name(i, "up"), h, kernels::ConvParams{2, pad, 1}), slope);
    u = g.leaky_relu(layers::conv(g, weights_, decoder_name(i, "conv"), u, {1, pad, 0}), slope);
    h = g.concat(u, skips[i - 1]);
  }
  decoder_inputs.push_back(g.value(h).shape());
  h = g.leaky_relu(layers::conv(g, weights_, decoder_name(0, "conv1"), h, {1, pad, 0}), slope);
  const Var out = g.tanh(layers::conv(g, weights_, decoder_name(0, "conv2"), h, {1, pad, 0}));

  if (trace) {
    trace->gray_features.clear();
    trace->sem_features.clear();
    for (int i = 0; i < n; ++i) {
      trace->gray_features.push_back(g.value(gray_f[i]).shape());
      trace->sem_features.push_back(g.value(sem_f[i]).shape());
    }
    trace->gray_vars.assign(gray_f.begin(), gray_f.end());
    trace->sem_vars.assign(sem_f.begin(), sem_f.end());
    trace->decoder_inputs = std::move(decoder_inputs);
    trace->output = g.value(out).shape();
  }
  return out;
}

template <typename T>
Tensor<T> ColorNet<T>::forward(const Tensor<T>& gray, const Tensor<T>& sem, Backend backend) const {
  Graph<T> g(false, backend);
  const Var out = forward(g, g.input(gray), g.input(sem));
  return std::move(g.mutable_value(out));
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& f, T eps) {
  return kernels::parallel::instance_norm_forward<T>(f, eps, nullptr);
}

template <typename T>
double huber_loss(const Tensor<T>& y_hat, const Tensor<T>& y, double delta, Tensor<T>* grad) {
  if (y_hat.shape() != y.shape())
    throw ShapeError("huber_loss: prediction " + y_hat.shape().str() + " vs target " +
                     y.shape().str());
  return kernels::parallel::huber(y_hat, y, delta, grad);
}

template class ColorNet<float>;
template class ColorNet<double>;
template Tensor<float> instance_norm(const Tensor<float>&, float);
template Tensor<double> instance_norm(const Tensor<double>&, double);
template double huber_loss(const Tensor<float>&, const Tensor<float>&, double, Tensor<float>*);
template double huber_loss(const Tensor<double>&, const Tensor<double>&, double, Tensor<double>*);

}  // namespace chromasem
