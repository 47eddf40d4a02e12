#include "chromasem/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>

namespace chromasem {

std::string to_string(Target t) { return t == Target::segmenter ? "segmenter" : "colorizer"; }

Target target_from_string(const std::string& s) {
  if (s == "segmenter") return Target::segmenter;
  if (s == "colorizer") return Target::colorizer;
  throw ConfigError("target must be 'segmenter' or 'colorizer', got '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("beta1 and beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (crop_size < 16 || crop_size % 16 != 0) throw ConfigError("crop_size must be a positive multiple of 16");
  if (crop_size > scale_size) throw ConfigError("crop_size must not exceed scale_size");
  if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
  if (num_classes < 2 || num_classes > 256) throw ConfigError("num_classes must be in [2, 256]");
  gridnet.validate();
  colornet.validate();
  if (gridnet.num_classes != num_classes)
    throw ConfigError("gridnet.num_classes must equal num_classes");
  const int div = target == Target::segmenter ? gridnet.size_divisor() : colornet.size_divisor();
  if (crop_size % div != 0)
    throw ConfigError("crop_size must be divisible by " + std::to_string(div));
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"scale_size", scale_size},
          {"crop_size", crop_size},
          {"augment", augment},
          {"seed", seed},
          {"target", to_string(target)},
          {"precision", precision},
          {"num_classes", num_classes},
          {"gridnet", gridnet.to_json()},
          {"colornet", colornet.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const std::vector<std::string> known{
      "lr",        "beta1",     "beta2", "adam_eps", "batch_size", "epochs",      "max_steps", "scale_size",
      "crop_size", "augment",   "seed",  "target",   "precision",  "num_classes", "gridnet",   "colornet"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown train config field '" + key + "'");
  TrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.scale_size = j.value("scale_size", c.scale_size);
    c.crop_size = j.value("crop_size", c.crop_size);
    c.augment = j.value("augment", c.augment);
    c.seed = j.value("seed", c.seed);
    if (j.contains("target")) c.target = target_from_string(j.at("target").get<std::string>());
    if (j.contains("precision")) {
      const auto& p = j.at("precision");
      c.precision = p.is_string() ? std::stoi(p.get<std::string>()) : p.get<int>();
    }
    c.num_classes = j.value("num_classes", c.num_classes);
    auto grid = j.value("gridnet", nlohmann::json::object());
    if (!grid.contains("num_classes")) grid["num_classes"] = c.num_classes;
    c.gridnet = GridNetConfig::from_json(grid);
    c.colornet = ColorNetConfig::from_json(j.value("colornet", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

template <typename T>
void Adam<T>::step(NetWeights<T>& w, const std::vector<const Tensor<T>*>& grads) {
  auto& params = w.params();
  if (grads.size() != params.size()) throw ShapeError("adam: one gradient slot per parameter required");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), T(0));
      v_.emplace_back(p.value.size(), T(0));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const T step = static_cast<T>(lr_ / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T b1 = static_cast<T>(b1_), b2 = static_cast<T>(b2_), eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i]) continue;
    T* x = params[i].value.data();
    const T* g = grads[i]->data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(params[i].value.size());
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
      x[k] -= step * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
}

template <typename T>
Batch<T> make_batch(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ShapeError("empty batch");
  const int h = samples[0].rgb.height, w = samples[0].rgb.width;
  const int b = static_cast<int>(samples.size());
  Batch<T> out{Tensor<T>({b, 1, h, w}), Tensor<T>({b, 1, h, w}), Tensor<T>({b, 2, h, w}), {}};
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int n = 0; n < b; ++n) {
    const Sample& s = samples[n];
    if (s.rgb.height != h || s.rgb.width != w || s.map.height != h || s.map.width != w)
      throw ShapeError("batch samples must share one size");
    const NetPlanes planes = normalize(rgb_to_lab(s.rgb));
    const Tensor<double> sem = encode_map(s.map);
    for (std::size_t i = 0; i < plane; ++i) {
      out.gray.plane(n, 0)[i] = static_cast<T>(planes.x[i]);
      out.sem.plane(n, 0)[i] = static_cast<T>(sem[i]);
      out.chroma.plane(n, 0)[i] = static_cast<T>(planes.y[i]);
      out.chroma.plane(n, 1)[i] = static_cast<T>(planes.y[plane + i]);
    }
    out.maps.push_back(s.map);
  }
  return out;
}

template <typename T>
Checkpoint make_checkpoint(const TrainConfig& cfg, const NetWeights<T>& w, int epoch,
                           const std::vector<double>& losses) {
  const bool seg = cfg.target == Target::segmenter;
  Checkpoint ck = Checkpoint::from(seg ? "gridnet" : "colornet",
                                   seg ? cfg.gridnet.to_json() : cfg.colornet.to_json(), w);
  ck.train_config = cfg.to_json();
  ck.epoch = epoch;
  ck.loss_history = losses;
  return ck;
}

namespace {

// Owns the network being trained and evaluates one batch loss on a graph.
template <typename T>
struct Trainee {
  std::optional<GridNet<T>> seg;
  std::optional<ColorNet<T>> color;

  NetWeights<T>& weights() { return seg ? seg->weights() : color->weights(); }

  double loss(Graph<T>& g, const Batch<T>& in, typename Graph<T>::Var& out, Tensor<T>& dout) const {
    double l;
    if (seg) {
      out = seg->forward(g, g.input(in.gray));
      dout = Tensor<T>(g.value(out).shape());
      l = seg_loss(g.value(out), std::span<const SemanticMap>(in.maps), &dout);
    } else {
      out = color->forward(g, g.input(in.gray), g.input(in.sem));
      dout = Tensor<T>(g.value(out).shape());
      l = huber_loss(g.value(out), in.chroma, 1.0, &dout);
    }
    return l;
  }
};

}  // namespace

template <typename T>
TrainResult<T> train_from(const TrainConfig& cfg, const std::vector<Sample>& data, NetWeights<T> init,
                          const TrainOptions& opts) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training data is empty");
  const bool seg = cfg.target == Target::segmenter;
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  const int n = static_cast<int>(data.size());
  const int batch = std::min(cfg.batch_size, n);
  const int per_epoch = n / batch;
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  Adam<T> adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Trainee<T> net;
  if (seg)
    net.seg.emplace(cfg.gridnet, std::move(init));
  else
    net.color.emplace(cfg.colornet, std::move(init));
  TrainResult<T> result;
  std::vector<int> order(n);
  long step = 0;

  bool stopped = false;
  for (int epoch = 0; epoch < cfg.epochs && !stopped; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int b = 0; b < per_epoch; ++b) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        stopped = true;
        break;
      }
      std::vector<Sample> items;
      for (int i = 0; i < batch; ++i) {
        const Sample& s = data[order[b * batch + i]];
        items.push_back(cfg.augment ? augment(s, cfg.scale_size, cfg.crop_size, rng)
                                    : resize_sample(s, cfg.crop_size));
      }
      const Batch<T> inputs = make_batch<T>(items);
      ++step;

      Graph<T> g(true);
      typename Graph<T>::Var out;
      Tensor<T> dout;
      const double loss = net.loss(g, inputs, out, dout);
      if (!std::isfinite(loss))
        throw NonFiniteLossError("non-finite " + to_string(cfg.target) + " loss (" +
                                 std::to_string(loss) + ") at step " + std::to_string(step));
      g.backward(out, dout);
      std::vector<const Tensor<T>*> grads;
      for (const auto& p : net.weights().params()) grads.push_back(g.param_grad(p));
      adam.step(net.weights(), grads);
      result.losses.push_back(loss);
      if (opts.on_step) opts.on_step(StepRecord{step, epoch, loss});
    }
    if (stopped) break;
    result.epochs_completed = epoch + 1;
    if (!opts.out_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_epoch%04d.ckpt", to_string(cfg.target).c_str(), epoch + 1);
      save_checkpoint(make_checkpoint(cfg, net.weights(), epoch + 1, result.losses), opts.out_dir / name);
    }
  }
  result.weights = std::move(net.weights());
  if (!opts.out_dir.empty())
    save_checkpoint(make_checkpoint(cfg, result.weights, result.epochs_completed, result.losses),
                    opts.out_dir / (to_string(cfg.target) + ".ckpt"));
  return result;
}

template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const std::vector<Sample>& data, const TrainOptions& opts) {
  cfg.validate();
  NetWeights<T> init = cfg.target == Target::segmenter ? init_gridnet<T>(cfg.gridnet, cfg.seed)
                                                        : init_colornet<T>(cfg.colornet, cfg.seed);
  return train_from<T>(cfg, data, std::move(init), opts);
}

Checkpoint run_training(const TrainConfig& cfg, const std::vector<Sample>& data, const TrainOptions& opts) {
  if (cfg.precision == 64) {
    auto r = train<double>(cfg, data, opts);
    return make_checkpoint(cfg, r.weights, r.epochs_completed, r.losses);
  }
  auto r = train<float>(cfg, data, opts);
  return make_checkpoint(cfg, r.weights, r.epochs_completed, r.losses);
}

#define CHROMASEM_TRAIN_INSTANTIATE(T)                                                             \
  template class Adam<T>;                                                                          \
  template Batch<T> make_batch<T>(const std::vector<Sample>&);                                     \
  template Checkpoint make_checkpoint<T>(const TrainConfig&, const NetWeights<T>&, int,            \
                                         const std::vector<double>&);                              \
  template TrainResult<T> train<T>(const TrainConfig&, const std::vector<Sample>&,                 \
                                   const TrainOptions&);                                           \
  template TrainResult<T> train_from<T>(const TrainConfig&, const std::vector<Sample>&,            \
                                        NetWeights<T>, const TrainOptions&);
CHROMASEM_TRAIN_INSTANTIATE(float)
CHROMASEM_TRAIN_INSTANTIATE(double)

}  // namespace chromasem
