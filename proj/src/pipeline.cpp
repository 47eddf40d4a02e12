#include "chromasem/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "chromasem/checkpoint.hpp"
#include "chromasem/image_io.hpp"

namespace chromasem {
namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

template <typename T>
Tensor<T> to_net(const Tensor<double>& t) {
  return tensor_cast<T>(t);
}

// Luma plane resized to the working size and padded by edge replication.
Tensor<double> working_luma(const Tensor<double>& luma, const WorkingGeometry& g) {
  return pad_replicate(resize_planes(luma, g.height, g.width), g.padded_height, g.padded_width);
}

SemanticMap crop_map(const SemanticMap& m, int h, int w) {
  SemanticMap out = new_map(h, w, 0, m.num_classes);
  for (int y = 0; y < h; ++y) std::copy_n(&m.labels[static_cast<std::size_t>(y) * m.width], w, &out.at(y, 0));
  return out;
}

Checkpoint load_for(const std::filesystem::path& path, const std::string& network) {
  if (path.empty()) throw MissingWeightsError("no " + network + " checkpoint given");
  if (!std::filesystem::exists(path))
    throw MissingWeightsError(network + " checkpoint not found: " + path.string());
  Checkpoint ck = load_checkpoint(path);
  if (ck.network != network)
    throw TensorNameError(path.string() + " holds " + ck.network + " tensors, expected " + network);
  return ck;
}

}  // namespace

WorkingGeometry working_geometry(int height, int width, int short_side, int divisor) {
  if (height < 1 || width < 1) throw ShapeError("image must be at least 1x1");
  if (short_side < 1 || divisor < 1) throw ConfigError("working size must be positive");
  const double scale = static_cast<double>(short_side) / std::min(height, width);
  WorkingGeometry g;
  g.height = std::max(1, static_cast<int>(std::lround(height * scale)));
  g.width = std::max(1, static_cast<int>(std::lround(width * scale)));
  g.padded_height = round_up(g.height, divisor);
  g.padded_width = round_up(g.width, divisor);
  return g;
}

template <typename T>
SemanticMap segment_image(const RgbImage& img, const GridNet<T>& segmenter, const PipelineOptions& opts) {
  const WorkingGeometry g =
      working_geometry(img.height, img.width, opts.working_short_side, segmenter.config().size_divisor());
  const Tensor<T> x = to_net<T>(working_luma(luma_plane(img), g));
  const SemanticMap padded = predict_map(segmenter.forward(x), 0);
  return resize_nearest(crop_map(padded, g.height, g.width), img.height, img.width);
}

template <typename T>
PipelineResult colorize_pipeline(const RgbImage& img, const GridNet<T>& segmenter,
                                 const ColorNet<T>& colorizer, const SemanticMap* user_map,
                                 const PipelineOptions& opts) {
  const int div = std::max(segmenter.config().size_divisor(), colorizer.config().size_divisor());
  const WorkingGeometry g = working_geometry(img.height, img.width, opts.working_short_side, div);
  const Tensor<double> luma = luma_plane(img);

  PipelineResult out;
  if (user_map) {
    if (user_map->height != img.height || user_map->width != img.width)
      throw ShapeError("map is " + std::to_string(user_map->width) + "x" +
                       std::to_string(user_map->height) + " but image is " +
                       std::to_string(img.width) + "x" + std::to_string(img.height));
    user_map->validate();
    out.map = *user_map;
  } else {
    out.map = segment_image(img, segmenter, opts);
  }

  // The working map is always derived from the full-size map, so passing the
  // predicted map back in reproduces the automatic path exactly.
  const SemanticMap work_map = resize_nearest(out.map, g.height, g.width);
  const Tensor<T> sem = to_net<T>(pad_replicate(encode_map(work_map), g.padded_height, g.padded_width));
  const Tensor<T> x = to_net<T>(working_luma(luma, g));

  const auto t0 = std::chrono::steady_clock::now();
  const Tensor<T> chroma = colorizer.forward(x, sem);
  out.colorizer_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  Tensor<double> y = resize_planes(crop_planes(tensor_cast<double>(chroma), g.height, g.width),
                                   img.height, img.width);
  for (auto& v : y.values()) v = std::clamp(v, -1.0, 1.0);
  out.image = lab_to_rgb(denormalize_merge(luma, y));
  return out;
}

template <typename T>
GridNet<T> load_segmenter(const std::filesystem::path& path) {
  const Checkpoint ck = load_for(path, "gridnet");
  return GridNet<T>(GridNetConfig::from_json(ck.config), ck.weights_as<T>());
}

template <typename T>
ColorNet<T> load_colorizer(const std::filesystem::path& path) {
  const Checkpoint ck = load_for(path, "colornet");
  return ColorNet<T>(ColorNetConfig::from_json(ck.config), ck.weights_as<T>());
}

#define CHROMASEM_PIPELINE_INSTANTIATE(T)                                                          \
  template SemanticMap segment_image<T>(const RgbImage&, const GridNet<T>&, const PipelineOptions&); \
  template PipelineResult colorize_pipeline<T>(const RgbImage&, const GridNet<T>&,                 \
                                               const ColorNet<T>&, const SemanticMap*,             \
                                               const PipelineOptions&);                            \
  template GridNet<T> load_segmenter<T>(const std::filesystem::path&);                             \
  template ColorNet<T> load_colorizer<T>(const std::filesystem::path&);
CHROMASEM_PIPELINE_INSTANTIATE(float)
CHROMASEM_PIPELINE_INSTANTIATE(double)

}  // namespace chromasem
