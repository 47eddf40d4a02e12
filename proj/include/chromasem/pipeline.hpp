#pragma once

#include <filesystem>

#include "chromasem/colornet.hpp"
#include "chromasem/colorspace.hpp"
#include "chromasem/segnet.hpp"
#include "chromasem/semantic_map.hpp"

namespace chromasem {

struct PipelineOptions {
  /// The shorter image side is resized to this before padding to the
  /// networks' size divisor.
  int working_short_side = 352;
};

/// Working-resolution geometry for an H x W input.
struct WorkingGeometry {
  int height = 0;  // resized, before padding
  int width = 0;
  int padded_height = 0;
  int padded_width = 0;
};

WorkingGeometry working_geometry(int height, int width, int short_side, int divisor);

template <typename T>
struct Models {
  GridNet<T> segmenter;
  ColorNet<T> colorizer;
};

struct PipelineResult {
  RgbImage image;
  /// The map actually used, at the input resolution.
  SemanticMap map;
  double colorizer_ms = 0.0;
};

/// Coarse semantic map of `img` at its own resolution.
template <typename T>
SemanticMap segment_image(const RgbImage& img, const GridNet<T>& segmenter,
                          const PipelineOptions& opts = {});

/// Luma of `img` plus chroma predicted from (luma, map). The map is `user_map`
/// when given (must match the image size, else ShapeError), otherwise the
/// segmenter's prediction. Output has the input's dimensions.
template <typename T>
PipelineResult colorize_pipeline(const RgbImage& img, const GridNet<T>& segmenter,
                                 const ColorNet<T>& colorizer, const SemanticMap* user_map = nullptr,
                                 const PipelineOptions& opts = {});

/// Builds a network from a checkpoint. A checkpoint of the other network type
/// raises TensorNameError; a missing path raises MissingWeightsError.
template <typename T>
GridNet<T> load_segmenter(const std::filesystem::path& path);
template <typename T>
ColorNet<T> load_colorizer(const std::filesystem::path& path);

}  // namespace chromasem
