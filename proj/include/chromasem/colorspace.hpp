#pragma once

#include <cstdint>
#include <vector>

#include "chromasem/tensor.hpp"

namespace chromasem {

/// 8-bit sRGB, interleaved RGB, row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int h, int w, std::uint8_t fill = 0);

  std::uint8_t* at(int y, int x) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int y, int x) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const RgbImage&) const = default;
};

/// CIE Lab planes (D65). L in [0, 100], a/b nominally in [-128, 127].
struct LabImage {
  int height = 0;
  int width = 0;
  std::vector<double> L;
  std::vector<double> a;
  std::vector<double> b;

  LabImage() = default;
  LabImage(int h, int w);
  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
};

/// Network-space planes: x is [1,1,H,W] luma, y is [1,2,H,W] chroma, all in [-1, 1].
struct NetPlanes {
  Tensor<double> x;
  Tensor<double> y;
};

namespace colorspace {

// Normalization constants: x = L / kLScale - 1, y = ab / kAbScale.
inline constexpr double kLScale = 50.0;
inline constexpr double kAbScale = 128.0;

// D65 reference white.
inline constexpr double kWhiteX = 0.95047;
inline constexpr double kWhiteY = 1.0;
inline constexpr double kWhiteZ = 1.08883;

struct Lab {
  double L, a, b;
};

Lab rgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);
void lab_to_rgb(const Lab& lab, std::uint8_t out[3]);

}  // namespace colorspace

LabImage rgb_to_lab(const RgbImage& img);
RgbImage lab_to_rgb(const LabImage& img);

NetPlanes normalize(const LabImage& img);

/// Inverse of normalize: L from x, (a, b) from y. Throws ShapeError when the
/// spatial sizes disagree or the channel counts are not 1 and 2.
LabImage denormalize_merge(const Tensor<double>& x, const Tensor<double>& y);

/// Luma-only view of an image: the L plane normalized to [-1, 1] as [1,1,H,W].
Tensor<double> luma_plane(const RgbImage& img);

}  // namespace chromasem
