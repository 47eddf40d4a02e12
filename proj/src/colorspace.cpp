#include "chromasem/colorspace.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace chromasem {

RgbImage::RgbImage(int h, int w, std::uint8_t fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {
  if (h < 1 || w < 1) throw ShapeError("RgbImage: empty extent");
}

LabImage::LabImage(int h, int w)
    : height(h), width(w), L(size(), 0.0), a(size(), 0.0), b(size(), 0.0) {}

namespace colorspace {
namespace {

constexpr double kEpsilon = 216.0 / 24389.0;  // (6/29)^3
constexpr double kKappa = 24389.0 / 27.0;     // (29/3)^3

// sRGB primaries with D65 white, linear RGB -> XYZ.
constexpr double kRgbToXyz[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                    {0.2126729, 0.7151522, 0.0721750},
                                    {0.0193339, 0.1191920, 0.9503041}};
constexpr double kXyzToRgb[3][3] = {{3.2404542, -1.5371385, -0.4985314},
                                    {-0.9692660, 1.8760108, 0.0415560},
                                    {0.0556434, -0.2040259, 1.0572252}};

const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
    return t;
  }();
  return table;
}

double compand(double linear) {
  return linear <= 0.0031308 ? 12.92 * linear : 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }

double lab_f_inv(double f) {
  const double f3 = f * f * f;
  return f3 > kEpsilon ? f3 : (116.0 * f - 16.0) / kKappa;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Lab rgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto& lin = linear_table();
  const double rl = lin[r], gl = lin[g], bl = lin[b];
  const double x = kRgbToXyz[0][0] * rl + kRgbToXyz[0][1] * gl + kRgbToXyz[0][2] * bl;
  const double y = kRgbToXyz[1][0] * rl + kRgbToXyz[1][1] * gl + kRgbToXyz[1][2] * bl;
  const double z = kRgbToXyz[2][0] * rl + kRgbToXyz[2][1] * gl + kRgbToXyz[2][2] * bl;
  const double fx = lab_f(x / kWhiteX), fy = lab_f(y / kWhiteY), fz = lab_f(z / kWhiteZ);
  return Lab{std::clamp(116.0 * fy - 16.0, 0.0, 100.0), 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void lab_to_rgb(const Lab& lab, std::uint8_t out[3]) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double x = kWhiteX * lab_f_inv(fx);
  const double y = kWhiteY * lab_f_inv(fy);
  const double z = kWhiteZ * lab_f_inv(fz);
  for (int c = 0; c < 3; ++c) {
    const double linear = kXyzToRgb[c][0] * x + kXyzToRgb[c][1] * y + kXyzToRgb[c][2] * z;
    out[c] = quantize(compand(std::max(linear, 0.0)));
  }
}

}  // namespace colorspace

LabImage rgb_to_lab(const RgbImage& img) {
  LabImage lab(img.height, img.width);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(lab.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::uint8_t* p = img.pixels.data() + i * 3;
    const auto v = colorspace::rgb_to_lab(p[0], p[1], p[2]);
    lab.L[i] = v.L;
    lab.a[i] = v.a;
    lab.b[i] = v.b;
  }
  return lab;
}

RgbImage lab_to_rgb(const LabImage& img) {
  RgbImage out(img.height, img.width);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(img.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    colorspace::lab_to_rgb({img.L[i], img.a[i], img.b[i]}, out.pixels.data() + i * 3);
  return out;
}

NetPlanes normalize(const LabImage& img) {
  NetPlanes planes{Tensor<double>(Shape{1, 1, img.height, img.width}),
                   Tensor<double>(Shape{1, 2, img.height, img.width})};
  const std::size_t n = img.size();
  for (std::size_t i = 0; i < n; ++i) {
    planes.x[i] = std::clamp(img.L[i] / colorspace::kLScale - 1.0, -1.0, 1.0);
    planes.y[i] = std::clamp(img.a[i] / colorspace::kAbScale, -1.0, 1.0);
    planes.y[n + i] = std::clamp(img.b[i] / colorspace::kAbScale, -1.0, 1.0);
  }
  return planes;
}

LabImage denormalize_merge(const Tensor<double>& x, const Tensor<double>& y) {
  const Shape xs = x.shape(), ys = y.shape();
  if (xs.n != 1 || xs.c != 1 || ys.n != 1 || ys.c != 2 || xs.h != ys.h || xs.w != ys.w)
    throw ShapeError("denormalize_merge: luma " + xs.str() + " vs chroma " + ys.str());
  LabImage lab(xs.h, xs.w);
  const std::size_t n = lab.size();
  for (std::size_t i = 0; i < n; ++i) {
    lab.L[i] = (x[i] + 1.0) * colorspace::kLScale;
    lab.a[i] = y[i] * colorspace::kAbScale;
    lab.b[i] = y[n + i] * colorspace::kAbScale;
  }
  return lab;
}

Tensor<double> luma_plane(const RgbImage& img) { return normalize(rgb_to_lab(img)).x; }

}  // namespace chromasem
