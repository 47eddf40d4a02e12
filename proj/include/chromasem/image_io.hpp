#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "chromasem/colorspace.hpp"

namespace chromasem {

/// Decodes PNG or JPEG bytes into RGB. Gray and palette inputs are expanded to
/// three channels, alpha is dropped. Throws FormatError on undecodable input.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RgbImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Bilinear resample of an RGB image.
RgbImage resize_bilinear(const RgbImage& img, int height, int width);

/// Bilinear resample of every channel plane of a [1,C,H,W] tensor.
Tensor<double> resize_planes(const Tensor<double>& t, int height, int width);

/// Extends a [1,C,H,W] tensor on the bottom and right by edge replication.
Tensor<double> pad_replicate(const Tensor<double>& t, int height, int width);

/// Top-left [0,h) x [0,w) window of a [1,C,H,W] tensor.
Tensor<double> crop_planes(const Tensor<double>& t, int height, int width);

}  // namespace chromasem
