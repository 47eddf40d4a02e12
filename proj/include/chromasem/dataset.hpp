#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "chromasem/colorspace.hpp"
#include "chromasem/semantic_map.hpp"

namespace chromasem {

struct Sample {
  RgbImage rgb;
  SemanticMap map;
};

/// Reads root/images/NAME.{jpg,jpeg,png} paired with root/labels/NAME.png, in
/// lexicographic order of NAME. Throws MissingPairError naming the unpaired
/// file, InvalidLabelError for labels >= num_classes, ShapeError when an image
/// and its map differ in size.
std::vector<Sample> load_dataset(const std::filesystem::path& root,
                                 int num_classes = kDefaultNumClasses);

/// Writes samples as root/images/NNNN.png + root/labels/NNNN.png.
void write_dataset(const std::filesystem::path& root, const std::vector<Sample>& samples);

/// Bilinear image / nearest map resize to scale x scale, a uniform random
/// crop x crop window, then a horizontal flip with probability 1/2. Image and
/// map receive the same transform.
Sample augment(const Sample& s, int scale, int crop, std::mt19937_64& rng);

/// Deterministic resize of image and map to size x size (no randomness).
Sample resize_sample(const Sample& s, int size);

/// Procedural scenes for desk-scale checks: a background class plus a few
/// rectangles and discs of other classes. Every class has its own luma texture
/// (mean level, stripe period and orientation) and its own chroma, so both the
/// map from gray and the colour from (gray, map) are learnable.
std::vector<Sample> synthetic_samples(int count, int size, std::uint64_t seed,
                                      int num_classes = kDefaultNumClasses);

/// The classes synthetic_samples draws from.
std::vector<int> synthetic_classes(int num_classes = kDefaultNumClasses);

}  // namespace chromasem
