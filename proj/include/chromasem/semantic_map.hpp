#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chromasem/tensor.hpp"

namespace chromasem {

/// 59 PASCAL-Context classes plus background at index 0.
inline constexpr int kDefaultNumClasses = 60;

/// H x W field of class indices in [0, num_classes). Labels are stored in 8 bits,
/// so num_classes is capped at 256.
struct SemanticMap {
  int height = 0;
  int width = 0;
  int num_classes = kDefaultNumClasses;
  std::vector<std::uint8_t> labels;

  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const SemanticMap&) const = default;

  /// Throws InvalidLabelError if any label is out of range.
  void validate() const;
};

struct StrokePoint {
  double x = 0.0;
  double y = 0.0;
};

/// One brush action: every pixel within `radius` of the polyline `path` gets `label`.
struct Stroke {
  int label = 0;
  double radius = 1.0;
  std::vector<StrokePoint> path;
};

SemanticMap new_map(int height, int width, int fill, int num_classes = kDefaultNumClasses);

/// Scalar network encoding: 2 * label / (C - 1) - 1, as a [1,1,H,W] tensor.
Tensor<double> encode_map(const SemanticMap& map);
double encode_label(int label, int num_classes);

struct StrokeResult {
  SemanticMap map;
  std::size_t changed_pixels = 0;
};

/// Paints the swept disc of `stroke` onto a copy of `map`. Path points are
/// clamped into the image. Throws InvalidLabelError for label >= C and
/// InvalidStrokeError for an empty path, non-finite coordinates or radius < 1.
StrokeResult apply_stroke(const SemanticMap& map, const Stroke& stroke);

/// In-place variant; returns the number of pixels whose label changed.
std::size_t apply_stroke_inplace(SemanticMap& map, const Stroke& stroke);

/// 8-bit single-channel PNG, pixel value = label index.
std::vector<std::uint8_t> save_map(const SemanticMap& map);
SemanticMap load_map(std::span<const std::uint8_t> bytes, int num_classes = kDefaultNumClasses);
void write_map(const std::filesystem::path& path, const SemanticMap& map);
SemanticMap read_map(const std::filesystem::path& path, int num_classes = kDefaultNumClasses);

/// Nearest-neighbour resample (pixel-centre aligned).
SemanticMap resize_nearest(const SemanticMap& map, int height, int width);

/// Horizontal mirror.
SemanticMap flip_horizontal(const SemanticMap& map);

nlohmann::json stroke_to_json(const Stroke& stroke);
/// Parses {"label": int, "radius": number, "path": [[x, y], ...]}; throws
/// InvalidStrokeError on malformed input.
Stroke stroke_from_json(const nlohmann::json& j);

struct ClassInfo {
  int index = 0;
  std::string name;
  std::array<std::uint8_t, 3> color{};
};

/// Index -> (name, display colour) table for the PASCAL-Context label set.
class ClassTable {
 public:
  /// The built-in 60-entry table.
  static const ClassTable& pascal_context();
  static ClassTable from_json(const nlohmann::json& j);
  static ClassTable load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  const std::vector<ClassInfo>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const ClassInfo& operator[](std::size_t i) const { return entries_.at(i); }

 private:
  std::vector<ClassInfo> entries_;
};

}  // namespace chromasem
