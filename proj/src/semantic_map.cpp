#include "chromasem/semantic_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "chromasem/image_io.hpp"

namespace chromasem {

void SemanticMap::validate() const {
  if (num_classes < 1 || num_classes > 256)
    throw InvalidLabelError("num_classes must be in [1, 256], got " + std::to_string(num_classes));
  if (labels.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("semantic map label count does not match its extent");
  for (std::uint8_t l : labels)
    if (l >= num_classes)
      throw InvalidLabelError("label " + std::to_string(l) + " >= " + std::to_string(num_classes));
}

SemanticMap new_map(int height, int width, int fill, int num_classes) {
  if (height < 1 || width < 1) throw ShapeError("semantic map must be at least 1x1");
  if (num_classes < 1 || num_classes > 256)
    throw InvalidLabelError("num_classes must be in [1, 256]");
  if (fill < 0 || fill >= num_classes)
    throw InvalidLabelError("fill label " + std::to_string(fill) + " outside [0, " +
                            std::to_string(num_classes) + ")");
  return SemanticMap{height, width, num_classes,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width,
                                               static_cast<std::uint8_t>(fill))};
}

double encode_label(int label, int num_classes) {
  if (num_classes < 2) return 0.0;
  return 2.0 * label / (num_classes - 1) - 1.0;
}

Tensor<double> encode_map(const SemanticMap& map) {
  Tensor<double> out(Shape{1, 1, map.height, map.width});
  for (std::size_t i = 0; i < map.labels.size(); ++i)
    out[i] = encode_label(map.labels[i], map.num_classes);
  return out;
}

namespace {

void check_stroke(const SemanticMap& map, const Stroke& stroke) {
  if (stroke.label < 0 || stroke.label >= map.num_classes)
    throw InvalidLabelError("stroke label " + std::to_string(stroke.label) + " outside [0, " +
                            std::to_string(map.num_classes) + ")");
  if (!(stroke.radius >= 1.0) || !std::isfinite(stroke.radius))
    throw InvalidStrokeError("stroke radius must be a finite value >= 1");
  if (stroke.path.empty()) throw InvalidStrokeError("stroke path is empty");
  for (const auto& p : stroke.path)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw InvalidStrokeError("stroke path contains a non-finite coordinate");
}

double segment_distance_sq(double px, double py, StrokePoint a, StrokePoint b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double t = 0.0;
  if (len_sq > 0.0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len_sq, 0.0, 1.0);
  const double cx = a.x + t * dx - px, cy = a.y + t * dy - py;
  return cx * cx + cy * cy;
}

}  // namespace

std::size_t apply_stroke_inplace(SemanticMap& map, const Stroke& stroke) {
  check_stroke(map, stroke);
  std::vector<StrokePoint> path(stroke.path);
  for (auto& p : path) {
    p.x = std::clamp(p.x, 0.0, static_cast<double>(map.width - 1));
    p.y = std::clamp(p.y, 0.0, static_cast<double>(map.height - 1));
  }
  // A single point is a degenerate segment.
  if (path.size() == 1) path.push_back(path.front());

  const double r = stroke.radius;
  const double r_sq = r * r + 1e-9;
  const auto label = static_cast<std::uint8_t>(stroke.label);
  std::size_t changed = 0;
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    const StrokePoint a = path[s], b = path[s + 1];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
    const int x1 = std::min(map.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
    const int y1 = std::min(map.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        if (segment_distance_sq(x, y, a, b) > r_sq) continue;
        std::uint8_t& px = map.at(y, x);
        if (px != label) {
          px = label;
          ++changed;
        }
      }
  }
  return changed;
}

StrokeResult apply_stroke(const SemanticMap& map, const Stroke& stroke) {
  StrokeResult result{map, 0};
  result.changed_pixels = apply_stroke_inplace(result.map, stroke);
  return result;
}

std::vector<std::uint8_t> save_map(const SemanticMap& map) {
  map.validate();
  cv::Mat m(map.height, map.width, CV_8UC1, const_cast<std::uint8_t*>(map.labels.data()));
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", m, out)) throw FormatError("map png encode failed");
  return out;
}

SemanticMap load_map(std::span<const std::uint8_t> bytes, int num_classes) {
  if (bytes.empty()) throw FormatError("empty map stream");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat m;
  try {
    m = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw FormatError(std::string("map decode failed: ") + e.what());
  }
  if (m.empty()) throw FormatError("undecodable map data");
  if (m.type() != CV_8UC1)
    throw FormatError("semantic map must be an 8-bit single-channel image");
  SemanticMap map{m.rows, m.cols, num_classes,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(m.rows) * m.cols)};
  for (int y = 0; y < m.rows; ++y) std::copy_n(m.ptr<std::uint8_t>(y), m.cols, &map.at(y, 0));
  map.validate();
  return map;
}

void write_map(const std::filesystem::path& path, const SemanticMap& map) {
  write_file(path, save_map(map));
}

SemanticMap read_map(const std::filesystem::path& path, int num_classes) {
  const auto bytes = read_file(path);
  try {
    return load_map(bytes, num_classes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const InvalidLabelError& e) {
    throw InvalidLabelError(path.string() + ": " + e.what());
  }
}

SemanticMap resize_nearest(const SemanticMap& map, int height, int width) {
  if (map.height == height && map.width == width) return map;
  SemanticMap out{height, width, map.num_classes,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width)};
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(map.height - 1, static_cast<int>((y + 0.5) * map.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(map.width - 1, static_cast<int>((x + 0.5) * map.width / width));
      out.at(y, x) = map.at(sy, sx);
    }
  }
  return out;
}

SemanticMap flip_horizontal(const SemanticMap& map) {
  SemanticMap out = map;
  for (int y = 0; y < map.height; ++y)
    std::reverse(out.labels.begin() + static_cast<std::ptrdiff_t>(y) * map.width,
                 out.labels.begin() + static_cast<std::ptrdiff_t>(y + 1) * map.width);
  return out;
}

nlohmann::json stroke_to_json(const Stroke& stroke) {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& p : stroke.path) path.push_back({p.x, p.y});
  return {{"label", stroke.label}, {"radius", stroke.radius}, {"path", path}};
}

Stroke stroke_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidStrokeError("stroke must be a JSON object");
  Stroke s;
  try {
    s.label = j.at("label").get<int>();
    s.radius = j.at("radius").get<double>();
    for (const auto& p : j.at("path")) {
      if (p.is_array() && p.size() == 2)
        s.path.push_back({p[0].get<double>(), p[1].get<double>()});
      else if (p.is_object())
        s.path.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
      else
        throw InvalidStrokeError("path point must be [x, y] or {x, y}");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidStrokeError(std::string("malformed stroke: ") + e.what());
  }
  return s;
}

namespace {

constexpr const char* kPascalContextNames[] = {
    "background", "aeroplane",  "bag",       "bed",      "bedclothes", "bench",
    "bicycle",    "bird",       "boat",      "book",     "bottle",     "building",
    "bus",        "cabinet",    "car",       "cat",      "ceiling",    "chair",
    "cloth",      "computer",   "cow",       "cup",      "curtain",    "dog",
    "door",       "fence",      "floor",     "flower",   "food",       "grass",
    "ground",     "horse",      "keyboard",  "light",    "motorbike",  "mountain",
    "mouse",      "person",     "plate",     "platform", "pottedplant", "road",
    "rock",       "sheep",      "shelves",   "sidewalk", "sign",       "sky",
    "snow",       "sofa",       "table",     "track",    "train",      "tree",
    "truck",      "tvmonitor",  "wall",      "water",    "window",     "wood"};

// PASCAL VOC palette: bits of the index spread over the RGB high bits.
std::array<std::uint8_t, 3> voc_color(int index) {
  std::array<std::uint8_t, 3> c{};
  int id = index;
  for (int shift = 7; shift >= 0 && id; --shift, id >>= 3) {
    c[0] |= static_cast<std::uint8_t>(((id >> 0) & 1) << shift);
    c[1] |= static_cast<std::uint8_t>(((id >> 1) & 1) << shift);
    c[2] |= static_cast<std::uint8_t>(((id >> 2) & 1) << shift);
  }
  return c;
}

}  // namespace

const ClassTable& ClassTable::pascal_context() {
  static const ClassTable table = [] {
    ClassTable t;
    int index = 0;
    for (const char* name : kPascalContextNames) {
      t.entries_.push_back(ClassInfo{index, name, voc_color(index)});
      ++index;
    }
    return t;
  }();
  return table;
}

ClassTable ClassTable::from_json(const nlohmann::json& j) {
  ClassTable t;
  try {
    for (const auto& e : j) {
      ClassInfo info;
      info.index = e.at("index").get<int>();
      info.name = e.at("name").get<std::string>();
      const auto& col = e.at("color");
      for (int c = 0; c < 3; ++c) info.color[c] = col.at(c).get<std::uint8_t>();
      t.entries_.push_back(std::move(info));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed class table: ") + e.what());
  }
  std::sort(t.entries_.begin(), t.entries_.end(),
            [](const ClassInfo& a, const ClassInfo& b) { return a.index < b.index; });
  std::set<std::array<std::uint8_t, 3>> colors;
  for (std::size_t i = 0; i < t.entries_.size(); ++i) {
    if (t.entries_[i].index != static_cast<int>(i))
      throw FormatError("class table indices must be dense from 0");
    if (!colors.insert(t.entries_[i].color).second)
      throw FormatError("class table display colours must be unique");
  }
  return t;
}

ClassTable ClassTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ClassTable::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries_)
    out.push_back({{"index", e.index},
                   {"name", e.name},
                   {"color", {e.color[0], e.color[1], e.color[2]}}});
  return out;
}

}  // namespace chromasem
