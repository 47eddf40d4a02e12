#include "chromasem/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "chromasem/image_io.hpp"

namespace chromasem {
namespace fs = std::filesystem;

namespace {

bool is_image_ext(std::string ext) {
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

std::map<std::string, fs::path> list_files(const fs::path& dir, bool images) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory missing: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (images ? !is_image_ext(ext) : ext != ".png") continue;
    const auto stem = e.path().stem().string();
    if (!out.emplace(stem, e.path()).second)
      throw MissingPairError("ambiguous image for " + stem + ": " + out[stem].string() + " and " +
                             e.path().string());
  }
  return out;
}

}  // namespace

std::vector<Sample> load_dataset(const fs::path& root, int num_classes) {
  const auto images = list_files(root / "images", true);
  const auto labels = list_files(root / "labels", false);
  for (const auto& [stem, path] : images)
    if (!labels.count(stem))
      throw MissingPairError("image " + path.string() + " has no label file labels/" + stem + ".png");
  for (const auto& [stem, path] : labels)
    if (!images.count(stem))
      throw MissingPairError("label " + path.string() + " has no image file images/" + stem +
                             ".{jpg,jpeg,png}");

  std::vector<Sample> out;
  out.reserve(images.size());
  for (const auto& [stem, path] : images) {
    Sample s{read_image(path), SemanticMap{}};
    try {
      s.map = read_map(labels.at(stem), num_classes);
    } catch (const InvalidLabelError& e) {
      throw InvalidLabelError(labels.at(stem).string() + ": " + e.what());
    }
    if (s.map.height != s.rgb.height || s.map.width != s.rgb.width)
      throw ShapeError(stem + ": image is " + std::to_string(s.rgb.width) + "x" +
                       std::to_string(s.rgb.height) + " but its map is " +
                       std::to_string(s.map.width) + "x" + std::to_string(s.map.height));
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const fs::path& root, const std::vector<Sample>& samples) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.png", i);
    write_png(root / "images" / name, samples[i].rgb);
    write_map(root / "labels" / name, samples[i].map);
  }
}

Sample resize_sample(const Sample& s, int size) {
  return Sample{resize_bilinear(s.rgb, size, size), resize_nearest(s.map, size, size)};
}

Sample augment(const Sample& s, int scale, int crop, std::mt19937_64& rng) {
  if (crop > scale) throw ConfigError("augment: crop larger than scale");
  const Sample scaled = resize_sample(s, scale);
  std::uniform_int_distribution<int> pick(0, scale - crop);
  const int y0 = pick(rng);
  const int x0 = pick(rng);
  const bool flip = std::bernoulli_distribution(0.5)(rng);

  Sample out{RgbImage(crop, crop), new_map(crop, crop, 0, s.map.num_classes)};
  for (int y = 0; y < crop; ++y)
    for (int x = 0; x < crop; ++x) {
      const int sx = flip ? x0 + crop - 1 - x : x0 + x;
      std::copy_n(scaled.rgb.at(y0 + y, sx), 3, out.rgb.at(y, x));
      out.map.at(y, x) = scaled.map.at(y0 + y, sx);
    }
  return out;
}

std::vector<int> synthetic_classes(int num_classes) {
  std::vector<int> out;
  for (int c : {0, 7, 15, 26, 33, 48, 59})
    if (c < num_classes) out.push_back(c);
  return out;
}

std::vector<Sample> synthetic_samples(int count, int size, std::uint64_t seed, int num_classes) {
  const auto classes = synthetic_classes(num_classes);
  const int k = static_cast<int>(classes.size());
  if (k < 2) throw ConfigError("synthetic data needs at least two classes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Sample> out;
  for (int n = 0; n < count; ++n) {
    SemanticMap map = new_map(size, size, classes[0], num_classes);
    const int shapes = 2 + static_cast<int>(unit(rng) * 2);
    for (int s = 0; s < shapes; ++s) {
      const int label = classes[1 + static_cast<int>(unit(rng) * (k - 1)) % (k - 1)];
      const double cx = unit(rng) * size, cy = unit(rng) * size;
      const double r = size * (0.15 + 0.2 * unit(rng));
      const bool disc = unit(rng) < 0.5;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double dx = x - cx, dy = y - cy;
          const bool in = disc ? dx * dx + dy * dy <= r * r : std::abs(dx) <= r && std::abs(dy) <= 0.7 * r;
          if (in) map.at(y, x) = static_cast<std::uint8_t>(label);
        }
    }

    LabImage lab(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int label = map.at(y, x);
        const int idx = static_cast<int>(std::find(classes.begin(), classes.end(), label) - classes.begin());
        const double t = static_cast<double>(idx) / k;
        const double angle = std::numbers::pi * t;
        const double period = 3.0 + idx;
        const double phase = (x * std::cos(angle) + y * std::sin(angle)) / period;
        const std::size_t i = static_cast<std::size_t>(y) * size + x;
        lab.L[i] = 25.0 + 50.0 * t + 12.0 * std::sin(2 * std::numbers::pi * phase);
        const double hue = 2 * std::numbers::pi * t;
        const double chroma = idx == 0 ? 0.0 : 45.0;
        lab.a[i] = chroma * std::cos(hue);
        lab.b[i] = chroma * std::sin(hue);
      }
    out.push_back(Sample{lab_to_rgb(lab), std::move(map)});
  }
  return out;
}

}  // namespace chromasem
