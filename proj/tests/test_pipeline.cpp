#include <cmath>

#include <gtest/gtest.h>

#include "chromasem/checkpoint.hpp"
#include "chromasem/dataset.hpp"
#include "chromasem/error.hpp"
#include "chromasem/image_io.hpp"
#include "chromasem/pipeline.hpp"
#include "test_util.hpp"

namespace chromasem {
namespace {

using test::TempDir;

GridNetConfig small_grid() {
  GridNetConfig c;
  c.row_depths = {4, 6, 8, 8, 8};
  return c;
}

ColorNetConfig small_color() {
  ColorNetConfig c;
  c.encoder_depths = {4, 6, 8, 8, 8};
  c.decoder_input_depths = {16, 16, 16, 12, 8};
  return c;
}

// Gray rendering of a synthetic scene at h x w.
RgbImage gray_scene(int h, int w, std::uint64_t seed = 1) {
  const Sample s = synthetic_samples(1, 48, seed).front();
  LabImage lab = rgb_to_lab(resize_bilinear(s.rgb, h, w));
  std::fill(lab.a.begin(), lab.a.end(), 0.0);
  std::fill(lab.b.begin(), lab.b.end(), 0.0);
  return lab_to_rgb(lab);
}

// A colorizer whose output is the constant chroma (a, b) in network units.
ColorNet<float> constant_colorizer(float a, float b) {
  auto w = init_colornet<float>(small_color(), 3);
  for (auto& v : w.get("decoder.d1.conv2.weight").value.values()) v = 0.0f;
  auto& bias = w.get("decoder.d1.conv2.bias").value;
  bias[0] = std::atanh(a);
  bias[1] = std::atanh(b);
  return ColorNet<float>(small_color(), std::move(w));
}

struct Nets {
  GridNet<float> seg = GridNet<float>::init(small_grid(), 1);
  ColorNet<float> col = ColorNet<float>::init(small_color(), 2);
};

PipelineOptions fast() {
  PipelineOptions o;
  o.working_short_side = 64;
  return o;
}

TEST(WorkingGeometry, ShortSideAndPadding) {
  const auto g = working_geometry(375, 500, 352, 16);
  EXPECT_EQ(g.height, 352);
  EXPECT_EQ(g.width, 469);
  EXPECT_EQ(g.padded_height, 352);
  EXPECT_EQ(g.padded_width, 480);
  const auto sq = working_geometry(352, 352, 352, 16);
  EXPECT_EQ(sq.padded_height, 352);
  EXPECT_EQ(sq.padded_width, 352);
  const auto tall = working_geometry(1000, 10, 352, 16);
  EXPECT_EQ(tall.width, 352);
  EXPECT_EQ(tall.height, 35200);
  EXPECT_THROW(working_geometry(0, 5, 352, 16), ShapeError);
}

TEST(Pipeline, SquareInputKeepsSize) {
  Nets n;
  const auto r = colorize_pipeline(gray_scene(352, 352), n.seg, n.col);
  EXPECT_EQ(r.image.height, 352);
  EXPECT_EQ(r.image.width, 352);
  EXPECT_EQ(r.map.height, 352);
  EXPECT_EQ(r.map.width, 352);
  EXPECT_GT(r.colorizer_ms, 0.0);
}

TEST(Pipeline, NonSquareInputRestoredExactly) {
  Nets n;
  const auto r = colorize_pipeline(gray_scene(375, 500), n.seg, n.col, nullptr, fast());
  EXPECT_EQ(r.image.height, 375);
  EXPECT_EQ(r.image.width, 500);
  EXPECT_EQ(r.map.height, 375);
  EXPECT_EQ(r.map.width, 500);
}

TEST(Pipeline, OddTinyInputs) {
  Nets n;
  for (auto [h, w] : {std::pair{1, 1}, {7, 3}, {17, 33}}) {
    const auto r = colorize_pipeline(gray_scene(h, w), n.seg, n.col, nullptr, fast());
    EXPECT_EQ(r.image.height, h);
    EXPECT_EQ(r.image.width, w);
  }
}

TEST(Pipeline, PredictedMapAsUserMapIsBitIdentical) {
  Nets n;
  for (auto [h, w] : {std::pair{64, 64}, {75, 100}, {101, 67}}) {
    const RgbImage img = gray_scene(h, w, 4);
    const auto automatic = colorize_pipeline(img, n.seg, n.col, nullptr, fast());
    const auto substituted = colorize_pipeline(img, n.seg, n.col, &automatic.map, fast());
    EXPECT_EQ(automatic.image, substituted.image) << h << "x" << w;
    EXPECT_EQ(automatic.map, substituted.map);
  }
}

TEST(Pipeline, AutomaticMapEqualsSegmentImage) {
  Nets n;
  const RgbImage img = gray_scene(75, 100, 5);
  EXPECT_EQ(colorize_pipeline(img, n.seg, n.col, nullptr, fast()).map, segment_image(img, n.seg, fast()));
}

TEST(Pipeline, UserMapChangesTheOutput) {
  Nets n;
  const RgbImage img = gray_scene(64, 64, 2);
  const auto a = colorize_pipeline(img, n.seg, n.col, nullptr, fast());
  SemanticMap other = new_map(64, 64, 40);
  const auto b = colorize_pipeline(img, n.seg, n.col, &other, fast());
  EXPECT_EQ(b.map, other);
  EXPECT_NE(a.image, b.image);
}

TEST(Pipeline, UserMapSizeMismatchIsShapeError) {
  Nets n;
  const SemanticMap m = new_map(64, 63, 0);
  EXPECT_THROW(colorize_pipeline(gray_scene(64, 64), n.seg, n.col, &m, fast()), ShapeError);
}

TEST(Pipeline, UserMapWithBadLabelIsRejected) {
  Nets n;
  SemanticMap m = new_map(32, 32, 0);
  m.labels[5] = 200;
  EXPECT_THROW(colorize_pipeline(gray_scene(32, 32), n.seg, n.col, &m, fast()), InvalidLabelError);
}

TEST(Pipeline, PreservesLumaForInGamutChroma) {
  Nets n;
  const ColorNet<float> col = constant_colorizer(0.12f, -0.08f);
  const RgbImage img = gray_scene(90, 120, 6);
  const auto r = colorize_pipeline(img, n.seg, col, nullptr, fast());
  const LabImage in = rgb_to_lab(img), out = rgb_to_lab(r.image);
  double worst = 0.0, chroma = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    worst = std::max(worst, std::abs(in.L[i] - out.L[i]));
    chroma += std::hypot(out.a[i], out.b[i]);
  }
  EXPECT_LE(worst, 1.5);
  EXPECT_GT(chroma / in.size(), 10.0);  // the output really is colored
}

TEST(Pipeline, ZeroChromaReturnsTheGrayImage) {
  Nets n;
  const ColorNet<float> col = constant_colorizer(0.0f, 0.0f);
  const RgbImage img = gray_scene(40, 50, 7);
  EXPECT_EQ(colorize_pipeline(img, n.seg, col, nullptr, fast()).image, img);
}

TEST(Pipeline, DeterministicPngBytes) {
  Nets n;
  const RgbImage img = gray_scene(48, 80, 8);
  const auto a = encode_png(colorize_pipeline(img, n.seg, n.col, nullptr, fast()).image);
  const auto b = encode_png(colorize_pipeline(img, n.seg, n.col, nullptr, fast()).image);
  EXPECT_EQ(a, b);
}

TEST(Pipeline, BackendsAgreeOnMaps) {
  // Same weights in double: the argmax map should match the float one almost everywhere.
  Nets n;
  const GridNet<double> seg64(small_grid(), weights_cast<double>(n.seg.weights()));
  const RgbImage img = gray_scene(64, 64, 9);
  const auto a = segment_image(img, n.seg, fast());
  const auto b = segment_image(img, seg64, fast());
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) same += a.labels[i] == b.labels[i];
  EXPECT_GE(same, a.labels.size() * 99 / 100);
}

TEST(Pipeline, LoadersCheckNetworkType) {
  TempDir dir("pipe");
  Nets n;
  save_checkpoint(Checkpoint::from<float>("gridnet", small_grid().to_json(), n.seg.weights()), dir / "s.ckpt");
  save_checkpoint(Checkpoint::from<float>("colornet", small_color().to_json(), n.col.weights()), dir / "c.ckpt");
  EXPECT_NO_THROW(load_segmenter<float>(dir / "s.ckpt"));
  EXPECT_NO_THROW(load_colorizer<float>(dir / "c.ckpt"));
  EXPECT_THROW(load_segmenter<float>(dir / "c.ckpt"), TensorNameError);
  EXPECT_THROW(load_colorizer<float>(dir / "s.ckpt"), TensorNameError);
  EXPECT_THROW(load_colorizer<float>(dir / "none.ckpt"), MissingWeightsError);
  EXPECT_THROW(load_colorizer<float>(""), MissingWeightsError);
}

TEST(Pipeline, LoadedNetsGiveSameImage) {
  TempDir dir("pipe");
  Nets n;
  save_checkpoint(Checkpoint::from<float>("gridnet", small_grid().to_json(), n.seg.weights()), dir / "s.ckpt");
  save_checkpoint(Checkpoint::from<float>("colornet", small_color().to_json(), n.col.weights()), dir / "c.ckpt");
  const RgbImage img = gray_scene(50, 70, 3);
  const auto seg = load_segmenter<float>(dir / "s.ckpt");
  const auto col = load_colorizer<float>(dir / "c.ckpt");
  EXPECT_EQ(colorize_pipeline(img, seg, col, nullptr, fast()).image,
            colorize_pipeline(img, n.seg, n.col, nullptr, fast()).image);
}

}  // namespace
}  // namespace chromasem
