#include <cmath>

#include <gtest/gtest.h>

#include "chromasem/colornet.hpp"
#include "chromasem/segnet.hpp"
#include "test_util.hpp"

namespace chromasem {
namespace {

using test::max_abs_diff;
using test::random_tensor;

// Parameter totals from tests/oracles/derived_values.py.
constexpr std::size_t kGridNetParams = 13154780;
constexpr std::size_t kColorNetParams = 8823010;
constexpr std::size_t kColorNetEncoderParams = 4711648;

GridNetConfig small_grid(int classes = 6) {
  GridNetConfig c;
  c.row_depths = {4, 6, 8, 8, 8};
  c.num_classes = classes;
  return c;
}

ColorNetConfig small_color() {
  ColorNetConfig c;
  c.encoder_depths = {4, 6, 8, 8, 8};
  c.decoder_input_depths = {16, 16, 16, 12, 8};
  return c;
}

TEST(GridNet, ParameterCount) {
  const auto w = init_gridnet<float>(GridNetConfig{}, 1);
  EXPECT_EQ(w.parameter_count(), kGridNetParams);
}

TEST(GridNet, InitDeterministicPerSeed) {
  const auto a = init_gridnet<float>(small_grid(), 3);
  const auto b = init_gridnet<float>(small_grid(), 3);
  const auto c = init_gridnet<float>(small_grid(), 4);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.tensor_count(); ++i) {
    EXPECT_EQ(a.params()[i].value.values(), b.params()[i].value.values());
    any_diff = any_diff || a.params()[i].value.values() != c.params()[i].value.values();
  }
  EXPECT_TRUE(any_diff);
}

TEST(GridNet, ShapesAndDivisibility) {
  const auto net = GridNet<float>::init(GridNetConfig{}, 1);
  const auto y = net.forward(random_tensor<float>({1, 1, 32, 32}, 1));
  EXPECT_EQ(y.shape(), (Shape{1, 60, 32, 32}));
  for (auto v : y.values()) ASSERT_TRUE(std::isfinite(v));
  EXPECT_EQ(net.forward(random_tensor<float>({2, 1, 48, 16}, 1)).shape(), (Shape{2, 60, 48, 16}));
  EXPECT_THROW(net.forward(Tensor<float>({1, 1, 33, 33})), ShapeError);
  EXPECT_THROW(net.forward(Tensor<float>({1, 2, 32, 32})), ShapeError);
}

TEST(GridNet, InferenceDeterministicAndBackendsAgree) {
  const auto net = GridNet<double>::init(small_grid(), 2);
  const auto x = random_tensor<double>({1, 1, 16, 32}, 5);
  const auto a = net.forward(x);
  EXPECT_EQ(a.values(), net.forward(x).values());
  EXPECT_LT(max_abs_diff(a, net.forward(x, Backend::reference)), 1e-10);
}

TEST(GridNet, WrongWeightsRejected) {
  auto w = init_gridnet<float>(small_grid(), 1);
  EXPECT_THROW(GridNet<float>(GridNetConfig{}, w), ShapeError);
  w.add("extra", Shape{1, 1, 1, 1});
  EXPECT_THROW(GridNet<float>(small_grid(), w), TensorNameError);
  EXPECT_THROW(GridNet<float>(small_grid(), init_colornet<float>(small_color(), 1)), TensorNameError);
}

TEST(PredictMap, ArgmaxAndTies) {
  Tensor<float> logits({1, 10, 2, 3}, 0.0f);
  EXPECT_EQ(predict_map(logits), new_map(2, 3, 0, 10));
  for (int i = 0; i < 6; ++i) logits.plane(0, 7)[i] = 1.0f;
  EXPECT_EQ(predict_map(logits), new_map(2, 3, 7, 10));

  SemanticMap target = new_map(2, 3, 0, 10);
  target.labels = {1, 9, 3, 0, 4, 4};
  Tensor<float> onehot({1, 10, 2, 3}, 0.0f);
  for (int i = 0; i < 6; ++i) onehot.plane(0, target.labels[i])[i] = 1.0f;
  EXPECT_EQ(predict_map(onehot), target);
}

TEST(SegLoss, UniformLogitsGiveLogC) {
  Tensor<double> logits({1, 60, 4, 4}, 0.25);
  const SemanticMap t = new_map(4, 4, 17);
  // ln 60, tests/oracles/derived_values.py
  EXPECT_NEAR(seg_loss(logits, std::span(&t, 1)), 4.094344562222, 1e-12);
}

TEST(SegLoss, SaturatedTargetNearZero) {
  SemanticMap t = new_map(4, 4, 0);
  for (std::size_t i = 0; i < t.labels.size(); ++i) t.labels[i] = static_cast<std::uint8_t>(i * 3);
  Tensor<double> logits({1, 60, 4, 4}, 0.0);
  for (std::size_t i = 0; i < 16; ++i) logits.plane(0, t.labels[i])[i] = 1000.0;
  EXPECT_LT(seg_loss(logits, std::span(&t, 1)), 1e-6);
}

TEST(SegLoss, MatchesBruteForce) {
  const auto logits = random_tensor<double>({1, 5, 4, 4}, 9, -3, 3);
  SemanticMap t = new_map(4, 4, 0, 5);
  for (std::size_t i = 0; i < 16; ++i) t.labels[i] = static_cast<std::uint8_t>((i * 11) % 5);
  double want = 0.0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      double z = 0.0;
      for (int c = 0; c < 5; ++c) z += std::exp(logits.at(0, c, y, x));
      want += -std::log(std::exp(logits.at(0, t.at(y, x), y, x)) / z);
    }
  want /= 16;
  EXPECT_NEAR(seg_loss(logits, std::span(&t, 1)), want, 1e-12);
  EXPECT_GE(want, 0.0);
}

TEST(SegLoss, InvalidTargetLabel) {
  Tensor<double> logits({1, 5, 2, 2}, 0.0);
  SemanticMap t = new_map(2, 2, 0, 60);
  t.labels[1] = 7;
  EXPECT_THROW(seg_loss(logits, std::span(&t, 1)), InvalidLabelError);
}

TEST(PixelAccuracy, CountsMatches) {
  SemanticMap t = new_map(1, 4, 0, 3);
  t.labels = {0, 1, 2, 2};
  Tensor<float> logits({1, 3, 1, 4}, 0.0f);
  logits.plane(0, 1)[1] = 1;
  logits.plane(0, 2)[2] = 1;
  logits.plane(0, 1)[3] = 1;
  EXPECT_DOUBLE_EQ(pixel_accuracy(logits, std::span(&t, 1)), 0.75);
}

TEST(ColorNet, ParameterCountsAndSharing) {
  const ColorNetConfig cfg;
  const auto w = init_colornet<float>(cfg, 1);
  EXPECT_EQ(w.parameter_count(), kColorNetParams);
  EXPECT_EQ(w.parameter_count("encoder."), kColorNetEncoderParams);
  EXPECT_EQ(single_stream_encoder_parameter_count(cfg), kColorNetEncoderParams);
}

TEST(ColorNet, ConfigInvariant) {
  ColorNetConfig c;
  c.decoder_input_depths = {1024, 512, 256, 128, 32};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(ColorNetConfig::from_json(ColorNetConfig{}.to_json()).to_json(), ColorNetConfig{}.to_json());
}

TEST(ColorNet, EncoderPyramidShapes) {
  const auto net = ColorNet<float>::init(ColorNetConfig{}, 1);
  Graph<float> g(false);
  const auto pyr = net.encoder_forward(g, g.input(Tensor<float>({1, 1, 32, 32})));
  ASSERT_EQ(pyr.size(), 5u);
  EXPECT_EQ(g.value(pyr[4]).shape(), (Shape{1, 512, 2, 2}));
  EXPECT_EQ(g.value(pyr[0]).shape(), (Shape{1, 32, 32, 32}));
}

TEST(ColorNet, OutputBoundedFiniteAndDeterministic) {
  const auto net = ColorNet<float>::init(ColorNetConfig{}, 1);
  const auto gray = random_tensor<float>({1, 1, 48, 32}, 1);
  const auto sem = random_tensor<float>({1, 1, 48, 32}, 2);
  const auto y = net.forward(gray, sem);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 48, 32}));
  for (auto v : y.values()) {
    ASSERT_TRUE(std::isfinite(v));
    ASSERT_LE(std::abs(v), 1.0f);
  }
  EXPECT_EQ(y.values(), net.forward(gray, sem).values());
}

TEST(ColorNet, ShapeErrors) {
  const auto net = ColorNet<float>::init(small_color(), 1);
  EXPECT_THROW(net.forward(Tensor<float>({1, 1, 32, 32}), Tensor<float>({1, 1, 32, 16})), ShapeError);
  EXPECT_THROW(net.forward(Tensor<float>({1, 1, 24, 24}), Tensor<float>({1, 1, 24, 24})), ShapeError);
}

TEST(ColorNet, SemanticInputChangesOutput) {
  const auto net = ColorNet<double>::init(small_color(), 4);
  const auto gray = random_tensor<double>({1, 1, 16, 16}, 1);
  const auto a = net.forward(gray, Tensor<double>({1, 1, 16, 16}, -1.0));
  const auto b = net.forward(gray, Tensor<double>({1, 1, 16, 16}, 0.5));
  EXPECT_GT(max_abs_diff(a, b), 0.0);
}

TEST(ColorNet, BackendsAgree) {
  const auto net = ColorNet<double>::init(small_color(), 4);
  const auto gray = random_tensor<double>({2, 1, 16, 16}, 1);
  const auto sem = random_tensor<double>({2, 1, 16, 16}, 2);
  EXPECT_LT(max_abs_diff(net.forward(gray, sem), net.forward(gray, sem, Backend::reference)), 1e-12);
}

TEST(InstanceNorm, HandComputedAndConstant) {
  Tensor<double> f({1, 1, 1, 4}, {1, 2, 3, 4});
  const auto y = instance_norm(f, 1e-5);
  // tests/oracles/derived_values.py
  const double want[4] = {-1.3416354200, -0.4472118067, 0.4472118067, 1.3416354200};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[i], want[i], 1e-9);
  const auto z = instance_norm(Tensor<float>({1, 2, 3, 3}, 7.0f), 1e-5f);
  for (auto v : z.values()) EXPECT_LT(std::abs(v), 1e-2f);
}

TEST(InstanceNorm, RandomStatistics) {
  const auto f = random_tensor<double>({3, 5, 9, 11}, 12, -4, 9);
  const auto y = instance_norm(f, 1e-5);
  const std::size_t plane = 99;
  for (int n = 0; n < 3; ++n)
    for (int c = 0; c < 5; ++c) {
      const double* p = y.plane(n, c);
      double m = 0, v = 0;
      for (std::size_t i = 0; i < plane; ++i) m += p[i];
      m /= plane;
      for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      v /= plane;
      EXPECT_LT(std::abs(m), 1e-5);
      EXPECT_LT(std::abs(v - 1.0), 1e-3);
    }
}

TEST(HuberLoss, DirectEvaluation) {
  auto one = [](double r) {
    Tensor<double> p({1, 1, 1, 1}, 0.0), t({1, 1, 1, 1}, r);
    return huber_loss(p, t, 1.0);
  };
  EXPECT_EQ(one(0.0), 0.0);
  EXPECT_DOUBLE_EQ(one(0.5), 0.125);
  EXPECT_DOUBLE_EQ(one(-0.5), 0.125);
  EXPECT_DOUBLE_EQ(one(2.0), 1.5);
  EXPECT_DOUBLE_EQ(one(-2.0), 1.5);
  EXPECT_DOUBLE_EQ(one(1.0), 0.5);
  Tensor<double> p({1, 1, 1, 2}, 0.0), t({1, 1, 1, 2}, {0.5, 2.0});
  EXPECT_DOUBLE_EQ(huber_loss(p, t, 1.0), (0.125 + 1.5) / 2);
  EXPECT_THROW(huber_loss(p, Tensor<double>({1, 1, 2, 1}), 1.0), ShapeError);
}

TEST(HuberLoss, GradientSign) {
  Tensor<double> p({1, 1, 1, 3}, {0.0, 0.0, 0.0}), t({1, 1, 1, 3}, {0.5, -3.0, 0.0});
  Tensor<double> g(p.shape());
  huber_loss(p, t, 1.0, &g);
  EXPECT_DOUBLE_EQ(g[0], -0.5 / 3);
  EXPECT_DOUBLE_EQ(g[1], 1.0 / 3);
  EXPECT_DOUBLE_EQ(g[2], 0.0);
}

TEST(Graph, SharedParameterGradientAccumulates) {
  NetWeights<double> w;
  auto& p = w.add("w", Tensor<double>({1, 1, 1, 1}, 2.0));
  auto& b = w.add("b", Tensor<double>({1, 1, 1, 1}, 0.0));
  Graph<double> g;
  const auto x1 = g.input(Tensor<double>({1, 1, 1, 1}, 3.0));
  const auto x2 = g.input(Tensor<double>({1, 1, 1, 1}, 5.0));
  const auto y1 = g.conv2d(x1, g.param(p), g.param(b), {1, 0, 0});
  const auto y2 = g.conv2d(x2, g.param(p), g.param(b), {1, 0, 0});
  const auto out = g.add(y1, y2);
  g.backward(out, Tensor<double>({1, 1, 1, 1}, 1.0));
  EXPECT_DOUBLE_EQ((*g.param_grad(p))[0], 8.0);
  EXPECT_DOUBLE_EQ((*g.param_grad(b))[0], 2.0);
}

}  // namespace
}  // namespace chromasem
