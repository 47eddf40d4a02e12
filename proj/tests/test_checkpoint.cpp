#include <cstring>

#include <gtest/gtest.h>

#include "chromasem/checkpoint.hpp"
#include "chromasem/error.hpp"
#include "chromasem/image_io.hpp"
#include "chromasem/pipeline.hpp"
#include "test_util.hpp"

namespace chromasem {
namespace {

using nlohmann::json;
using test::random_tensor;
using test::TempDir;

GridNetConfig small_grid() {
  GridNetConfig c;
  c.row_depths = {4, 6, 8, 8, 8};
  c.num_classes = 6;
  return c;
}

ColorNetConfig small_color() {
  ColorNetConfig c;
  c.encoder_depths = {4, 6, 8, 8, 8};
  c.decoder_input_depths = {16, 16, 16, 12, 8};
  return c;
}

template <typename T>
Checkpoint grid_checkpoint(std::uint64_t seed = 5) {
  const auto cfg = small_grid();
  auto ck = Checkpoint::from<T>("gridnet", cfg.to_json(), init_gridnet<T>(cfg, seed));
  ck.epoch = 3;
  ck.loss_history = {2.5, 1.25, 0.5};
  ck.train_config = {{"lr", 1e-4}};
  return ck;
}

// Splits serialized bytes into (header json, blob section).
std::pair<json, std::vector<std::uint8_t>> split(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  json header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(len));
  return {header, std::vector<std::uint8_t>(bytes.begin() + 16 + static_cast<long>(len), bytes.end())};
}

std::vector<std::uint8_t> join(const json& header, const std::vector<std::uint8_t>& blobs) {
  const std::string h = header.dump();
  std::vector<std::uint8_t> out{'C', 'H', 'R', 'M', 'S', 'E', 'M', '\0'};
  const std::uint64_t len = h.size();
  out.resize(16);
  std::memcpy(out.data() + 8, &len, 8);
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), blobs.begin(), blobs.end());
  return out;
}

TEST(Checkpoint, MagicAndHeaderLayout) {
  const auto bytes = serialize_checkpoint(grid_checkpoint<float>());
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(std::memcmp(bytes.data(), "CHRMSEM\0", 8), 0);
  const auto [header, blobs] = split(bytes);
  EXPECT_EQ(header.at("format_version"), kCheckpointVersion);
  EXPECT_EQ(header.at("network"), "gridnet");
  EXPECT_EQ(header.at("epoch"), 3);

  // Offsets are contiguous in directory order and cover the blob section.
  std::uint64_t expect = 0;
  for (const auto& t : header.at("tensors")) {
    EXPECT_EQ(t.at("dtype"), "f32");
    EXPECT_EQ(t.at("offset").get<std::uint64_t>(), expect);
    std::uint64_t n = 1;
    for (auto d : t.at("shape")) n *= d.get<std::uint64_t>();
    expect += 4 * n;
  }
  EXPECT_EQ(expect, blobs.size());
}

TEST(Checkpoint, BlobsAreLittleEndianFloats) {
  const auto ck = grid_checkpoint<float>();
  const auto [header, blobs] = split(serialize_checkpoint(ck));
  const auto w = ck.weights_as<float>();
  const auto& first = w.params().front();
  for (std::size_t i = 0; i < std::min<std::size_t>(first.value.size(), 16); ++i) {
    const std::uint32_t expect = std::bit_cast<std::uint32_t>(first.value[i]);
    const std::uint32_t got = static_cast<std::uint32_t>(blobs[4 * i]) |
                              static_cast<std::uint32_t>(blobs[4 * i + 1]) << 8 |
                              static_cast<std::uint32_t>(blobs[4 * i + 2]) << 16 |
                              static_cast<std::uint32_t>(blobs[4 * i + 3]) << 24;
    EXPECT_EQ(got, expect);
  }
}

TEST(Checkpoint, MetadataRoundTrip) {
  const auto ck = grid_checkpoint<float>();
  const auto back = deserialize_checkpoint(serialize_checkpoint(ck));
  EXPECT_EQ(back.network, "gridnet");
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.train_config, ck.train_config);
  EXPECT_EQ(back.epoch, 3);
  EXPECT_EQ(back.loss_history, ck.loss_history);
  EXPECT_EQ(back.dtype, "f32");
  ASSERT_EQ(back.weights.params().size(), ck.weights.params().size());
  for (std::size_t i = 0; i < ck.weights.params().size(); ++i) {
    EXPECT_EQ(back.weights.params()[i].name, ck.weights.params()[i].name);
    EXPECT_EQ(back.weights.params()[i].value.shape(), ck.weights.params()[i].value.shape());
  }
}

TEST(Checkpoint, F64KeepsDoublesExactly) {
  const auto ck = grid_checkpoint<double>();
  EXPECT_EQ(ck.dtype, "f64");
  const auto back = deserialize_checkpoint(serialize_checkpoint(ck));
  EXPECT_EQ(back.dtype, "f64");
  for (std::size_t i = 0; i < ck.weights.params().size(); ++i)
    EXPECT_EQ(back.weights.params()[i].value.values(), ck.weights.params()[i].value.values());
}

TEST(Checkpoint, SaveLoadForwardBitIdenticalSegmenter) {
  TempDir dir("ckpt");
  const auto cfg = small_grid();
  const GridNet<float> net(cfg, init_gridnet<float>(cfg, 9));
  save_checkpoint(Checkpoint::from<float>("gridnet", cfg.to_json(), net.weights()), dir / "s.ckpt");
  const auto loaded = load_segmenter<float>(dir / "s.ckpt");
  const auto x = random_tensor<float>({1, 1, 32, 48}, 2);
  EXPECT_EQ(net.forward(x).values(), loaded.forward(x).values());
}

TEST(Checkpoint, SaveLoadForwardBitIdenticalColorizer) {
  TempDir dir("ckpt");
  const auto cfg = small_color();
  const ColorNet<double> net(cfg, init_colornet<double>(cfg, 4));
  save_checkpoint(Checkpoint::from<double>("colornet", cfg.to_json(), net.weights()), dir / "c.ckpt");
  const auto loaded = load_colorizer<double>(dir / "c.ckpt");
  const auto g = random_tensor<double>({1, 1, 32, 32}, 3);
  const auto s = random_tensor<double>({1, 1, 32, 32}, 4);
  EXPECT_EQ(net.forward(g, s).values(), loaded.forward(g, s).values());
}

TEST(Checkpoint, SaveLeavesNoTempFiles) {
  TempDir dir("ckpt");
  save_checkpoint(grid_checkpoint<float>(), dir / "a.ckpt");
  save_checkpoint(grid_checkpoint<float>(6), dir / "a.ckpt");  // overwrite
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1);
  EXPECT_EQ(load_checkpoint(dir / "a.ckpt").weights.params()[0].value.values(),
            grid_checkpoint<float>(6).weights.params()[0].value.values());
}

TEST(Checkpoint, TruncatedBlobIsTruncationError) {
  auto bytes = serialize_checkpoint(grid_checkpoint<float>());
  bytes.pop_back();
  EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointTruncatedError);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointTruncatedError);
}

TEST(Checkpoint, TruncatedHeaderIsTruncationError) {
  auto bytes = serialize_checkpoint(grid_checkpoint<float>());
  bytes.resize(20);
  EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointTruncatedError);
  bytes.resize(10);
  EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointTruncatedError);
}

TEST(Checkpoint, BadMagicIsFormatError) {
  auto bytes = serialize_checkpoint(grid_checkpoint<float>());
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, MalformedHeaderIsFormatError) {
  auto [header, blobs] = split(serialize_checkpoint(grid_checkpoint<float>()));
  auto bytes = join(header, blobs);
  bytes[16] = '#';
  EXPECT_THROW(deserialize_checkpoint(bytes), FormatError);
  header.erase("tensors");
  EXPECT_THROW(deserialize_checkpoint(join(header, blobs)), FormatError);
}

TEST(Checkpoint, VersionMismatch) {
  auto [header, blobs] = split(serialize_checkpoint(grid_checkpoint<float>()));
  header["format_version"] = kCheckpointVersion + 1;
  EXPECT_THROW(deserialize_checkpoint(join(header, blobs)), CheckpointVersionError);
}

TEST(Checkpoint, DuplicateTensorName) {
  auto [header, blobs] = split(serialize_checkpoint(grid_checkpoint<float>()));
  header["tensors"][1]["name"] = header["tensors"][0]["name"];
  EXPECT_THROW(deserialize_checkpoint(join(header, blobs)), TensorNameError);
}

TEST(Checkpoint, EmptyTensorName) {
  auto [header, blobs] = split(serialize_checkpoint(grid_checkpoint<float>()));
  header["tensors"][0]["name"] = "";
  EXPECT_THROW(deserialize_checkpoint(join(header, blobs)), TensorNameError);
}

TEST(Checkpoint, DistinctErrorCodes) {
  EXPECT_NE(CheckpointVersionError("x").code(), CheckpointTruncatedError("x").code());
  EXPECT_NE(CheckpointTruncatedError("x").code(), TensorNameError("x").code());
  EXPECT_NE(TensorNameError("x").code(), CheckpointVersionError("x").code());
}

TEST(Checkpoint, SegmenterLoadedAsColorizerIsTensorNameError) {
  TempDir dir("ckpt");
  save_checkpoint(grid_checkpoint<float>(), dir / "s.ckpt");
  EXPECT_THROW(load_colorizer<float>(dir / "s.ckpt"), TensorNameError);
}

TEST(Checkpoint, RenamedTensorIsTensorNameError) {
  TempDir dir("ckpt");
  auto [header, blobs] = split(serialize_checkpoint(grid_checkpoint<float>()));
  header["tensors"][0]["name"] = "stem.kernel";
  const auto bytes = join(header, blobs);
  write_file(dir / "r.ckpt", bytes);
  EXPECT_THROW(load_segmenter<float>(dir / "r.ckpt"), TensorNameError);
}

TEST(Checkpoint, MissingFileIsMissingWeights) {
  TempDir dir("ckpt");
  EXPECT_THROW(load_checkpoint(dir / "nope.ckpt"), MissingWeightsError);
  EXPECT_THROW(load_segmenter<float>(dir / "nope.ckpt"), MissingWeightsError);
}

}  // namespace
}  // namespace chromasem
