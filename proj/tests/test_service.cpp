#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "chromasem/dataset.hpp"
#include "chromasem/error.hpp"
#include "chromasem/image_io.hpp"
#include "chromasem/service.hpp"

namespace chromasem {
namespace {

using nlohmann::json;

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

std::vector<std::uint8_t> base64_decode(const std::string& in) {
  static const std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    const auto pos = alphabet.find(c);
    if (pos == std::string::npos) throw std::runtime_error("bad base64");
    acc = acc << 6 | static_cast<std::uint32_t>(pos);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits & 0xff));
    }
  }
  return out;
}

std::string png_body(int h, int w, std::uint64_t seed = 1) {
  const Sample s = synthetic_samples(1, 32, seed).front();
  const auto bytes = encode_png(resize_bilinear(s.rgb, h, w));
  return {bytes.begin(), bytes.end()};
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override { start({}); }

  void start(ServiceOptions opts) {
    if (service_) service_->stop();
    opts.port = 0;
    opts.pipeline.working_short_side = 32;
    opts.max_image_side = opts.max_image_side == 4096 ? 256 : opts.max_image_side;
    service_ = std::make_unique<EditService>(GridNet<float>::init(small_grid(), 1),
                                             ColorNet<float>::init(small_color(), 2), opts);
    port_ = service_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }

  json create(int h = 30, int w = 40) {
    auto res = client_->Post("/sessions", png_body(h, w), "image/png");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body);
  }

  httplib::Result post_json(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  SemanticMap server_map(const std::string& id) {
    auto res = client_->Get("/sessions/" + id + "/map");
    EXPECT_EQ(res->status, 200);
    return load_map(std::span(reinterpret_cast<const std::uint8_t*>(res->body.data()), res->body.size()));
  }

  std::unique_ptr<EditService> service_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(ServiceTest, UploadCreatesSessionWithCoarseMap) {
  const json j = create(30, 40);
  EXPECT_FALSE(j.at("id").get<std::string>().empty());
  EXPECT_EQ(j.at("width"), 40);
  EXPECT_EQ(j.at("height"), 30);
  EXPECT_EQ(j.at("revision"), 0);
  const SemanticMap m = load_map(base64_decode(j.at("map_png_base64")));
  EXPECT_EQ(m.height, 30);
  EXPECT_EQ(m.width, 40);
  EXPECT_EQ(m, server_map(j.at("id")));
  EXPECT_EQ(service_->session_count(), 1u);
}

TEST_F(ServiceTest, MultipartUploadAccepted) {
  httplib::MultipartFormDataItems items{{"image", png_body(20, 20), "x.png", "image/png"}};
  auto res = client_->Post("/sessions", items);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201) << res->body;
}

TEST_F(ServiceTest, SecondUploadGetsDistinctId) {
  EXPECT_NE(create().at("id"), create().at("id"));
}

TEST_F(ServiceTest, CorruptBytesAre400) {
  auto res = client_->Post("/sessions", std::string("not an image at all"), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body).at("error"), "format");
  EXPECT_EQ(client_->Post("/sessions", std::string(), "image/png")->status, 400);
}

TEST_F(ServiceTest, OversizedImageIs413) {
  auto res = client_->Post("/sessions", png_body(20, 300), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
  EXPECT_EQ(service_->session_count(), 0u);
}

TEST_F(ServiceTest, OversizedBodyIs413) {
  ServiceOptions o;
  o.max_body_bytes = 1000;
  start(o);
  auto res = client_->Post("/sessions", std::string(5000, 'x'), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
}

TEST_F(ServiceTest, EmptyStrokeListBumpsRevision) {
  const std::string id = create().at("id");
  auto res = post_json("/sessions/" + id + "/strokes", json::array());
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const json j = json::parse(res->body);
  EXPECT_EQ(j.at("revision"), 1);
  EXPECT_EQ(j.at("changed_pixel_count"), 0);
}

TEST_F(ServiceTest, FullCoverStrokeChangesAtMostEveryPixel) {
  const std::string id = create(30, 40).at("id");
  const json stroke{{"label", 12}, {"radius", 100}, {"path", {{20, 15}}}};
  auto res = post_json("/sessions/" + id + "/strokes", {{"strokes", {stroke}}});
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_LE(json::parse(res->body).at("changed_pixel_count").get<int>(), 30 * 40);
  for (auto l : server_map(id).labels) EXPECT_EQ(l, 12);
  // Repainting with the same label changes nothing.
  res = post_json("/sessions/" + id + "/strokes", json::array({stroke}));
  EXPECT_EQ(json::parse(res->body).at("changed_pixel_count"), 0);
  EXPECT_EQ(json::parse(res->body).at("revision"), 2);
}

TEST_F(ServiceTest, InvalidLabelIs422AndMapUntouched) {
  const json created = create();
  const std::string id = created.at("id");
  const SemanticMap before = server_map(id);
  const json good{{"label", 3}, {"radius", 2}, {"path", {{1, 1}, {10, 10}}}};
  const json bad{{"label", 99}, {"radius", 2}, {"path", {{5, 5}}}};
  auto res = post_json("/sessions/" + id + "/strokes", json::array({good, bad}));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  EXPECT_EQ(json::parse(res->body).at("error"), "invalid_label");
  EXPECT_EQ(server_map(id), before);
  EXPECT_EQ(post_json("/sessions/" + id + "/strokes", json::array())->body.find("\"revision\":1") !=
                std::string::npos,
            true);
}

TEST_F(ServiceTest, InvalidCoordinatesAre422) {
  const std::string id = create().at("id");
  const json empty_path{{"label", 1}, {"radius", 2}, {"path", json::array()}};
  EXPECT_EQ(post_json("/sessions/" + id + "/strokes", json::array({empty_path}))->status, 422);
  const json tiny{{"label", 1}, {"radius", 0.2}, {"path", {{1, 1}}}};
  EXPECT_EQ(post_json("/sessions/" + id + "/strokes", json::array({tiny}))->status, 422);
  const json junk{{"label", 1}, {"radius", 2}, {"path", {{"a", 1}}}};
  EXPECT_EQ(post_json("/sessions/" + id + "/strokes", json::array({junk}))->status, 422);
  EXPECT_EQ(post_json("/sessions/" + id + "/strokes", json{{"label", 1}})->status, 422);
}

TEST_F(ServiceTest, MalformedJsonIs400) {
  const std::string id = create().at("id");
  auto res = client_->Post("/sessions/" + id + "/strokes", "[{", "application/json");
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, UnknownSessionIs404) {
  EXPECT_EQ(post_json("/sessions/deadbeef/strokes", json::array())->status, 404);
  EXPECT_EQ(client_->Post("/sessions/deadbeef/colorize", "", "application/json")->status, 404);
  EXPECT_EQ(client_->Get("/sessions/deadbeef/map")->status, 404);
  EXPECT_EQ(client_->Delete("/sessions/deadbeef")->status, 404);
  EXPECT_EQ(json::parse(client_->Get("/sessions/deadbeef/map")->body).at("error"), "unknown_session");
}

TEST_F(ServiceTest, ServerMapEqualsClientReplay) {
  const json created = create(40, 50);
  const std::string id = created.at("id");
  SemanticMap local = load_map(base64_decode(created.at("map_png_base64")));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-5.0, 55.0), rad(1.0, 6.0);
  std::uniform_int_distribution<int> label(0, kDefaultNumClasses - 1), len(1, 6);
  for (int batch = 0; batch < 10; ++batch) {
    json list = json::array();
    std::size_t expect_changed = 0;
    for (int k = 0; k < 3; ++k) {
      Stroke s;
      s.label = label(rng);
      s.radius = rad(rng);
      for (int p = len(rng); p > 0; --p) s.path.push_back({coord(rng), coord(rng)});
      list.push_back(stroke_to_json(s));
      expect_changed += apply_stroke_inplace(local, s);
    }
    auto res = post_json("/sessions/" + id + "/strokes", list);
    ASSERT_EQ(res->status, 200) << res->body;
    EXPECT_EQ(json::parse(res->body).at("changed_pixel_count").get<std::size_t>(), expect_changed);
  }
  EXPECT_EQ(server_map(id), local);
  EXPECT_EQ(client_->Get("/sessions/" + id + "/map")->get_header_value("X-Revision"), "10");
}

TEST_F(ServiceTest, ColorizeIsCachedPerRevision) {
  const std::string id = create(30, 40).at("id");
  auto first = client_->Post("/sessions/" + id + "/colorize", "", "application/json");
  ASSERT_EQ(first->status, 200) << first->body;
  const json a = json::parse(first->body);
  EXPECT_EQ(a.at("revision"), 0);
  EXPECT_FALSE(a.at("cached").get<bool>());
  EXPECT_GE(a.at("forward_ms").get<double>(), 0.0);
  const RgbImage img = decode_image(base64_decode(a.at("image_png_base64")));
  EXPECT_EQ(img.height, 30);
  EXPECT_EQ(img.width, 40);

  const json b = json::parse(client_->Post("/sessions/" + id + "/colorize", "", "")->body);
  EXPECT_TRUE(b.at("cached").get<bool>());
  EXPECT_EQ(a.at("image_png_base64"), b.at("image_png_base64"));
}

TEST_F(ServiceTest, ColorizeAfterStrokeTracksRevision) {
  const std::string id = create(30, 40).at("id");
  const json before = json::parse(client_->Post("/sessions/" + id + "/colorize", "", "")->body);
  const json stroke{{"label", 45}, {"radius", 100}, {"path", {{0, 0}}}};
  post_json("/sessions/" + id + "/strokes", json::array({stroke}));
  const json after = json::parse(client_->Post("/sessions/" + id + "/colorize", "", "")->body);
  EXPECT_EQ(after.at("revision"), 1);
  EXPECT_FALSE(after.at("cached").get<bool>());
  EXPECT_NE(before.at("image_png_base64"), after.at("image_png_base64"));
}

TEST_F(ServiceTest, ClassesListsEveryClass) {
  auto res = client_->Get("/classes");
  ASSERT_EQ(res->status, 200);
  const auto table = ClassTable::from_json(json::parse(res->body));
  EXPECT_EQ(table.size(), static_cast<std::size_t>(kDefaultNumClasses));
  EXPECT_EQ(table.to_json(), ClassTable::pascal_context().to_json());
}

TEST_F(ServiceTest, CorsHeadersAndPreflight) {
  auto res = client_->Get("/classes");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  auto pre = client_->Options("/sessions");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(ServiceTest, DeleteRemovesSession) {
  const std::string id = create().at("id");
  EXPECT_EQ(client_->Delete("/sessions/" + id)->status, 204);
  EXPECT_EQ(client_->Get("/sessions/" + id + "/map")->status, 404);
  EXPECT_EQ(service_->session_count(), 0u);
}

TEST_F(ServiceTest, IdleSessionsExpire) {
  ServiceOptions o;
  o.session_ttl = std::chrono::seconds(0);
  start(o);
  const std::string id = create().at("id");
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  EXPECT_EQ(service_->evict_idle(), 1u);
  EXPECT_EQ(client_->Get("/sessions/" + id + "/map")->status, 404);
}

TEST_F(ServiceTest, ConcurrentEditsSerializePerSession) {
  const std::string shared = create(24, 24).at("id");
  std::vector<std::string> own;
  for (int i = 0; i < 3; ++i) own.push_back(create(24, 24).at("id"));
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 3; ++t)
    threads.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port_);
      for (int k = 0; k < 8; ++k) {
        const json s{{"label", (t * 8 + k) % 60}, {"radius", 3}, {"path", {{k * 3, t * 8}}}};
        for (const auto& id : {shared, own[t]}) {
          auto r = c.Post("/sessions/" + id + "/strokes", json::array({s}).dump(), "application/json");
          if (!r || r->status != 200) ++failures;
        }
      }
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(failures, 0);
  EXPECT_EQ(client_->Get("/sessions/" + shared + "/map")->get_header_value("X-Revision"), "24");
  for (const auto& id : own)
    EXPECT_EQ(client_->Get("/sessions/" + id + "/map")->get_header_value("X-Revision"), "8");
}

TEST(ServiceConfig, ClassTableMustMatchSegmenter) {
  GridNetConfig g = small_grid();
  g.num_classes = 5;
  EXPECT_THROW(EditService(GridNet<float>::init(g, 1), ColorNet<float>::init(small_color(), 2)),
               ConfigError);
}

const char* fake_env(const char* name) {
  const std::string n = name;
  if (n == "CHROMASEM_SEG_WEIGHTS") return "/w/seg.ckpt";
  if (n == "CHROMASEM_COLOR_WEIGHTS") return "/w/col.ckpt";
  if (n == "CHROMASEM_PORT") return "9123";
  if (n == "CHROMASEM_MAX_IMAGE_SIDE") return "2048";
  return nullptr;
}

const char* bad_env(const char* name) {
  return std::string(name) == "CHROMASEM_PORT" ? "80a" : nullptr;
}

TEST(ServiceConfig, EnvironmentOverrides) {
  ServerSettings s;
  apply_env_overrides(s, fake_env);
  EXPECT_EQ(s.seg_weights, "/w/seg.ckpt");
  EXPECT_EQ(s.color_weights, "/w/col.ckpt");
  EXPECT_EQ(s.service.port, 9123);
  EXPECT_EQ(s.service.max_image_side, 2048);
  EXPECT_EQ(s.service.host, "127.0.0.1");
  EXPECT_FALSE(s.classes);
  ServerSettings t;
  EXPECT_THROW(apply_env_overrides(t, bad_env), ConfigError);
}

}  // namespace
}  // namespace chromasem
