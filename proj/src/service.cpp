#include "chromasem/service.hpp"

#include <cstdlib>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "chromasem/error.hpp"
#include "chromasem/image_io.hpp"
#include "chromasem/pipeline.hpp"

namespace chromasem {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct Session {
  std::mutex mu;
  RgbImage image;
  SemanticMap map;  // at the image's own resolution
  long revision = 0;
  std::optional<std::string> result_png;
  long result_revision = -1;
  double result_ms = 0.0;
  Clock::time_point last_used = Clock::now();
};

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}() ^ (static_cast<std::uint64_t>(std::random_device{}()) << 32)};
  std::lock_guard lock(mu);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

int status_for(const Error& e) {
  const std::string& c = e.code();
  if (c == "format") return 400;
  if (c == "invalid_label" || c == "invalid_stroke" || c == "shape") return 422;
  return 500;
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  res.status = status;
  res.set_content(json{{"error", code}, {"message", msg}}.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string to_string(const std::vector<std::uint8_t>& bytes) {
  return {bytes.begin(), bytes.end()};
}

std::string base64(const std::vector<std::uint8_t>& bytes) {
  return httplib::detail::base64_encode(to_string(bytes));
}

}  // namespace

void apply_env_overrides(ServerSettings& s, const char* (*getenv_fn)(const char*)) {
  auto get = [&](const char* name) -> const char* {
    return getenv_fn ? getenv_fn(name) : std::getenv(name);
  };
  auto to_int = [](const char* name, const char* v) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(v, &used);
      if (used != std::string(v).size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError(std::string(name) + ": not an integer: " + v);
    }
  };
  if (const char* v = get("CHROMASEM_SEG_WEIGHTS")) s.seg_weights = v;
  if (const char* v = get("CHROMASEM_COLOR_WEIGHTS")) s.color_weights = v;
  if (const char* v = get("CHROMASEM_CLASSES")) s.classes = std::filesystem::path(v);
  if (const char* v = get("CHROMASEM_HOST")) s.service.host = v;
  if (const char* v = get("CHROMASEM_PORT")) s.service.port = to_int("CHROMASEM_PORT", v);
  if (const char* v = get("CHROMASEM_MAX_IMAGE_SIDE"))
    s.service.max_image_side = to_int("CHROMASEM_MAX_IMAGE_SIDE", v);
  if (const char* v = get("CHROMASEM_SESSION_TTL"))
    s.service.session_ttl = std::chrono::seconds(to_int("CHROMASEM_SESSION_TTL", v));
}

struct EditService::Impl {
  GridNet<float> seg;
  ColorNet<float> col;
  ServiceOptions opts;
  ClassTable classes;
  httplib::Server server;
  std::thread thread;

  mutable std::mutex sessions_mu;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions;

  Impl(GridNet<float> s, ColorNet<float> c, ServiceOptions o, ClassTable t)
      : seg(std::move(s)), col(std::move(c)), opts(std::move(o)), classes(std::move(t)) {
    if (static_cast<int>(classes.size()) != seg.config().num_classes)
      throw ConfigError("class table has " + std::to_string(classes.size()) +
                        " entries but the segmenter predicts " +
                        std::to_string(seg.config().num_classes) + " classes");
    if (opts.max_image_side < 1) throw ConfigError("max_image_side must be positive");
    routes();
  }

  std::shared_ptr<Session> find(const std::string& id) {
    evict();
    std::lock_guard lock(sessions_mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  std::size_t evict() {
    const auto now = Clock::now();
    std::lock_guard lock(sessions_mu);
    std::size_t gone = 0;
    for (auto it = sessions.begin(); it != sessions.end();) {
      // A session busy on another thread is never idle.
      std::unique_lock slock(it->second->mu, std::try_to_lock);
      if (slock.owns_lock() && now - it->second->last_used > opts.session_ttl) {
        slock.unlock();
        it = sessions.erase(it);
        ++gone;
      } else {
        ++it;
      }
    }
    return gone;
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const std::string& body =
        req.has_file("image") ? req.get_file_value("image").content : req.body;
    if (body.empty()) return send_error(res, 400, "format", "empty upload");
    RgbImage img = decode_image(
        std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
    if (std::max(img.width, img.height) > opts.max_image_side)
      return send_error(res, 413, "too_large",
                        std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " exceeds the " + std::to_string(opts.max_image_side) + " px limit");
    auto s = std::make_shared<Session>();
    s->map = segment_image(img, seg, opts.pipeline);
    s->image = std::move(img);
    const std::string id = new_session_id();
    const json out{{"id", id},
                   {"width", s->image.width},
                   {"height", s->image.height},
                   {"num_classes", s->map.num_classes},
                   {"revision", s->revision},
                   {"map_png_base64", base64(save_map(s->map))}};
    evict();
    {
      std::lock_guard lock(sessions_mu);
      sessions.emplace(id, std::move(s));
    }
    send_json(res, 201, out);
  }

  void strokes(Session& s, const httplib::Request& req, httplib::Response& res) {
    json j;
    try {
      j = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, "format", std::string("malformed JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("strokes")) j = j["strokes"];
    if (!j.is_array())
      return send_error(res, 422, "invalid_stroke", "expected a list of strokes");
    std::vector<Stroke> list;
    for (const auto& item : j) list.push_back(stroke_from_json(item));

    // All or nothing: a bad stroke late in the list leaves the map untouched.
    SemanticMap next = s.map;
    std::size_t changed = 0;
    for (const auto& st : list) changed += apply_stroke_inplace(next, st);
    s.map = std::move(next);
    ++s.revision;
    send_json(res, 200, {{"revision", s.revision}, {"changed_pixel_count", changed}});
  }

  void colorize(Session& s, httplib::Response& res) {
    const bool cached = s.result_png && s.result_revision == s.revision;
    if (!cached) {
      const PipelineResult r = colorize_pipeline(s.image, seg, col, &s.map, opts.pipeline);
      s.result_png = base64(encode_png(r.image));
      s.result_revision = s.revision;
      s.result_ms = r.colorizer_ms;
    }
    send_json(res, 200,
              {{"revision", s.result_revision},
               {"image_png_base64", *s.result_png},
               {"forward_ms", s.result_ms},
               {"cached", cached}});
  }

  // Runs `body` on the session named in the path under its lock.
  template <typename F>
  httplib::Server::Handler with_session(F body) {
    return [this, body](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto s = find(id);
      if (!s) return send_error(res, 404, "unknown_session", "no session " + id);
      std::lock_guard lock(s->mu);
      s->last_used = Clock::now();
      body(*s, req, res);
      s->last_used = Clock::now();
    };
  }

  void routes() {
    server.set_payload_max_length(opts.max_body_bytes);
    server.new_task_queue = [n = opts.worker_threads] {
      return new httplib::ThreadPool(static_cast<std::size_t>(std::max(1, n)));
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                    std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, status_for(e), e.code(), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413)
        send_error(res, 413, "too_large", "request body over the configured limit");
      else if (res.status == 404)
        send_error(res, 404, "not_found", "no such route");
    });

    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/classes", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, classes.to_json());
    });
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      create(req, res);
    });
    const std::string id = "/sessions/([0-9a-f]+)";
    server.Post(id + "/strokes",
                with_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
                  strokes(s, req, res);
                }));
    server.Post(id + "/colorize",
                with_session([this](Session& s, const httplib::Request&, httplib::Response& res) {
                  colorize(s, res);
                }));
    server.Get(id + "/map",
               with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                 res.set_header("X-Revision", std::to_string(s.revision));
                 res.set_content(to_string(save_map(s.map)), "image/png");
               }));
    server.Delete(id, [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(sessions_mu);
      if (sessions.erase(req.matches[1]) == 0)
        return send_error(res, 404, "unknown_session", "no session " + std::string(req.matches[1]));
      res.status = 204;
    });
  }
};

EditService::EditService(GridNet<float> segmenter, ColorNet<float> colorizer, ServiceOptions opts,
                         ClassTable classes)
    : impl_(std::make_unique<Impl>(std::move(segmenter), std::move(colorizer), std::move(opts),
                                   std::move(classes))) {}

EditService::~EditService() { stop(); }

int EditService::start() {
  auto& s = impl_->server;
  const int port = impl_->opts.port == 0 ? s.bind_to_any_port(impl_->opts.host)
                                         : (s.bind_to_port(impl_->opts.host, impl_->opts.port)
                                                ? impl_->opts.port
                                                : -1);
  if (port < 0)
    throw IoError("cannot bind " + impl_->opts.host + ":" + std::to_string(impl_->opts.port));
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return port;
}

void EditService::run() {
  if (!impl_->server.listen(impl_->opts.host, impl_->opts.port))
    throw IoError("cannot bind " + impl_->opts.host + ":" + std::to_string(impl_->opts.port));
}

void EditService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t EditService::session_count() const {
  std::lock_guard lock(impl_->sessions_mu);
  return impl_->sessions.size();
}

std::size_t EditService::evict_idle() { return impl_->evict(); }

}  // namespace chromasem
