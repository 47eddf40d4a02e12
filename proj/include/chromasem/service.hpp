#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "chromasem/colornet.hpp"
#include "chromasem/pipeline.hpp"
#include "chromasem/segnet.hpp"
#include "chromasem/semantic_map.hpp"

namespace chromasem {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  /// 0 binds an ephemeral port.
  int port = 8080;
  /// Uploads whose longer side exceeds this are rejected with 413.
  int max_image_side = 4096;
  /// Raw request bodies above this are rejected with 413 before decoding.
  std::size_t max_body_bytes = 64u << 20;
  std::chrono::seconds session_ttl{3600};
  int worker_threads = 4;
  PipelineOptions pipeline;
};

/// Command-line flags of the server with CHROMASEM_<FLAG> environment
/// fallbacks (flag wins over environment).
struct ServerSettings {
  std::filesystem::path seg_weights;
  std::filesystem::path color_weights;
  std::optional<std::filesystem::path> classes;
  ServiceOptions service;
};

/// Reads CHROMASEM_SEG_WEIGHTS, CHROMASEM_COLOR_WEIGHTS, CHROMASEM_PORT,
/// CHROMASEM_MAX_IMAGE_SIDE, CHROMASEM_HOST, CHROMASEM_SESSION_TTL and
/// CHROMASEM_CLASSES into `s`, leaving unset variables alone. `getenv` is
/// injectable for tests.
void apply_env_overrides(ServerSettings& s, const char* (*getenv_fn)(const char*) = nullptr);

/// HTTP front end of the interactive edit loop. Weights are read-only after
/// construction and shared by all sessions; each session's state is mutated
/// under its own lock.
///
///   POST   /sessions                 image bytes -> 201 {id, width, height, revision, map_png_base64}
///   POST   /sessions/{id}/strokes    [Stroke] or {"strokes": [Stroke]} -> {revision, changed_pixel_count}
///   POST   /sessions/{id}/colorize   -> {revision, image_png_base64, forward_ms, cached}
///   GET    /sessions/{id}/map        -> image/png (X-Revision header)
///   DELETE /sessions/{id}            -> 204
///   GET    /classes                  -> class table JSON
///
/// Errors are JSON {"error": code, "message": text}.
class EditService {
 public:
  EditService(GridNet<float> segmenter, ColorNet<float> colorizer, ServiceOptions opts = {},
              ClassTable classes = ClassTable::pascal_context());
  ~EditService();
  EditService(const EditService&) = delete;
  EditService& operator=(const EditService&) = delete;

  /// Binds and starts serving on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  std::size_t session_count() const;
  /// Drops sessions idle for longer than the TTL; returns how many went.
  std::size_t evict_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chromasem
