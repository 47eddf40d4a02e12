// HTTP edit service. Flags override CHROMASEM_* environment variables.

#include <pthread.h>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "chromasem/error.hpp"
#include "chromasem/pipeline.hpp"
#include "chromasem/service.hpp"

int main(int argc, char** argv) {
  using namespace chromasem;
  ServerSettings s;
  try {
    apply_env_overrides(s);
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 6;
  }

  CLI::App app{"Semantic colorization edit service"};
  std::string seg = s.seg_weights.string(), color = s.color_weights.string(), classes;
  long ttl = s.service.session_ttl.count();
  app.add_option("--seg-weights", seg, "Segmenter checkpoint (CHROMASEM_SEG_WEIGHTS)");
  app.add_option("--color-weights", color, "Colorizer checkpoint (CHROMASEM_COLOR_WEIGHTS)");
  app.add_option("--port", s.service.port, "Listen port, 0 for ephemeral (CHROMASEM_PORT)");
  app.add_option("--host", s.service.host, "Listen address (CHROMASEM_HOST)");
  app.add_option("--max-image-side", s.service.max_image_side,
                 "Largest accepted image side in pixels (CHROMASEM_MAX_IMAGE_SIDE)")
      ->check(CLI::PositiveNumber);
  app.add_option("--session-ttl", ttl, "Idle session lifetime in seconds (CHROMASEM_SESSION_TTL)");
  app.add_option("--classes", classes, "Class table JSON (CHROMASEM_CLASSES)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }
  s.service.session_ttl = std::chrono::seconds(ttl);
  if (!classes.empty()) s.classes = std::filesystem::path(classes);

  // Block the stop signals before any worker or OpenMP thread exists so only
  // sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  try {
    if (seg.empty()) throw MissingWeightsError("--seg-weights (or CHROMASEM_SEG_WEIGHTS) is required");
    if (color.empty())
      throw MissingWeightsError("--color-weights (or CHROMASEM_COLOR_WEIGHTS) is required");
    EditService service(load_segmenter<float>(seg), load_colorizer<float>(color), s.service,
                        s.classes ? ClassTable::load(*s.classes) : ClassTable::pascal_context());
    const int port = service.start();
    std::cout << "listening on " << s.service.host << ":" << port << std::endl;
    int sig = 0;
    sigwait(&stop_signals, &sig);
    service.stop();
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return e.code() == "missing_weights" || e.code() == "io" ? 3 : 5;
  }
  return 0;
}
