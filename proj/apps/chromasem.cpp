// Command-line front end: segment, colorize, train, eval.
//
// Failures print exactly one line to stderr, "error: <code>: <message>", and
// exit with a code that depends on the error class (see exit_code_for).

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chromasem/dataset.hpp"
#include "chromasem/error.hpp"
#include "chromasem/eval.hpp"
#include "chromasem/image_io.hpp"
#include "chromasem/pipeline.hpp"
#include "chromasem/train.hpp"

namespace {

using namespace chromasem;

constexpr int kExitCriteriaFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 70;

int exit_code_for(const std::string& code) {
  static const std::map<std::string, int> codes{
      {"io", 3},
      {"missing_weights", 3},
      {"format", 4},
      {"checkpoint_version", 5},
      {"checkpoint_truncated", 5},
      {"tensor_name", 5},
      {"config", 6},
      {"invalid_label", 7},
      {"invalid_stroke", 7},
      {"missing_pair", 7},
      {"shape", 7},
      {"non_finite_loss", 8},
  };
  auto it = codes.find(code);
  return it == codes.end() ? kExitInternal : it->second;
}

int fail(const std::string& code, std::string msg, int status) {
  for (char& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "error: " << code << ": " << msg << "\n";
  return status;
}

struct SegmentArgs {
  std::string input, weights, out;
};
struct ColorizeArgs {
  std::string input, seg_weights, color_weights, map, out, dump_map;
};
struct TrainArgs {
  std::string target, data, config, out_dir;
};
struct EvalArgs {
  std::string suite;
  int precision = 32;
  std::uint64_t seed = 1;
  bool verbose = false;
};

int run_segment(const SegmentArgs& a) {
  const RgbImage img = read_image(a.input);
  const auto seg = load_segmenter<float>(a.weights);
  write_map(a.out, segment_image(img, seg));
  return 0;
}

int run_colorize(const ColorizeArgs& a) {
  const RgbImage img = read_image(a.input);
  const auto seg = load_segmenter<float>(a.seg_weights);
  const auto col = load_colorizer<float>(a.color_weights);
  std::optional<SemanticMap> user;
  if (!a.map.empty()) user = read_map(a.map, seg.config().num_classes);
  const PipelineResult r = colorize_pipeline(img, seg, col, user ? &*user : nullptr);
  write_png(a.out, r.image);
  if (!a.dump_map.empty()) write_map(a.dump_map, r.map);
  return 0;
}

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : TrainConfig::load(a.config);
  cfg.target = target_from_string(a.target);
  cfg.validate();
  const auto data = load_dataset(a.data, cfg.num_classes);
  if (data.empty()) throw MissingPairError("no samples under " + a.data);
  TrainOptions opts;
  opts.out_dir = a.out_dir;
  opts.on_step = [](const StepRecord& r) {
    std::printf("step %ld epoch %d loss %.8g\n", r.step, r.epoch + 1, r.loss);
    std::fflush(stdout);
  };
  const Checkpoint ck = run_training(cfg, data, opts);
  std::printf("checkpoint %s\n",
              (std::filesystem::path(a.out_dir) / (to_string(cfg.target) + ".ckpt")).c_str());
  std::printf("epochs %d final_loss %.8g\n", ck.epoch,
              ck.loss_history.empty() ? 0.0 : ck.loss_history.back());
  return 0;
}

int run_eval(const EvalArgs& a) {
  eval::EvalOptions o;
  o.precision = a.precision;
  o.seed = a.seed;
  o.verbose = a.verbose;
  bool ok = true;
  for (const auto& r : eval::run_suite(a.suite, o)) {
    std::printf("%s\n", eval::format_result(r).c_str());
    std::fflush(stdout);
    ok = ok && (r.passed || r.informational);
  }
  return ok ? 0 : kExitCriteriaFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-map guided image colorization"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Predict a semantic map for an image");
  segment->add_option("--input", seg.input, "Input image (PNG/JPEG)")->required();
  segment->add_option("--weights", seg.weights, "Segmenter checkpoint")->required();
  segment->add_option("--out", seg.out, "Output map PNG")->required();

  ColorizeArgs col;
  auto* colorize = app.add_subcommand("colorize", "Colorize a gray image");
  colorize->add_option("--input", col.input, "Input image (PNG/JPEG)")->required();
  colorize->add_option("--seg-weights", col.seg_weights, "Segmenter checkpoint")->required();
  colorize->add_option("--color-weights", col.color_weights, "Colorizer checkpoint")->required();
  colorize->add_option("--map", col.map, "User semantic map PNG (replaces the predicted map)");
  colorize->add_option("--out", col.out, "Output RGB PNG")->required();
  colorize->add_option("--dump-map", col.dump_map, "Write the map actually used");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train the segmenter or the colorizer");
  train->add_option("--target", tr.target, "segmenter or colorizer")
      ->required()
      ->check(CLI::IsMember({"segmenter", "colorizer"}));
  train->add_option("--data", tr.data, "Dataset root (images/, labels/)")->required();
  train->add_option("--config", tr.config, "TrainConfig JSON");
  train->add_option("--out-dir", tr.out_dir, "Checkpoint directory")->required();

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("eval", "Run a self-check suite");
  evaluate->add_option("--suite", ev.suite, "colorspace, gradients, shapes or overfit")
      ->required()
      ->check(CLI::IsMember(eval::suite_names()));
  evaluate->add_option("--precision", ev.precision, "32 or 64")->check(CLI::IsMember({32, 64}));
  evaluate->add_option("--seed", ev.seed, "Seed for random instances");
  evaluate->add_flag("--verbose", ev.verbose, "Progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  try {
    if (*segment) return run_segment(seg);
    if (*colorize) return run_colorize(col);
    if (*train) return run_train(tr);
    return run_eval(ev);
  } catch (const Error& e) {
    return fail(e.code(), e.what(), exit_code_for(e.code()));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitInternal);
  }
}
