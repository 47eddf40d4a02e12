#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chromasem/checkpoint.hpp"
#include "chromasem/colornet.hpp"
#include "chromasem/dataset.hpp"
#include "chromasem/segnet.hpp"

namespace chromasem {

enum class Target { segmenter, colorizer };

std::string to_string(Target t);
Target target_from_string(const std::string& s);

/// JSON config files use these field names. Unknown keys are rejected.
struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 16;
  int epochs = 1;
  /// Stop after this many optimizer steps even mid-epoch; 0 = no limit.
  long max_steps = 0;
  int scale_size = 360;
  int crop_size = 352;
  /// When false, samples are resized to crop_size x crop_size without randomness.
  bool augment = true;
  std::uint64_t seed = 0;
  Target target = Target::segmenter;
  int precision = 32;
  int num_classes = kDefaultNumClasses;
  GridNetConfig gridnet;
  ColorNetConfig colornet;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
};

/// Adam without weight decay. A step with all-zero gradients leaves the
/// parameters unchanged.
template <typename T>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  /// grads[i] belongs to w.params()[i]; nullptr means a zero gradient.
  void step(NetWeights<T>& w, const std::vector<const Tensor<T>*>& grads);
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

struct StepRecord {
  long step = 0;  // 1-based
  int epoch = 0;  // 0-based
  double loss = 0.0;
};

struct TrainOptions {
  /// When set, <target>_epochNNNN.ckpt is written after every epoch and
  /// <target>.ckpt at the end.
  std::filesystem::path out_dir;
  std::function<void(const StepRecord&)> on_step;
};

template <typename T>
struct TrainResult {
  NetWeights<T> weights;
  std::vector<double> losses;
  int epochs_completed = 0;
};

/// Trains the configured target from its seeded initialization. The colorizer
/// sees ground-truth maps. Throws NonFiniteLossError naming the step.
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const std::vector<Sample>& data,
                     const TrainOptions& opts = {});

/// Same, starting from `init` instead of a fresh initialization.
template <typename T>
TrainResult<T> train_from(const TrainConfig& cfg, const std::vector<Sample>& data, NetWeights<T> init,
                          const TrainOptions& opts = {});

/// Precision-dispatching entry point used by the CLI; returns the final checkpoint.
Checkpoint run_training(const TrainConfig& cfg, const std::vector<Sample>& data,
                        const TrainOptions& opts = {});

template <typename T>
Checkpoint make_checkpoint(const TrainConfig& cfg, const NetWeights<T>& w, int epoch,
                           const std::vector<double>& losses);

/// Network inputs for a batch of equally sized samples.
template <typename T>
struct Batch {
  Tensor<T> gray;    // [B,1,H,W]
  Tensor<T> sem;     // [B,1,H,W], encoded ground-truth maps
  Tensor<T> chroma;  // [B,2,H,W]
  std::vector<SemanticMap> maps;
};

template <typename T>
Batch<T> make_batch(const std::vector<Sample>& samples);

}  // namespace chromasem
