#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chromasem/weights.hpp"

namespace chromasem {

/// On-disk layout:
///   8 bytes   magic "CHRMSEM\0"
///   8 bytes   header length L, little-endian u64
///   L bytes   JSON header
///   blobs     little-endian tensors in directory order
///
/// The header holds format_version, network, config (network geometry),
/// train_config, epoch, loss_history and tensors: [{name, dtype, shape, offset}]
/// where offset counts bytes from the start of the blob section.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string network;  // "gridnet" or "colornet"
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json train_config = nlohmann::json::object();
  int epoch = 0;
  std::vector<double> loss_history;
  /// "f32" (default) or "f64".
  std::string dtype = "f32";
  NetWeights<double> weights;

  template <typename T>
  static Checkpoint from(std::string network, nlohmann::json config, const NetWeights<T>& w) {
    Checkpoint ck;
    ck.network = std::move(network);
    ck.config = std::move(config);
    ck.dtype = sizeof(T) == 8 ? "f64" : "f32";
    ck.weights = weights_cast<double>(w);
    return ck;
  }

  template <typename T>
  NetWeights<T> weights_as() const {
    return weights_cast<T>(weights);
  }
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
/// Throws FormatError (bad magic or header), CheckpointVersionError,
/// CheckpointTruncatedError or TensorNameError (duplicate or empty names).
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace chromasem
