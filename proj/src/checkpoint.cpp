#include "chromasem/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <unordered_set>

#include "chromasem/image_io.hpp"

namespace chromasem {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'C', 'H', 'R', 'M', 'S', 'E', 'M', '\0'};

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw FormatError("checkpoint: unsupported dtype '" + dtype + "'");
}

// Shape as stored: leading extents, trailing 1s dropped (biases are {C}).
nlohmann::json shape_json(const Shape& s) {
  std::vector<int> dims{s.n, s.c, s.h, s.w};
  while (dims.size() > 1 && dims.back() == 1) dims.pop_back();
  return dims;
}

Shape shape_from_json(const nlohmann::json& j) {
  const auto dims = j.get<std::vector<int>>();
  if (dims.empty() || dims.size() > 4) throw FormatError("checkpoint: tensor rank must be 1..4");
  int d[4] = {1, 1, 1, 1};
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) throw FormatError("checkpoint: tensor extents must be positive");
    d[i] = dims[i];
  }
  return Shape{d[0], d[1], d[2], d[3]};
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  const std::size_t elem = dtype_size(ck.dtype);
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : ck.weights.params()) {
    dir.push_back({{"name", p.name}, {"dtype", ck.dtype}, {"shape", shape_json(p.value.shape())},
                   {"offset", offset}});
    offset += p.value.size() * elem;
  }
  const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                 {"network", ck.network},
                                 {"config", ck.config},
                                 {"train_config", ck.train_config},
                                 {"epoch", ck.epoch},
                                 {"loss_history", ck.loss_history},
                                 {"tensors", dir}};
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  std::vector<std::uint8_t> out(sizeof kMagic + sizeof len + text.size() + offset);
  std::uint8_t* w = out.data();
  std::memcpy(w, kMagic, sizeof kMagic);
  w += sizeof kMagic;
  std::memcpy(w, &len, sizeof len);
  w += sizeof len;
  std::memcpy(w, text.data(), text.size());
  w += text.size();
  for (const auto& p : ck.weights.params()) {
    for (double v : p.value.values()) {
      if (elem == 4) {
        const float f = static_cast<float>(v);
        std::memcpy(w, &f, 4);
      } else {
        std::memcpy(w, &v, 8);
      }
      w += elem;
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  std::uint64_t len = 0;
  if (bytes.size() < sizeof kMagic + sizeof len) {
    if (bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0)
      throw CheckpointTruncatedError("checkpoint: file ends inside the preamble");
    throw FormatError("checkpoint: not a checkpoint file");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("checkpoint: bad magic");
  std::memcpy(&len, bytes.data() + sizeof kMagic, sizeof len);
  const std::size_t header_start = sizeof kMagic + sizeof len;
  if (len > bytes.size() - header_start)
    throw CheckpointTruncatedError("checkpoint: file ends inside the header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + header_start, bytes.begin() + header_start + len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint ck;
  const std::span<const std::uint8_t> blobs = bytes.subspan(header_start + len);
  std::unordered_set<std::string> seen;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointVersionError("checkpoint: format version " + std::to_string(version) +
                                   ", this build reads version " +
                                   std::to_string(kCheckpointVersion));
    ck.network = header.at("network").get<std::string>();
    ck.config = header.value("config", nlohmann::json::object());
    ck.train_config = header.value("train_config", nlohmann::json::object());
    ck.epoch = header.value("epoch", 0);
    ck.loss_history = header.value("loss_history", std::vector<double>{});
    bool first = true;
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto dtype = t.at("dtype").get<std::string>();
      const Shape shape = shape_from_json(t.at("shape"));
      const auto offset = t.at("offset").get<std::uint64_t>();
      const std::size_t elem = dtype_size(dtype);
      if (first) ck.dtype = dtype;
      first = false;
      if (name.empty()) throw TensorNameError("checkpoint: empty tensor name");
      if (!seen.insert(name).second) throw TensorNameError("checkpoint: duplicate tensor " + name);
      const std::uint64_t nbytes = shape.size() * elem;
      if (offset > blobs.size() || nbytes > blobs.size() - offset)
        throw CheckpointTruncatedError("checkpoint: blob of tensor " + name +
                                       " extends past end of file");
      Tensor<double> value(shape);
      const std::uint8_t* r = blobs.data() + offset;
      for (std::size_t i = 0; i < value.size(); ++i, r += elem) {
        if (elem == 4) {
          float f;
          std::memcpy(&f, r, 4);
          value[i] = f;
        } else {
          std::memcpy(&value[i], r, 8);
        }
      }
      ck.weights.add(name, std::move(value));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  // Write-then-rename so a crash never leaves a half-written checkpoint at `path`.
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingWeightsError("checkpoint not found: " + path.string());
  return deserialize_checkpoint(read_file(path));
}

}  // namespace chromasem
