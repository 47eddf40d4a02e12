#pragma once

#include <stdexcept>
#include <string>

namespace chromasem {

/// Base of every error raised by the library. `code()` is a short stable token
/// used by the CLI and the HTTP service to report failures in machine-readable form.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define CHROMASEM_DEFINE_ERROR(Name, token)                                   \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& what) : Error(token, what) {}            \
  }

CHROMASEM_DEFINE_ERROR(InvalidLabelError, "invalid_label");
CHROMASEM_DEFINE_ERROR(InvalidStrokeError, "invalid_stroke");
CHROMASEM_DEFINE_ERROR(ShapeError, "shape");
CHROMASEM_DEFINE_ERROR(FormatError, "format");
CHROMASEM_DEFINE_ERROR(IoError, "io");
CHROMASEM_DEFINE_ERROR(MissingPairError, "missing_pair");
CHROMASEM_DEFINE_ERROR(ConfigError, "config");
CHROMASEM_DEFINE_ERROR(MissingWeightsError, "missing_weights");
CHROMASEM_DEFINE_ERROR(NonFiniteLossError, "non_finite_loss");
CHROMASEM_DEFINE_ERROR(CheckpointVersionError, "checkpoint_version");
CHROMASEM_DEFINE_ERROR(CheckpointTruncatedError, "checkpoint_truncated");
CHROMASEM_DEFINE_ERROR(TensorNameError, "tensor_name");

#undef CHROMASEM_DEFINE_ERROR

}  // namespace chromasem
