#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chromasem::eval {

struct CriterionResult {
  std::string name;
  bool passed = false;
  /// Reported but never counted as a failure.
  bool informational = false;
  std::string detail;
  double seconds = 0.0;
};

struct EvalOptions {
  int precision = 32;
  std::uint64_t seed = 1;
  /// Print progress lines to stderr while long checks run.
  bool verbose = false;
};

CriterionResult colorspace_roundtrip(const EvalOptions& o, std::size_t samples = 1000000);
CriterionResult huber_conformance(const EvalOptions& o);
CriterionResult shape_depth(const EvalOptions& o);
CriterionResult weight_sharing(const EvalOptions& o);
CriterionResult in_statistics(const EvalOptions& o);
/// Central finite differences on a 16x16 instance over `samples` random
/// parameters per network.
CriterionResult gradient_check_segmenter(const EvalOptions& o, int samples = 240);
CriterionResult gradient_check_colorizer(const EvalOptions& o, int samples = 240);
CriterionResult segmenter_learnability(const EvalOptions& o);
CriterionResult colorizer_learnability(const EvalOptions& o);
CriterionResult in_ablation(const EvalOptions& o, int trials = 20);
CriterionResult pipeline_identity(const EvalOptions& o);
CriterionResult checkpoint_roundtrip(const EvalOptions& o);
CriterionResult colorizer_timing(const EvalOptions& o);

/// Suites: colorspace, gradients, shapes, overfit. Throws ConfigError for an
/// unknown suite name.
std::vector<CriterionResult> run_suite(const std::string& suite, const EvalOptions& o);
const std::vector<std::string>& suite_names();

/// "PASS|FAIL|INFO  name  (seconds)  detail"
std::string format_result(const CriterionResult& r);

}  // namespace chromasem::eval
