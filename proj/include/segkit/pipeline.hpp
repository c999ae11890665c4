#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segkit/config.hpp"
#include "segkit/error.hpp"
#include "segkit/frame.hpp"

namespace segkit {

// AnalysisFailed with the stage that raised it and the underlying code.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCode cause, const std::string& message)
      : Error(ErrorCode::kAnalysisFailed, message), stage_(std::move(stage)), cause_(cause) {}
  const std::string& stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  ErrorCode cause_;
};

struct RunOptions {
  bool deterministic = false;  // omit the SVG timestamp
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

struct RunReport {
  std::filesystem::path out_dir;
  std::vector<std::string> files;  // relative to out_dir, sorted
  std::vector<std::string> warnings;
};

// Seed for the synthetic input: the spec's own when given, else derived from
// the run seed.
std::uint64_t input_seed(const PipelineConfig& config, const RunOptions& options);

Frame load_input(const PipelineConfig& config, const RunOptions& options);

/// Runs every analysis in dependency order, independent analyses
/// concurrently, writing each stage's files atomically under
/// out_dir/<analysis name>/ and a manifest.json. Throws StageError.
RunReport run_pipeline(const PipelineConfig& config, const RunOptions& options);

}  // namespace segkit
