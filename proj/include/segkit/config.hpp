#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segkit/frame.hpp"
#include "segkit/serialize.hpp"
#include "segkit/synthgen.hpp"

namespace segkit {

struct InputConfig {
  std::optional<std::filesystem::path> csv;  // resolved against the config's directory
  Schema schema;                             // for csv input
  std::optional<DgpSpec> synth;
  bool synth_seed_given = false;
};

struct AnalysisConfig {
  std::string name;
  std::string type;
  std::vector<std::string> after;
  Json options = Json::object();
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string output = "out";
  InputConfig input;
  std::vector<AnalysisConfig> analyses;
};

const std::vector<std::string>& analysis_types();

// YAML text as JSON. Plain scalars become booleans or numbers when they parse
// as such; quoted scalars stay strings. Throws ConfigInvalid.
Json yaml_to_json(std::string_view text);

/// Parses and validates a pipeline config. Throws ConfigInvalid.
PipelineConfig parse_config(std::string_view yaml_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Synthetic-data spec: `preset: paper` (the default) plus overrides.
DgpSpec parse_dgp(const Json& node);
DgpSpec load_dgp(const std::filesystem::path& path);

// Columns of generated data.
Schema synth_schema();
Schema input_schema(const PipelineConfig& config);

/// Analyses grouped into dependency levels; every analysis comes after the
/// ones it names in `after` and the mincer model it uses. ConfigInvalid on an
/// unknown name or a cycle.
std::vector<std::vector<std::size_t>> execution_levels(const PipelineConfig& config);

// Option accessors that report the analysis and key on a type mismatch.
std::string option_string(const AnalysisConfig& a, std::string_view key, std::string_view fallback);
std::optional<std::string> option_string(const AnalysisConfig& a, std::string_view key);
double option_number(const AnalysisConfig& a, std::string_view key, double fallback);
bool option_bool(const AnalysisConfig& a, std::string_view key, bool fallback);
std::vector<std::string> option_list(const AnalysisConfig& a, std::string_view key);

}  // namespace segkit
