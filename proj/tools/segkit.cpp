#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <iostream>

#include "segkit/config.hpp"
#include "segkit/error.hpp"
#include "segkit/pipeline.hpp"
#include "segkit/serialize.hpp"
#include "segkit/synthgen.hpp"

using namespace segkit;

namespace {

int report_error(const Error& e, const std::string& stage = {}) {
  Json j{{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (const auto* s = dynamic_cast<const StageError*>(&e)) {
    j["stage"] = s->stage();
    j["cause"] = std::string(to_string(s->cause()));
  } else if (!stage.empty()) {
    j["stage"] = stage;
  }
  std::cerr << j.dump() << "\n";
  return e.code() == ErrorCode::kConfigInvalid ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Labour-market segregation and wage decomposition pipeline"};
  app.require_subcommand(1);

  std::string config_path, spec_path, out_dir;
  bool deterministic = false;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run every analysis in a config");
  run->add_option("config", config_path, "Pipeline config (YAML)")->required();
  run->add_flag("--deterministic", deterministic, "Omit timestamps so outputs are byte-stable");
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Output directory");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "Pipeline config (YAML)")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and its ground truth");
  synth->add_option("spec", spec_path, "Synthetic data spec (YAML)")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      load_config(config_path);
      return 0;
    }
    if (*synth) {
      const DgpSpec spec = load_dgp(spec_path);
      const auto data = generate(spec);
      const std::filesystem::path dir(out_dir);
      write_file_atomic(dir / "persons.csv", format_csv(data.frame));
      write_file_atomic(dir / "panel.csv", format_panel_csv(data.panel));
      write_file_atomic(dir / "truth.json", dump(to_json(data.truth, data.panel.sectors())));
      fmt::print("wrote {} persons to {}\n", data.frame.n_rows(), dir.string());
      return 0;
    }
    const PipelineConfig config = load_config(config_path);
    RunOptions options;
    options.deterministic = deterministic;
    if (*seed_opt) options.seed = seed;
    if (!out_dir.empty()) options.out = out_dir;
    else if (const char* env = std::getenv("SEGKIT_OUT"); env && *env) options.out = env;
    const auto report = run_pipeline(config, options);
    for (const auto& w : report.warnings) fmt::print(stderr, "warning: {}\n", w);
    fmt::print("{} files written to {}\n", report.files.size() + 1, report.out_dir.string());
    return 0;
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "AnalysisFailed"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
}
