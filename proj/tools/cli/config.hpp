#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ckg/distiller.hpp"
#include "ckg/export.hpp"
#include "ckg/filter.hpp"
#include "ckg/gateway.hpp"

namespace ckg::app {

struct FilterSettings {
  int judge_sample = 4000;
  double holdout_fraction = 0.2;
  TrainOptions train;
  // When set, scoring is delegated to this command and no model is trained.
  std::string external_command;
  // Name substituted for the placeholder in judge prompts; empty keeps it.
  std::string judge_name;
};

struct EvalSettings {
  int per_stratum = 100;
  std::vector<std::string> annotators = {"a1", "a2", "a3"};
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  bool reviewer = false;
};

struct ExportSettings {
  ExportFormat format = ExportFormat::Tsv;
  std::optional<SplitFractions> split;
};

struct AssetPaths {
  std::filesystem::path templates;
  std::filesystem::path head_seeds;
  std::filesystem::path triple_seeds;
  std::filesystem::path names;
};

struct PipelineConfig {
  GatewayConfig gateway;
  DistillPlan plan;
  FilterSettings filter;
  EvalSettings eval;
  ExportSettings exports;
  AssetPaths assets;
  std::filesystem::path work_dir = "work";
  std::uint64_t rng_seed = 0;
  std::filesystem::path source;

  // Bounds and file existence. Throws ConfigError.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Expands ${VAR} and ${VAR:-fallback}. Throws ConfigError for an unset
// variable without a fallback or an unterminated reference.
std::string interpolate(std::string_view s, const EnvLookup& env);

// Reads a JSON config. Every string value is interpolated; relative paths
// resolve against the config file's directory. Unknown keys are errors.
// Does not validate, so command-line overrides can be applied first.
PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                            const EnvLookup& env = process_env());

}  // namespace ckg::app
