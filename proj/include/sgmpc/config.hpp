#pragma once

#include "sgmpc/bench.hpp"
#include "sgmpc/io.hpp"
#include "sgmpc/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sgmpc {

/// Run settings shared by every subcommand.
struct RunConfig {
  std::string scenario;  // obstacle | vehicle | quadrotor | custom
  PipelineConfig pipeline;
  std::uint64_t quad_seed = 0;
  std::uint64_t mc_seed = 1;
  int mc_samples = 5000;
  int report_step = -1;  // -1: last step of the horizon
  std::string output_dir;
};

struct LoadedConfig {
  RunConfig run;
  Scenario scenario;
  Json effective;  // the document after overrides
};

/// Parses a JSON config file; syntax errors report line and column.
Json read_config_file(const std::string& path);

/// Applies "a.b.c=value". The value is parsed as JSON, falling back to a plain string.
void apply_override(Json& doc, const std::string& assignment);

/// Validates a document and builds the scenario. All problems raise Error(kConfig)
/// with the offending field in the message.
LoadedConfig parse_config(const Json& doc);

LoadedConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace sgmpc
