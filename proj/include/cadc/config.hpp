#pragma once

// Run configuration: one file in a small TOML subset ([section] headers,
// `key = value` lines with numbers, booleans or double-quoted strings, and
// `#` comments) mapped onto every module's config struct.

#include <filesystem>
#include <string>
#include <string_view>

#include "cadc/splat_sim.hpp"

namespace cadc {

/// Merged view of every module's settings. `experiment` embeds the scoring,
/// policy and mask configs.
struct CliConfig {
  ExperimentConfig experiment;
  SyntheticConfig synthetic;

  ScoringConfig& scoring() { return experiment.scoring; }
  DensityPolicyConfig& policy() { return experiment.policy; }
  MaskConfig& mask() { return experiment.mask; }
  const ScoringConfig& scoring() const { return experiment.scoring; }
  const DensityPolicyConfig& policy() const { return experiment.policy; }
  const MaskConfig& mask() const { return experiment.mask; }
};

/// Applies every `key = value` in `text` on top of `base`. Unknown sections
/// or keys, type mismatches and syntax errors throw ParseError(InvalidConfig)
/// carrying the line number and the `section.key` path.
CliConfig parse_config(std::string_view text, CliConfig base = {});

/// Reads and parses a file. Throws Error(Io) when it cannot be read.
CliConfig load_config(const std::filesystem::path& path, CliConfig base = {});

/// Runs every module's `check`.
void check(const CliConfig& cfg);

/// Canonical text of a config; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const CliConfig& cfg);

}  // namespace cadc
