#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "csireid/experiment.hpp"
#include "csireid/synthgen.hpp"

namespace csireid {

/// Every tunable of every command. Defaults equal the module defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string data_dir{};
  std::string manifest = "manifest.csv";
  std::string out_dir = "out";
  std::string checkpoint{};  // empty: use out_dir

  DatasetSpec synth{};
  ExperimentConfig experiment{};

  std::vector<Arch> ablate_archs{Arch::lstm, Arch::bilstm, Arch::transformer};
  std::vector<std::size_t> ablate_packets{200};
  std::vector<bool> ablate_hampel{true, false};
  std::vector<bool> ablate_augment{true, false};
  std::vector<std::size_t> ablate_layers{1};

  double gradcheck_eps = 1e-4;
  std::size_t gradcheck_packets = 16;
  std::size_t gradcheck_entries = 32;

  /// Keys set by the file or an override (not part of the echoed config).
  std::set<std::string> explicit_keys{};

  /// Copies the global seed into the per-module seeds.
  void propagate_seed();
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Flat "key = value" text; '#' starts a comment. ConfigError on unknown
/// keys or unparsable values.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Defaults, then the file (if any), then overrides in order.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const ConfigOverrides& overrides = {});

/// Every key in a fixed order, "key = value" per line; re-parses to the same
/// configuration.
std::string dump_config(const RunConfig& cfg);

/// All known keys, in dump order.
std::vector<std::string> config_keys();

/// FNV-1a 64 of dump_config, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace csireid
