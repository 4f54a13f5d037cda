#pragma once

// INI-style experiment configuration: named presets, file parsing,
// `key=value` overrides and aggregated validation.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "oua/harness.hpp"

namespace oua {

struct SweepConfig {
  /// Hyper-parameters to sweep, in order.
  std::vector<std::string> params{"lambda", "sigma", "rho", "eta"};
  /// Explicit values; empty means a log grid around the configured value.
  std::vector<double> values;
  std::size_t count = 12;
  double decades = 2.0;
};

struct Settings {
  ExperimentConfig experiment;
  SweepConfig sweep;
};

/// Built-in presets: fig2 ... fig8 and the bare task names.
std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
Settings preset(const std::string& name);

/// Seed lists: "3", "0..14", "0,2,5" or "[0, 2, 5]".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// Every accepted key as "section.key" (top-level keys have no section).
std::vector<std::string> config_keys();

/// Parses a config file. The top-level `task` key selects the preset that
/// supplies defaults; `fallback_preset` is used when the file has none.
/// Layers, lowest first: preset, `defaults`, file, `overrides`. Entries are
/// "key=value" with key bare or "section.key". Validation runs last and
/// every problem is reported in one ConfigError.
Settings load_settings(const std::string& path, const std::vector<std::string>& overrides = {},
                       const std::string& fallback_preset = "", const std::vector<std::string>& defaults = {});
Settings parse_settings(std::istream& in, const std::vector<std::string>& overrides = {},
                        const std::string& fallback_preset = "", const std::vector<std::string>& defaults = {});
/// Applies overrides to an existing settings object, then validates.
Settings apply_overrides(Settings settings, const std::vector<std::string>& overrides);

/// Throws ConfigError listing every problem.
void validate(const Settings& settings);

/// Round-trippable INI text and a JSON echo of every key.
std::string to_ini(const Settings& settings);
nlohmann::json to_json(const Settings& settings);

}  // namespace oua
