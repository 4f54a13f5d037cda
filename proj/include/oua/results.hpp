#pragma once

// Results directory writers. CSV values use 17 significant digits.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "oua/harness.hpp"

namespace oua {

/// File name of one run: run_<label>_<seed>.csv.
std::string run_file_name(const std::string& label, std::uint64_t seed);

/// Header is the record's column names; one row per recorded step.
void write_run_csv(const std::string& path, const RunRecord& record);

struct SummaryRow {
  std::string run;
  std::string mode;
  std::uint64_t seed = 0;
  /// "ok" or the failure message.
  std::string status = "ok";
  double G_T = 0.0;
  Vec mu_T;
  Vec theta_T;
  double wall_seconds = 0.0;
  std::map<std::string, double> metrics;
};

SummaryRow summarize(const std::string& run, const RunRecord& record);

/// Columns: run, mode, seed, status, G_T, mu_<i>..., theta_<i>..., wall_seconds,
/// then the union of metric names (blank where a row lacks one).
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);

/// Columns: value, seed, G_T.
void write_sweep_csv(const std::string& path, const SweepResult& sweep);

/// Columns: param, value, mean_G_T, min_G_T, max_G_T, reference_G_T.
void write_sweep_summary_csv(const std::string& path, const std::vector<SweepResult>& sweeps);

void write_json(const std::string& path, const nlohmann::json& value);

/// Current UTC time as ISO 8601.
std::string utc_now();

/// Library version string, including the git revision when known.
std::string version();

}  // namespace oua
