#pragma once

// Experiment orchestration: seeded runs, frozen baselines, sweeps and metrics.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oua/environments.hpp"
#include "oua/learner.hpp"
#include "oua/models.hpp"
#include "oua/sde.hpp"

namespace oua {

enum class Task { Single, Recurrent, Multi, Weather, Sdi, Meta };

std::string to_string(Task task);
Task parse_task(const std::string& name);

enum class RunMode {
  Learn,
  /// theta held at theta0, no exploration, no learning.
  FrozenInitial,
  /// theta held at a supplied mean (normally mu(T) of a learning run).
  FrozenMean,
};

std::string to_string(RunMode mode);

struct MetaConfig {
  bool enabled = false;
  double lambda_sigma = 2.0;
  double eta_sigma = 3.0;
  double meta_diffusion = 1.0;
  double sigma0 = 0.15;
  double mu_sigma0 = 0.15;
  double sigma_floor = kSigmaFloor;
};

struct TargetConfig {
  std::vector<double> theta_star;
  /// Target switch (volatile task). Negative means "half the horizon".
  std::optional<double> switch_time;
  std::vector<double> theta_star_after;
};

struct WeatherConfig {
  std::string path;
  bool zca = true;
  double train_fraction = 0.8;
  /// Simulated time units per hourly row.
  double hours_per_unit = 1.0;
  /// Limit the number of training rows used (0 = all).
  std::size_t max_train_rows = 0;
};

struct ExperimentConfig {
  Task task = Task::Single;
  /// Preset name this config was derived from (informational).
  std::string preset;
  TimeGrid grid{0.0, 200.0, 0.05};
  std::size_t record_stride = 1;
  Hyperparams hp;
  MetaConfig meta;
  InitialConditions initial;
  /// Standard deviation of a random Gaussian theta0 (mu0 = theta0); 0 disables.
  double theta0_std = 0.0;
  TargetConfig target;
  SdiParams sdi;
  std::vector<double> sdi_s0{0.0, 0.0};
  WeatherConfig weather;
  Nonlinearity nonlinearity = Nonlinearity::Tanh;
  /// Holds delta_r at 0 inside the learning drifts, which freezes mu.
  bool zero_rpe = false;
  std::vector<std::uint64_t> seeds;
  /// Worker threads for multi-run operations (0 = hardware concurrency).
  std::size_t threads = 0;

  /// Number of learnable parameters implied by the task.
  std::size_t param_dim() const;
  /// Throws ConfigError listing every problem.
  void validate() const;
};

/// Columns recorded for one run. All columns share the time axis `t`.
struct RunRecord {
  std::string task;
  RunMode mode = RunMode::Learn;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  double G_T = 0.0;
  Vec mu_T;
  Vec theta_T;
  double wall_seconds = 0.0;

  const std::vector<double>& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  std::size_t size() const { return columns.empty() ? 0 : columns.front().size(); }
  /// Every column whose name starts with `prefix` followed by an index.
  std::vector<const std::vector<double>*> block(const std::string& prefix) const;
};

struct WeatherData;

/// Immutable per-experiment context shared by every run of a config.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);
  Experiment(ExperimentConfig config, std::shared_ptr<const WeatherData> weather);

  const ExperimentConfig& config() const { return config_; }
  const Model& model() const { return model_; }
  const std::shared_ptr<const WeatherData>& weather() const { return weather_; }

  /// One seeded run. `theta_fixed` is required for FrozenMean.
  RunRecord run(std::uint64_t seed, RunMode mode = RunMode::Learn,
                const std::optional<Vec>& theta_fixed = std::nullopt) const;

  /// Initial parameters of a seeded run (random for theta0_std > 0).
  std::vector<double> theta0(std::uint64_t seed) const;

 private:
  Environment make_environment() const;

  ExperimentConfig config_;
  Model model_;
  std::shared_ptr<const WeatherData> weather_;
};

/// Runs `jobs` independent tasks on up to `threads` workers; result order
/// matches job order regardless of thread count.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t jobs, std::size_t threads, Fn&& fn);

std::vector<RunRecord> run_seeds(const Experiment& experiment, RunMode mode = RunMode::Learn);

struct SweepPoint {
  double value = 0.0;
  std::vector<double> G_T;  // one per seed, in seed order
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct SweepResult {
  std::string param;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepPoint> points;
  /// Mean G(T) of the frozen-theta0 runs (no learning).
  double reference = 0.0;
};

/// Names accepted by sweep(): lambda, sigma, rho, eta.
bool is_sweepable(const std::string& param);
ExperimentConfig with_param(ExperimentConfig config, const std::string& param, double value);

SweepResult sweep(const ExperimentConfig& config, const std::string& param, const std::vector<double>& values,
                  std::shared_ptr<const WeatherData> weather = nullptr);

/// `count` log-spaced values spanning `decades` decades centred on `centre`.
std::vector<double> log_grid(double centre, std::size_t count = 12, double decades = 2.0);

/// Pearson product-moment correlation. Throws DomainError for zero variance
/// and DimensionError for mismatched or too-short series.
double pearson(std::span<const double> a, std::span<const double> b);
/// Mean squared difference. Throws DimensionError for mismatched/empty series.
double mse(std::span<const double> a, std::span<const double> b);

/// Test-split predictions y = theta . x and their agreement with the targets.
struct WeatherScore {
  std::vector<double> predictions;
  /// NaN when the predictions have zero variance.
  double pearson = 0.0;
  double mse = 0.0;
};
WeatherScore score_weather(const WeatherData& data, const Vec& theta);

/// Mean of a column over the fraction [from, to) of its samples.
double window_mean(const std::vector<double>& column, double from, double to);
/// Average slope of a cumulative column over the fraction [from, 1].
double final_rate(const RunRecord& record, const std::string& column, double from = 0.9);

}  // namespace oua

#include "oua/parallel.inl"
