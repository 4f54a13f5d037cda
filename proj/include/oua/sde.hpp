#pragma once

// Fixed-step integration of coupled SDE/ODE systems.
//
// All diffusion in this library is expressed as a dense (state_dim x noise_dim)
// matrix mapping a Wiener increment onto the state. The Euler-Heun scheme is
// used throughout; for additive noise it reduces to Euler-Maruyama.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oua/error.hpp"

namespace oua {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct TimeGrid {
  double t0 = 0.0;
  double t_end = 1.0;
  double dt = 0.05;

  /// Throws ConfigError unless dt > 0, t_end > t0 and the step count is >= 1.
  void validate() const;
  std::size_t steps() const;
  /// t0 + k*dt, evaluated the same way everywhere so grids line up bit-exactly.
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

/// Seeded source of Wiener increments plus an independent stream of
/// per-step standard normals ("exogenous" noise, e.g. observation noise).
class WienerSource {
 public:
  WienerSource(std::uint64_t seed, std::size_t dim, std::uint64_t substream = 0);

  std::uint64_t seed() const { return seed_; }
  std::size_t dim() const { return dim_; }

  /// One increment over a step of length dt: i.i.d. N(0, dt) per component.
  void increment(double dt, Vec& dW);
  Vec increment(double dt);
  /// i.i.d. N(0, 1) draws from the exogenous stream.
  void standard_normals(std::span<double> out);

 private:
  std::uint64_t seed_;
  std::size_t dim_;
  std::mt19937_64 wiener_engine_;
  std::mt19937_64 exo_engine_;
  // One distribution per engine: normal_distribution caches draws in pairs.
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::normal_distribution<double> exo_normal_{0.0, 1.0};
};

/// Derives the engine seed of a substream; distinct (seed, substream) pairs map
/// to distinct engines.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t substream);

struct SdeSystem {
  using Drift = std::function<void(double t, const Vec& state, std::span<const double> exo, Vec& out)>;
  using Diffusion = std::function<void(double t, const Vec& state, Mat& out)>;

  std::size_t state_dim = 0;
  std::size_t noise_dim = 0;
  /// Number of fresh standard normals drawn per step and handed to the drift.
  std::size_t exo_dim = 0;
  Drift drift;
  Diffusion diffusion;
  /// Optional component names (used for error messages and CSV headers).
  std::vector<std::string> names;

  std::string component_name(std::size_t i) const;
};

/// Reusable buffers for euler_heun_step so the hot loop does not allocate.
struct StepWorkspace {
  Vec drift;
  Mat g0;
  Mat g1;
  Vec predictor;
  Vec noise_term;
};

/// One Euler-Heun step:
///   predictor  y~ = y + f(t,y) dt + g(t,y) dW
///   corrector  y' = y + f(t,y) dt + 0.5 [g(t,y) + g(t,y~)] dW
/// Throws IntegrationError naming the offending component when drift or
/// diffusion is non-finite.
Vec euler_heun_step(const SdeSystem& system, double t, const Vec& state, double dt, const Vec& dW,
                    std::span<const double> exo = {});
void euler_heun_step(const SdeSystem& system, double t, const Vec& state, double dt, const Vec& dW,
                     std::span<const double> exo, StepWorkspace& ws, Vec& out);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<std::string> names;

  std::size_t size() const { return times.size(); }
};

/// What the recorder sees at a recorded step: the state at t together with the
/// exogenous draws used for the step that starts at t.
struct StepView {
  std::size_t step;
  double t;
  const Vec& state;
  std::span<const double> exo;
};

struct Recorder {
  /// Record every stride-th step; the final state is always recorded.
  std::size_t stride = 1;
  /// Called for every recorded step, in order.
  std::function<void(const StepView&)> on_record;
  /// Keep states in the returned Trajectory.
  bool keep_states = true;
};

Trajectory integrate(const SdeSystem& system, const TimeGrid& grid, const Vec& initial_state,
                     WienerSource& noise, const Recorder& recorder = {});

/// Writes `t,<name_0>,...` with 17 significant digits per value.
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

struct SampledSignal {
  std::vector<double> times;
  /// One row per sample instant.
  Mat values;

  void validate() const;
};

/// Cubic Hermite interpolation with backward-difference knot slopes.
///
/// The slope at knot i (i >= 1) is (v[i] - v[i-1]) / (t[i] - t[i-1]); the first
/// knot reuses the slope of the second. Values are reproduced exactly at knots.
class HermiteInterpolator {
 public:
  explicit HermiteInterpolator(SampledSignal signal);

  Vec operator()(double t) const;
  void evaluate(double t, Vec& out) const;

  double t_min() const { return signal_.times.front(); }
  double t_max() const { return signal_.times.back(); }
  std::size_t dim() const { return static_cast<std::size_t>(signal_.values.cols()); }

 private:
  SampledSignal signal_;
  Mat slopes_;
};

Vec hermite_interpolate(const SampledSignal& signal, double t);

}  // namespace oua
