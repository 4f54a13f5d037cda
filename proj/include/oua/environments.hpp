#pragma once

// Task environments: input signal, reward and (optionally) a coupled plant.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oua/models.hpp"
#include "oua/sde.hpp"

namespace oua {

struct Environment {
  using Input = std::function<void(double t, ConstSpan plant, ConstSpan exo, MutSpan x)>;
  using Reward = std::function<double(double t, ConstSpan x, double y, ConstSpan plant)>;
  using Target = std::function<double(double t)>;
  using PlantDrift = std::function<void(double t, ConstSpan plant, double y, MutSpan dplant)>;

  std::string name;
  std::size_t input_dim = 0;
  /// Coupled plant state integrated alongside the learner (0 when absent).
  std::size_t state_dim = 0;
  /// Wiener channels driving the plant.
  std::size_t noise_dim = 0;
  /// Per-step standard normals consumed by `input` (observation noise).
  std::size_t exo_dim = 0;
  Vec initial_state;
  /// state_dim x noise_dim, constant (additive plant noise).
  Mat plant_diffusion;

  Input input;
  Reward reward;
  /// Target output y*(t) for supervised tasks; empty otherwise.
  Target target;
  PlantDrift plant_drift;
};

/// x_i(t) = sin(0.1 i t + (i-1) 2 pi / n), 1-based i. For i = n = 1 this is sin(0.1 t).
double sine_input(std::size_t i, std::size_t n, double t);

/// r = -(y - y*)^2
double tracking_reward(double y, double y_star);

struct TargetSwitch {
  double time;
  std::vector<double> theta_star;
};

/// Supervised tracking task: sinusoidal inputs, target produced by `model`
/// evaluated at `theta_star` (switching to `change->theta_star` at
/// `change->time` when given). Latent targets are integrated on `grid` from
/// `z0` with the same scheme as the learner, so the target is exact at every
/// grid instant.
Environment supervised_task(const Model& model, std::vector<double> theta_star, const TimeGrid& grid,
                            std::optional<TargetSwitch> change = std::nullopt, double z0 = 0.0);

/// Supervised task driven by sampled data: inputs and targets are cubic
/// Hermite interpolants of the samples.
Environment sampled_regression_task(std::shared_ptr<const HermiteInterpolator> inputs,
                                    std::shared_ptr<const HermiteInterpolator> targets);

struct SdiParams {
  double gamma = 0.01;
  double alpha = 0.005;
  double beta = 0.005;
};

struct SdiState {
  double position = 0.0;
  double velocity = 0.0;
};

/// Increment of the stochastic double integrator over one step.
SdiState sdi_dynamics(const SdiState& s, const SdiParams& p, double y, double dt, double dW);
/// Noisy observation x = s + beta * noise.
SdiState sdi_observe(const SdiState& s, const SdiParams& p, double noise_position, double noise_velocity);
/// r = -0.5 |s|^2 - 0.5 y^2
double sdi_reward(const SdiState& s, double y);

/// Closed-loop SDI task: the plant state is part of the integrated system,
/// its process noise occupies one Wiener channel and observation noise is
/// redrawn every step.
Environment sdi_task(const SdiParams& params, SdiState initial = {});

}  // namespace oua
