#include "oua/environments.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "oua/error.hpp"

namespace oua {

double sine_input(std::size_t i, std::size_t n, double t) {
  const double freq = 0.1 * static_cast<double>(i);
  const double phase = static_cast<double>(i - 1) * 2.0 * std::numbers::pi / static_cast<double>(n);
  return std::sin(freq * t + phase);
}

double tracking_reward(double y, double y_star) {
  const double e = y - y_star;
  return -(e * e);
}

namespace {

void sine_inputs(double t, MutSpan x) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = sine_input(i + 1, x.size(), t);
}

}  // namespace

Environment supervised_task(const Model& model, std::vector<double> theta_star, const TimeGrid& grid,
                            std::optional<TargetSwitch> change, double z0) {
  model.validate();
  if (theta_star.size() != model.param_dim) {
    throw DimensionError("target parameters have " + std::to_string(theta_star.size()) +
                         " entries but model '" + model.name + "' has " +
                         std::to_string(model.param_dim));
  }
  if (change && change->theta_star.size() != model.param_dim) {
    throw DimensionError("switched target parameters have " +
                         std::to_string(change->theta_star.size()) + " entries, expected " +
                         std::to_string(model.param_dim));
  }

  auto params_at = [theta_star, change](double t) -> const std::vector<double>& {
    if (change && t >= change->time) return change->theta_star;
    return theta_star;
  };

  Environment env;
  env.name = "supervised_" + model.name;
  env.input_dim = model.input_dim;
  env.input = [](double t, ConstSpan, ConstSpan, MutSpan x) { sine_inputs(t, x); };

  const std::size_t d = model.latent_dim;
  std::vector<double> x(model.input_dim);
  if (d == 0) {
    env.target = [model, params_at, x](double t) mutable {
      sine_inputs(t, x);
      return model.output(params_at(t), x, {});
    };
  } else {
    // Run the target's own latent state over the grid. Drift evaluations of
    // the learner only happen at grid instants, where the interpolant is exact.
    grid.validate();
    const std::size_t steps = grid.steps();
    SampledSignal latent;
    latent.times.resize(steps + 1);
    latent.values.resize(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(d));

    SdeSystem sys;
    sys.state_dim = d;
    sys.drift = [&model, &params_at, &x](double t, const Vec& z, std::span<const double>, Vec& out) {
      sine_inputs(t, x);
      model.latent_drift(params_at(t), x, {z.data(), static_cast<std::size_t>(z.size())},
                         {out.data(), static_cast<std::size_t>(out.size())});
    };
    StepWorkspace ws;
    Vec z = Vec::Constant(static_cast<Eigen::Index>(d), z0);
    Vec next(z.size());
    const Vec no_noise(0);
    for (std::size_t k = 0; k <= steps; ++k) {
      latent.times[k] = grid.time_at(k);
      latent.values.row(static_cast<Eigen::Index>(k)) = z.transpose();
      if (k == steps) break;
      euler_heun_step(sys, latent.times[k], z, grid.dt, no_noise, {}, ws, next);
      std::swap(z, next);
    }
    auto interp = std::make_shared<const HermiteInterpolator>(std::move(latent));
    env.target = [model, params_at, x, interp, zbuf = Vec(static_cast<Eigen::Index>(d))](double t) mutable {
      sine_inputs(t, x);
      interp->evaluate(t, zbuf);
      return model.output(params_at(t), x, {zbuf.data(), static_cast<std::size_t>(zbuf.size())});
    };
  }

  auto target = env.target;
  env.reward = [target](double t, ConstSpan, double y, ConstSpan) { return tracking_reward(y, target(t)); };
  return env;
}

Environment sampled_regression_task(std::shared_ptr<const HermiteInterpolator> inputs,
                                    std::shared_ptr<const HermiteInterpolator> targets) {
  if (!inputs || !targets) throw ConfigError("sampled regression task needs inputs and targets");
  if (targets->dim() != 1) throw DimensionError("regression targets must be scalar");
  Environment env;
  env.name = "sampled_regression";
  env.input_dim = inputs->dim();
  env.input = [inputs, buf = Vec()](double t, ConstSpan, ConstSpan, MutSpan x) mutable {
    inputs->evaluate(t, buf);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = buf[static_cast<Eigen::Index>(i)];
  };
  env.target = [targets, buf = Vec()](double t) mutable {
    targets->evaluate(t, buf);
    return buf[0];
  };
  auto target = env.target;
  env.reward = [target](double t, ConstSpan, double y, ConstSpan) { return tracking_reward(y, target(t)); };
  return env;
}

SdiState sdi_dynamics(const SdiState& s, const SdiParams& p, double y, double dt, double dW) {
  return {s.velocity * dt, (-p.gamma * s.velocity + y) * dt + p.alpha * dW};
}

SdiState sdi_observe(const SdiState& s, const SdiParams& p, double noise_position, double noise_velocity) {
  return {s.position + p.beta * noise_position, s.velocity + p.beta * noise_velocity};
}

double sdi_reward(const SdiState& s, double y) {
  return -0.5 * (s.position * s.position + s.velocity * s.velocity) - 0.5 * y * y;
}

Environment sdi_task(const SdiParams& params, SdiState initial) {
  if (params.gamma < 0 || params.alpha < 0 || params.beta < 0) {
    throw ConfigError("SDI gamma, alpha and beta must be >= 0");
  }
  Environment env;
  env.name = "sdi";
  env.input_dim = 2;
  env.state_dim = 2;
  env.noise_dim = 1;
  env.exo_dim = 2;
  env.initial_state = Vec(2);
  env.initial_state << initial.position, initial.velocity;
  env.plant_diffusion = Mat::Zero(2, 1);
  env.plant_diffusion(1, 0) = params.alpha;

  env.input = [params](double, ConstSpan s, ConstSpan exo, MutSpan x) {
    const SdiState obs = sdi_observe({s[0], s[1]}, params, exo[0], exo[1]);
    x[0] = obs.position;
    x[1] = obs.velocity;
  };
  env.reward = [](double, ConstSpan, double y, ConstSpan s) { return sdi_reward({s[0], s[1]}, y); };
  env.plant_drift = [params](double, ConstSpan s, double y, MutSpan ds) {
    // Drift part only; the alpha dW term is carried by plant_diffusion.
    const SdiState rate = sdi_dynamics({s[0], s[1]}, params, y, 1.0, 0.0);
    ds[0] = rate.position;
    ds[1] = rate.velocity;
  };
  return env;
}

}  // namespace oua
