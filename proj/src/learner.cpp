#include "oua/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "oua/error.hpp"

namespace oua {

void Hyperparams::validate(std::size_t n) const {
  std::vector<std::string> problems;
  auto check = [&](const char* name, double v) {
    if (!std::isfinite(v) || v < 0.0) problems.push_back(std::string(name) + " must be >= 0");
  };
  check("lambda", lambda);
  check("eta", eta);
  check("rho", rho);
  for (double s : sigma) {
    if (!std::isfinite(s) || s < 0.0) {
      problems.emplace_back("sigma must be >= 0");
      break;
    }
  }
  if (n != 0 && sigma.size() != n) {
    problems.push_back("sigma has " + std::to_string(sigma.size()) + " entries but the model has " +
                       std::to_string(n) + " parameters");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

double rpe(double r, double rbar) { return r - rbar; }

double rbar_drift(double r, double rbar, double rho) { return rho * (r - rbar); }

ThetaDynamics theta_dynamics(const LearnerState& state, const Hyperparams& hp) {
  if (state.theta.size() != state.mu.size() ||
      static_cast<std::size_t>(state.theta.size()) != hp.sigma.size()) {
    throw DimensionError("theta, mu and sigma must have equal lengths");
  }
  ThetaDynamics out;
  out.drift = hp.lambda * (state.mu - state.theta);
  out.diffusion = Eigen::Map<const Vec>(hp.sigma.data(), static_cast<Eigen::Index>(hp.sigma.size()));
  return out;
}

Vec mu_drift(const LearnerState& state, const Hyperparams& hp, double delta_r) {
  if (state.theta.size() != state.mu.size()) throw DimensionError("theta and mu must have equal lengths");
  return hp.eta * delta_r * (state.theta - state.mu);
}

Mat stationary_covariance(const Hyperparams& hp) {
  if (!(hp.lambda > 0.0)) {
    throw DomainError("stationary covariance is undefined without mean reversion (lambda = 0)");
  }
  const auto n = static_cast<Eigen::Index>(hp.sigma.size());
  Mat c = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) c(i, i) = hp.sigma[i] * hp.sigma[i] / (2.0 * hp.lambda);
  return c;
}

MetaDynamics meta_sigma_dynamics(const MetaState& meta, double delta_r) {
  return {meta.lambda_sigma * (meta.mu_sigma - meta.sigma), meta.meta_diffusion,
          meta.eta_sigma * delta_r * (meta.sigma - meta.mu_sigma)};
}

double effective_sigma(double sigma, double floor) { return std::max(sigma, floor); }

StateLayout StateLayout::make(std::size_t n, std::size_t latent_dim, std::size_t plant_dim,
                              std::size_t plant_noise_dim, bool meta) {
  StateLayout l;
  l.n = n;
  l.latent_dim = latent_dim;
  l.plant_dim = plant_dim;
  l.meta = meta;
  l.latent = 0;
  l.plant = l.latent + latent_dim;
  l.theta = l.plant + plant_dim;
  l.mu = l.theta + n;
  l.rbar = l.mu + n;
  l.G = l.rbar + 1;
  l.sigma = l.G + 1;
  l.mu_sigma = l.sigma + 1;
  l.state_dim = meta ? l.mu_sigma + 1 : l.G + 1;

  l.theta_noise = 0;
  l.meta_noise = n;
  l.plant_noise = n + (meta ? 1 : 0);
  l.noise_dim = l.plant_noise + plant_noise_dim;
  return l;
}

std::vector<std::string> StateLayout::names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < latent_dim; ++i) out.push_back("z_" + std::to_string(i));
  for (std::size_t i = 0; i < plant_dim; ++i) out.push_back("s_" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) out.push_back("theta_" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) out.push_back("mu_" + std::to_string(i));
  out.emplace_back("rbar");
  out.emplace_back("G");
  if (meta) {
    out.emplace_back("sigma");
    out.emplace_back("mu_sigma");
  }
  return out;
}

// Shared by the drift callback and LearnerSystem::observe so that recorded
// rewards are exactly the ones the integrator used.
struct LearnerEvaluator {
  Model model;
  Environment env;
  StateLayout layout;

  void observe(double t, const Vec& state, std::span<const double> exo, Observation& obs) const {
    const auto& l = layout;
    obs.x.resize(static_cast<Eigen::Index>(env.input_dim));
    ConstSpan plant{state.data() + l.plant, l.plant_dim};
    env.input(t, plant, exo, {obs.x.data(), env.input_dim});
    ConstSpan theta{state.data() + l.theta, l.n};
    ConstSpan z{state.data() + l.latent, l.latent_dim};
    obs.y = model.output(theta, {obs.x.data(), env.input_dim}, z);
    obs.y_star = env.target ? env.target(t) : std::numeric_limits<double>::quiet_NaN();
    obs.r = env.reward(t, {obs.x.data(), env.input_dim}, obs.y, plant);
    obs.delta_r = rpe(obs.r, state[static_cast<Eigen::Index>(l.rbar)]);
  }
};

LearnerSystem learner_as_sde(const Model& model, const Environment& env, const Hyperparams& hp,
                             const std::optional<MetaState>& meta, const LearnerOptions& options) {
  model.validate();
  hp.validate(meta ? 0 : model.param_dim);
  if (model.input_dim != env.input_dim) {
    throw DimensionError("model '" + model.name + "' expects " + std::to_string(model.input_dim) +
                         " inputs but environment '" + env.name + "' provides " +
                         std::to_string(env.input_dim));
  }
  if (!env.input || !env.reward) throw ConfigError("environment '" + env.name + "' is incomplete");
  if (env.state_dim > 0 && !env.plant_drift) {
    throw ConfigError("environment '" + env.name + "' has plant state but no plant drift");
  }
  if (env.noise_dim > 0 && (static_cast<std::size_t>(env.plant_diffusion.rows()) != env.state_dim ||
                            static_cast<std::size_t>(env.plant_diffusion.cols()) != env.noise_dim)) {
    throw DimensionError("plant diffusion must be state_dim x noise_dim");
  }

  const std::size_t n = model.param_dim;
  const StateLayout l = StateLayout::make(n, model.latent_dim, env.state_dim, env.noise_dim, meta.has_value());

  LearnerSystem sys;
  sys.layout_ = l;
  sys.plant0_ = env.initial_state;
  sys.meta_ = meta;

  auto eval = std::make_shared<const LearnerEvaluator>(LearnerEvaluator{model, env, l});
  sys.eval_ = eval;
  const double lambda = hp.lambda;
  const double eta = hp.eta;
  const double rho = hp.rho;
  const bool zero_rpe = options.zero_rpe;
  const std::optional<MetaState> meta_hp = meta;

  SdeSystem& sde = sys.sde_;
  sde.state_dim = l.state_dim;
  sde.noise_dim = l.noise_dim;
  sde.exo_dim = env.exo_dim;
  sde.names = l.names();

  sde.drift = [eval, l, lambda, eta, rho, zero_rpe, meta_hp, obs = Observation()](
                  double t, const Vec& y, std::span<const double> exo, Vec& out) mutable {
    eval->observe(t, y, exo, obs);
    const double delta = zero_rpe ? 0.0 : obs.delta_r;
    const auto n_ = static_cast<Eigen::Index>(l.n);
    const auto th = static_cast<Eigen::Index>(l.theta);
    const auto mu = static_cast<Eigen::Index>(l.mu);

    if (l.latent_dim > 0) {
      eval->model.latent_drift({y.data() + l.theta, l.n}, {obs.x.data(), static_cast<std::size_t>(obs.x.size())},
                               {y.data() + l.latent, l.latent_dim}, {out.data() + l.latent, l.latent_dim});
    }
    if (l.plant_dim > 0) {
      eval->env.plant_drift(t, {y.data() + l.plant, l.plant_dim}, obs.y, {out.data() + l.plant, l.plant_dim});
    }
    out.segment(th, n_) = lambda * (y.segment(mu, n_) - y.segment(th, n_));
    out.segment(mu, n_) = (eta * delta) * (y.segment(th, n_) - y.segment(mu, n_));
    out[static_cast<Eigen::Index>(l.rbar)] = rbar_drift(obs.r, y[static_cast<Eigen::Index>(l.rbar)], rho);
    out[static_cast<Eigen::Index>(l.G)] = obs.r;
    if (meta_hp) {
      MetaState m = *meta_hp;
      m.sigma = y[static_cast<Eigen::Index>(l.sigma)];
      m.mu_sigma = y[static_cast<Eigen::Index>(l.mu_sigma)];
      const MetaDynamics md = meta_sigma_dynamics(m, delta);
      out[static_cast<Eigen::Index>(l.sigma)] = md.sigma_drift;
      out[static_cast<Eigen::Index>(l.mu_sigma)] = md.mu_sigma_drift;
    }
  };

  const std::vector<double> sigma = hp.sigma;
  const Mat plant_diffusion = env.plant_diffusion;
  sde.diffusion = [l, sigma, meta_hp, plant_diffusion](double, const Vec& y, Mat& g) {
    g.setZero();
    const auto th = static_cast<Eigen::Index>(l.theta);
    if (meta_hp) {
      const double s = effective_sigma(y[static_cast<Eigen::Index>(l.sigma)], meta_hp->sigma_floor);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(l.n); ++i) g(th + i, i) = s;
      g(static_cast<Eigen::Index>(l.sigma), static_cast<Eigen::Index>(l.meta_noise)) = meta_hp->meta_diffusion;
    } else {
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(l.n); ++i) g(th + i, i) = sigma[i];
    }
    if (l.plant_dim > 0 && plant_diffusion.cols() > 0) {
      g.block(static_cast<Eigen::Index>(l.plant), static_cast<Eigen::Index>(l.plant_noise),
              plant_diffusion.rows(), plant_diffusion.cols()) = plant_diffusion;
    }
  };
  return sys;
}

Vec LearnerSystem::initial_state(const InitialConditions& ic) const {
  const auto& l = layout_;
  if (ic.theta0.size() != l.n) {
    throw DimensionError("theta0 has " + std::to_string(ic.theta0.size()) + " entries, expected " +
                         std::to_string(l.n));
  }
  const auto& mu0 = ic.mu0.empty() ? ic.theta0 : ic.mu0;
  if (mu0.size() != l.n) {
    throw DimensionError("mu0 has " + std::to_string(mu0.size()) + " entries, expected " + std::to_string(l.n));
  }
  Vec y = Vec::Zero(static_cast<Eigen::Index>(l.state_dim));
  for (std::size_t i = 0; i < l.latent_dim; ++i) y[static_cast<Eigen::Index>(l.latent + i)] = ic.z0;
  if (l.plant_dim > 0) y.segment(static_cast<Eigen::Index>(l.plant), static_cast<Eigen::Index>(l.plant_dim)) = plant0_;
  for (std::size_t i = 0; i < l.n; ++i) {
    y[static_cast<Eigen::Index>(l.theta + i)] = ic.theta0[i];
    y[static_cast<Eigen::Index>(l.mu + i)] = mu0[i];
  }
  y[static_cast<Eigen::Index>(l.rbar)] = ic.rbar0;
  y[static_cast<Eigen::Index>(l.G)] = 0.0;
  if (meta_) {
    y[static_cast<Eigen::Index>(l.sigma)] = meta_->sigma;
    y[static_cast<Eigen::Index>(l.mu_sigma)] = meta_->mu_sigma;
  }
  return y;
}

Observation LearnerSystem::observe(double t, const Vec& state, std::span<const double> exo) const {
  Observation obs;
  eval_->observe(t, state, exo, obs);
  return obs;
}

LearnerState LearnerSystem::learner_state(const Vec& state) const {
  const auto& l = layout_;
  const auto n = static_cast<Eigen::Index>(l.n);
  return {state.segment(static_cast<Eigen::Index>(l.theta), n), state.segment(static_cast<Eigen::Index>(l.mu), n),
          state[static_cast<Eigen::Index>(l.rbar)], state[static_cast<Eigen::Index>(l.G)]};
}

}  // namespace oua
