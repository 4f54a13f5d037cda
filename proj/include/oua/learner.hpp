#pragma once

// Ornstein-Uhlenbeck adaptation: the learning dynamics.
//
//   dtheta = lambda (mu - theta) dt + Sigma dW           parameter exploration
//   dmu    = eta * delta_r * (theta - mu) dt              reward-gated mean update
//   drbar  = rho (r - rbar) dt                            reward low-pass filter
//   dG     = r dt                                         return
//
// with delta_r = r - rbar. Optionally sigma itself follows
//   dsigma    = lambda_s (mu_s - sigma) dt + meta_diffusion dW'
//   dmu_s     = eta_s * delta_r * (sigma - mu_s) dt
// and theta's diffusion uses max(sigma, sigma_floor).

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oua/environments.hpp"
#include "oua/models.hpp"
#include "oua/sde.hpp"

namespace oua {

inline constexpr double kSigmaFloor = 1e-6;

struct Hyperparams {
  double lambda = 1.0;
  double eta = 1.0;
  double rho = 1.0;
  /// One diffusion coefficient per parameter.
  std::vector<double> sigma{0.3};

  /// Throws ConfigError listing every negative/non-finite entry and a size
  /// mismatch against `n` parameters (skipped when n == 0).
  void validate(std::size_t n = 0) const;
};

struct LearnerState {
  Vec theta;
  Vec mu;
  double rbar = 0.0;
  double G = 0.0;
};

struct MetaState {
  double sigma = 0.15;
  double mu_sigma = 0.15;
  double lambda_sigma = 2.0;
  double eta_sigma = 3.0;
  double meta_diffusion = 1.0;
  double sigma_floor = kSigmaFloor;
};

double rpe(double r, double rbar);
double rbar_drift(double r, double rbar, double rho);

struct ThetaDynamics {
  Vec drift;
  Vec diffusion;
};

ThetaDynamics theta_dynamics(const LearnerState& state, const Hyperparams& hp);
Vec mu_drift(const LearnerState& state, const Hyperparams& hp, double delta_r);

/// Diagonal Sigma Sigma^T / (2 lambda). Throws DomainError for lambda == 0.
Mat stationary_covariance(const Hyperparams& hp);

struct MetaDynamics {
  double sigma_drift;
  double sigma_diffusion;
  double mu_sigma_drift;
};

MetaDynamics meta_sigma_dynamics(const MetaState& meta, double delta_r);

/// The diffusion magnitude actually applied to theta for a learnable sigma.
double effective_sigma(double sigma, double floor = kSigmaFloor);

/// Where each block lives inside the stacked state and noise vectors.
///
/// State:  [ latent z | plant | theta | mu | rbar | G | sigma mu_sigma ]
/// Noise:  [ theta channels | sigma channel | plant channels ]
struct StateLayout {
  std::size_t n = 0;
  std::size_t latent_dim = 0;
  std::size_t plant_dim = 0;
  bool meta = false;

  std::size_t latent = 0;
  std::size_t plant = 0;
  std::size_t theta = 0;
  std::size_t mu = 0;
  std::size_t rbar = 0;
  std::size_t G = 0;
  std::size_t sigma = 0;
  std::size_t mu_sigma = 0;
  std::size_t state_dim = 0;

  std::size_t theta_noise = 0;
  std::size_t meta_noise = 0;
  std::size_t plant_noise = 0;
  std::size_t noise_dim = 0;

  static StateLayout make(std::size_t n, std::size_t latent_dim, std::size_t plant_dim,
                          std::size_t plant_noise_dim, bool meta);
  std::vector<std::string> names() const;
};

/// Switches used for baselines and property checks.
struct LearnerOptions {
  /// Force delta_r = 0 inside the mu and mu_sigma drifts.
  bool zero_rpe = false;
};

/// Everything observable at one instant besides the state itself.
struct Observation {
  Vec x;
  double y = 0.0;
  double y_star = 0.0;  // NaN when the environment has no target
  double r = 0.0;
  double delta_r = 0.0;
};

struct InitialConditions {
  std::vector<double> theta0;
  /// Defaults to theta0 when empty.
  std::vector<double> mu0;
  double rbar0 = 0.0;
  double z0 = 0.0;
};

struct LearnerEvaluator;

class LearnerSystem {
 public:
  const SdeSystem& sde() const { return sde_; }
  const StateLayout& layout() const { return layout_; }

  Vec initial_state(const InitialConditions& ic) const;
  Observation observe(double t, const Vec& state, std::span<const double> exo) const;
  LearnerState learner_state(const Vec& state) const;

 private:
  friend LearnerSystem learner_as_sde(const Model&, const Environment&, const Hyperparams&,
                                      const std::optional<MetaState>&, const LearnerOptions&);
  SdeSystem sde_;
  StateLayout layout_;
  std::shared_ptr<const LearnerEvaluator> eval_;
  Vec plant0_;
  std::optional<MetaState> meta_;
};

/// Stacks model latent dynamics, plant dynamics and the OUA learning
/// dynamics into one SDE. Throws ConfigError for invalid hyper-parameters
/// (including a sigma count that differs from the parameter count) and
/// DimensionError if the model and environment disagree on sizes.
LearnerSystem learner_as_sde(const Model& model, const Environment& env, const Hyperparams& hp,
                             const std::optional<MetaState>& meta = std::nullopt,
                             const LearnerOptions& options = {});

}  // namespace oua
