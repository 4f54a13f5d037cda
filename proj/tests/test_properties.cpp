#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

#include "oua/environments.hpp"
#include "oua/learner.hpp"
#include "oua/models.hpp"
#include "oua/sde.hpp"

using namespace oua;

namespace {

Environment constant_reward_env(double r) {
  Environment env;
  env.name = "constant";
  env.input_dim = 1;
  env.input = [](double, ConstSpan, ConstSpan, MutSpan x) { x[0] = 1.0; };
  env.reward = [r](double, ConstSpan, double, ConstSpan) { return r; };
  return env;
}

Environment scaled(Environment env, double c) {
  env.reward = [inner = env.reward, c](double t, ConstSpan x, double y, ConstSpan s) { return c * inner(t, x, y, s); };
  return env;
}

struct Run {
  Trajectory traj;
  std::vector<double> rewards;
  StateLayout layout;
};

Run simulate(const LearnerSystem& sys, const InitialConditions& ic, const TimeGrid& grid, std::uint64_t seed) {
  WienerSource noise(seed, sys.sde().noise_dim);
  Run out;
  out.layout = sys.layout();
  Recorder rec;
  rec.on_record = [&](const StepView& v) { out.rewards.push_back(sys.observe(v.t, v.state, v.exo).r); };
  out.traj = integrate(sys.sde(), grid, sys.initial_state(ic), noise, rec);
  return out;
}

double at(const Vec& v, std::size_t i) { return v[static_cast<Eigen::Index>(i)]; }

}  // namespace

TEST_CASE("gate: zero prediction error leaves mu untouched") {
  const TimeGrid grid{0.0, 50.0, 0.05};
  const Model m = make_tanh_scalar_model();
  const auto sys = learner_as_sde(m, supervised_task(m, {1.0}, grid), {1.0, 5.0, 1.0, {0.5}}, std::nullopt,
                                  LearnerOptions{true});
  InitialConditions ic;
  ic.theta0 = {0.2};
  ic.mu0 = {-0.3};
  ic.rbar0 = -1.0;
  const auto run = simulate(sys, ic, grid, 7);
  double theta_spread = 0.0;
  for (const auto& s : run.traj.states) {
    CHECK(at(s, run.layout.mu) == -0.3);
    theta_spread = std::max(theta_spread, std::abs(at(s, run.layout.theta) + 0.3));
  }
  CHECK(theta_spread > 0.1);
}

TEST_CASE("mean reversion is monotone and exponentially bounded") {
  const double lambda = 1.3, dt = 0.05;
  const TimeGrid grid{0.0, 10.0, dt};
  Environment env = constant_reward_env(-1.0);
  env.input_dim = 2;
  env.input = [](double, ConstSpan, ConstSpan, MutSpan x) { x[0] = x[1] = 1.0; };
  const auto sys = learner_as_sde(make_tanh_multi_model(2), env, {lambda, 0.0, 1.0, {0.0, 0.0}});
  InitialConditions ic;
  ic.theta0 = {2.0, -1.0};
  ic.mu0 = {0.5, 0.5};
  const auto run = simulate(sys, ic, grid, 0);
  const auto& l = run.layout;
  auto dist = [&](const Vec& s) {
    return std::hypot(at(s, l.theta) - at(s, l.mu), at(s, l.theta + 1) - at(s, l.mu + 1));
  };
  const double d0 = dist(run.traj.states.front());
  for (std::size_t k = 1; k < run.traj.size(); ++k) {
    const double d = dist(run.traj.states[k]);
    CHECK(d < dist(run.traj.states[k - 1]));
    CHECK(d <= d0 * std::exp(-lambda * run.traj.times[k]) * (1.0 + 5.0 * dt));
  }
}

TEST_CASE("reward filter converges exponentially to a constant reward") {
  const double rho = 0.7, dt = 0.05, r0 = -0.4;
  const TimeGrid grid{0.0, 20.0, dt};
  const auto sys = learner_as_sde(make_tanh_scalar_model(), constant_reward_env(r0), {1.0, 1.0, rho, {0.3}});
  InitialConditions ic;
  ic.theta0 = {0.0};
  ic.rbar0 = 2.0;
  const auto run = simulate(sys, ic, grid, 1);
  const double e0 = std::abs(ic.rbar0 - r0);
  for (std::size_t k = 0; k < run.traj.size(); ++k) {
    const double e = std::abs(at(run.traj.states[k], run.layout.rbar) - r0);
    CHECK(e <= e0 * std::exp(-rho * run.traj.times[k]) * (1.0 + 5.0 * dt));
  }
}

TEST_CASE("return equals the step-wise reward sum") {
  const TimeGrid grid{0.0, 30.0, 0.05};
  const Model m = make_ctrnn_model();
  const auto sys = learner_as_sde(m, supervised_task(m, {0.3, 0.7, 1.0}, grid), {1.0, 2.0, 1.0, {0.2, 0.2, 0.2}});
  InitialConditions ic;
  ic.theta0 = {0.2, 0.1, 0.5};
  const auto run = simulate(sys, ic, grid, 5);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < run.rewards.size(); ++k) sum += run.rewards[k] * grid.dt;
  const double G = at(run.traj.states.back(), run.layout.G);
  CHECK(G < 0.0);
  CHECK(std::abs(G - sum) <= 1e-9 * std::abs(sum));
}

TEST_CASE("scale symmetry of rewards and learning rate") {
  const double c = 4.0;
  const TimeGrid grid{0.0, 40.0, 0.05};
  const Model m = make_tanh_scalar_model();
  const Environment env = supervised_task(m, {1.0}, grid);
  const auto base = learner_as_sde(m, env, {1.0, 1.0, 1.0, {0.3}});
  const auto big = learner_as_sde(m, scaled(env, c), {1.0, 1.0 / c, 1.0, {0.3}});
  InitialConditions ic;
  ic.theta0 = {0.0};
  ic.rbar0 = -1.0;
  InitialConditions ic_big = ic;
  ic_big.rbar0 = c * ic.rbar0;
  const auto a = simulate(base, ic, grid, 3);
  const auto b = simulate(big, ic_big, grid, 3);
  for (std::size_t k = 0; k < a.traj.size(); ++k) {
    CHECK(at(a.traj.states[k], a.layout.mu) == at(b.traj.states[k], b.layout.mu));
  }
  CHECK(at(a.traj.states.back(), a.layout.mu) != 0.0);
}

TEST_CASE("stationary variance of the exploration process") {
  const double lambda = 1.0, sigma = 0.3;
  const TimeGrid grid{0.0, 2000.0, 0.05};
  const auto sys = learner_as_sde(make_tanh_scalar_model(), constant_reward_env(-1.0), {lambda, 1.0, 1.0, {sigma}},
                                  std::nullopt, LearnerOptions{true});
  InitialConditions ic;
  ic.theta0 = {0.0};
  WienerSource noise(11, sys.sde().noise_dim);
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  Recorder rec;
  rec.keep_states = false;
  rec.on_record = [&](const StepView& v) {
    const double th = at(v.state, sys.layout().theta);
    sum += th;
    sq += th * th;
    ++count;
  };
  integrate(sys.sde(), grid, sys.initial_state(ic), noise, rec);
  const double mean = sum / static_cast<double>(count);
  const double var = (sq - static_cast<double>(count) * mean * mean) / static_cast<double>(count - 1);
  const double expected = sigma * sigma / (2.0 * lambda);
  CHECK(std::abs(var - expected) < 0.2 * expected);
}

TEST_CASE("additive noise: Euler-Heun is Euler-Maruyama") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  SdeSystem s;
  s.state_dim = 3;
  s.noise_dim = 3;
  s.drift = [](double t, const Vec& y, std::span<const double>, Vec& out) {
    out[0] = std::sin(y[1]) - y[0];
    out[1] = y[0] * y[2] + t;
    out[2] = -2.0 * y[2];
  };
  const Vec diag = (Vec(3) << 0.3, 0.1, 0.7).finished();
  s.diffusion = [diag](double, const Vec&, Mat& g) {
    g.setZero();
    g.diagonal() = diag;
  };
  for (int k = 0; k < 100; ++k) {
    const Vec y = (Vec(3) << n(rng), n(rng), n(rng)).finished();
    const Vec dW = std::sqrt(0.05) * (Vec(3) << n(rng), n(rng), n(rng)).finished();
    Vec f(3);
    s.drift(0.4, y, {}, f);
    const Vec em = y + f * 0.05 + diag.cwiseProduct(dW);
    const Vec eh = euler_heun_step(s, 0.4, y, 0.05, dW);
    CHECK((eh - em).cwiseAbs().maxCoeff() <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + em.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("ctrnn latent stays bounded") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 2.0);
  const Model m = make_ctrnn_model();
  Environment env = constant_reward_env(-1.0);
  env.input = [](double t, ConstSpan, ConstSpan, MutSpan x) { x[0] = std::sin(0.37 * t); };
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> theta{n(rng), n(rng), n(rng)};
    const auto sys = learner_as_sde(m, env, {0.0, 0.0, 1.0, {0.0, 0.0, 0.0}});
    InitialConditions ic;
    ic.theta0 = theta;
    ic.z0 = n(rng);
    const auto run = simulate(sys, ic, {0.0, 50.0, 0.05}, 0);
    const double bound = std::max(std::abs(ic.z0), 1.0) + 1.0;
    for (const auto& s : run.traj.states) CHECK(std::abs(at(s, run.layout.latent)) <= bound);
  }
}
