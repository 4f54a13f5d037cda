#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"

#include "oua/error.hpp"
#include "oua/sde.hpp"

using namespace oua;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

SdeSystem scalar_ou(double lambda, double mu, double sigma) {
  SdeSystem s;
  s.state_dim = 1;
  s.noise_dim = 1;
  s.names = {"theta"};
  s.drift = [=](double, const Vec& y, std::span<const double>, Vec& out) { out[0] = lambda * (mu - y[0]); };
  s.diffusion = [=](double, const Vec&, Mat& g) { g(0, 0) = sigma; };
  return s;
}

SdeSystem geometric(double a, double b) {
  SdeSystem s;
  s.state_dim = 1;
  s.noise_dim = 1;
  s.names = {"x"};
  s.drift = [=](double, const Vec& y, std::span<const double>, Vec& out) { out[0] = a * y[0]; };
  s.diffusion = [=](double, const Vec& y, Mat& g) { g(0, 0) = b * y[0]; };
  return s;
}

}  // namespace

TEST_CASE("time grid") {
  CHECK(TimeGrid{0.0, 1.0, 0.05}.steps() == 20);
  CHECK(TimeGrid{0.0, 200.0, 0.05}.steps() == 4000);
  CHECK(TimeGrid{2.0, 3.0, 0.25}.time_at(2) == doctest::Approx(2.5));
  CHECK_THROWS_AS(TimeGrid({0.0, 1.0, 0.0}).validate(), ConfigError);
  CHECK_THROWS_AS(TimeGrid({1.0, 1.0, 0.05}).validate(), ConfigError);
  CHECK_THROWS_AS(TimeGrid({0.0, 1.0, std::nan("")}).validate(), ConfigError);
  CHECK_NOTHROW(TimeGrid({0.0, 1.0, 0.05}).validate());
}

TEST_CASE("euler-heun single steps") {
  SUBCASE("deterministic mean reversion") {
    const auto s = scalar_ou(1.0, 1.0, 0.0);
    CHECK(euler_heun_step(s, 0.0, v1(0.0), 0.05, v1(0.0))[0] == doctest::Approx(0.05).epsilon(1e-15));
  }
  SUBCASE("zero drift and zero increment leave the state alone") {
    const auto s = scalar_ou(0.0, 0.0, 0.3);
    CHECK(euler_heun_step(s, 0.0, v1(0.7), 0.05, v1(0.0))[0] == 0.7);
  }
  SUBCASE("additive OU step") {
    const auto s = scalar_ou(1.0, 0.0, 0.3);
    CHECK(euler_heun_step(s, 0.0, v1(0.2), 0.05, v1(0.1))[0] == doctest::Approx(0.22).epsilon(1e-14));
  }
  SUBCASE("multiplicative noise uses the averaged diffusion") {
    // dX = X dW: y' = y + 0.5 (y + y (1 + dW)) dW = y (1 + dW + dW^2 / 2)
    const auto s = geometric(0.0, 1.0);
    const double dW = 0.3;
    CHECK(euler_heun_step(s, 0.0, v1(2.0), 0.05, v1(dW))[0] ==
          doctest::Approx(2.0 * (1.0 + dW + 0.5 * dW * dW)).epsilon(1e-15));
  }
  SUBCASE("size mismatch") {
    const auto s = scalar_ou(1.0, 0.0, 0.3);
    CHECK_THROWS_AS(euler_heun_step(s, 0.0, Vec::Zero(2), 0.05, v1(0.0)), DimensionError);
    CHECK_THROWS_AS(euler_heun_step(s, 0.0, v1(0.0), 0.05, Vec::Zero(3)), DimensionError);
  }
}

TEST_CASE("non-finite values name the component and the step") {
  SdeSystem s = scalar_ou(1.0, 0.0, 0.0);
  s.drift = [](double t, const Vec&, std::span<const double>, Vec& out) { out[0] = t > 0.2 ? NAN : 0.0; };
  WienerSource noise(1, 1);
  try {
    integrate(s, {0.0, 1.0, 0.05}, v1(0.0), noise);
    FAIL("expected an IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.component() == "theta");
    CHECK(e.step() == 5);
    CHECK(std::string(e.what()).find("theta") != std::string::npos);
  }
}

TEST_CASE("linear ODE matches its closed form within first-order error") {
  const auto s = scalar_ou(1.0, 0.0, 0.0);
  WienerSource noise(0, 1);
  const auto traj = integrate(s, {0.0, 1.0, 0.05}, v1(1.0), noise);
  REQUIRE(traj.size() == 21);
  CHECK(traj.times.back() == doctest::Approx(1.0));
  CHECK(std::abs(traj.states.back()[0] - std::exp(-1.0)) < 0.01);
  // Explicit Euler for this ODE is (1 - dt)^n exactly.
  CHECK(traj.states.back()[0] == doctest::Approx(std::pow(0.95, 20)).epsilon(1e-12));
}

TEST_CASE("recorder stride keeps the final state") {
  const auto s = scalar_ou(1.0, 0.0, 0.0);
  WienerSource noise(0, 1);
  std::vector<std::size_t> steps;
  Recorder rec;
  rec.stride = 7;
  rec.on_record = [&](const StepView& v) { steps.push_back(v.step); };
  const auto traj = integrate(s, {0.0, 1.0, 0.05}, v1(1.0), noise, rec);
  CHECK(steps == std::vector<std::size_t>{0, 7, 14, 20});
  CHECK(traj.size() == 4);
}

TEST_CASE("wiener increments") {
  SUBCASE("sample statistics") {
    const std::size_t n = 200000;
    const double dt = 0.05;
    WienerSource w(42, 1);
    double sum = 0.0, sq = 0.0;
    Vec dW(1);
    for (std::size_t i = 0; i < n; ++i) {
      w.increment(dt, dW);
      sum += dW[0];
      sq += dW[0] * dW[0];
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    CHECK(std::abs(mean) < 4.0 * std::sqrt(dt) / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - dt) < 0.05 * dt);
  }
  SUBCASE("same seed reproduces, different seeds differ") {
    WienerSource a(7, 3), b(7, 3), c(8, 3);
    for (int i = 0; i < 100; ++i) {
      const Vec x = a.increment(0.05);
      const Vec y = b.increment(0.05);
      CHECK(x == y);
      if (i == 0) CHECK(x != c.increment(0.05));
    }
  }
  SUBCASE("exogenous draws do not perturb the wiener stream") {
    WienerSource a(3, 2), b(3, 2);
    std::vector<double> junk(5);
    for (int i = 0; i < 20; ++i) {
      b.standard_normals(junk);
      CHECK(a.increment(0.05) == b.increment(0.05));
    }
  }
  SUBCASE("substreams are distinct") {
    CHECK(substream_seed(1, 0) != substream_seed(1, 1));
    CHECK(substream_seed(1, 0) != substream_seed(2, 0));
    CHECK(substream_seed(5, 3) == substream_seed(5, 3));
  }
}

TEST_CASE("weak convergence on the OU test problem") {
  // dX = -X dt + 0.3 dW, X0 = 1, T = 1. Coarse paths reuse summed fine increments.
  const std::size_t paths = 20000;
  const double T = 1.0;
  const double exact = std::exp(-1.0);
  const auto sys = scalar_ou(1.0, 0.0, 0.3);
  const std::vector<double> dts{0.1, 0.05, 0.025};
  std::vector<double> sums(dts.size(), 0.0);
  const std::size_t fine = static_cast<std::size_t>(std::llround(T / dts.back()));
  WienerSource w(2024, 1);
  std::vector<double> inc(fine);
  for (std::size_t p = 0; p < paths; ++p) {
    for (auto& d : inc) d = w.increment(dts.back())[0];
    for (std::size_t j = 0; j < dts.size(); ++j) {
      const std::size_t group = static_cast<std::size_t>(std::llround(dts[j] / dts.back()));
      Vec x = v1(1.0);
      for (std::size_t k = 0; k < fine; k += group) {
        const double dW = std::accumulate(inc.begin() + static_cast<std::ptrdiff_t>(k),
                                          inc.begin() + static_cast<std::ptrdiff_t>(k + group), 0.0);
        x = euler_heun_step(sys, static_cast<double>(k) * dts.back(), x, dts[j], v1(dW));
      }
      sums[j] += x[0];
    }
  }
  std::vector<double> err;
  for (double s : sums) err.push_back(std::abs(s / static_cast<double>(paths) - exact));
  CHECK(err[0] > err[1]);
  CHECK(err[1] > err[2]);
}

TEST_CASE("trajectory csv") {
  Trajectory t;
  t.times = {0.0, 0.5};
  t.states = {v1(1.0), v1(0.25)};
  t.names = {"x"};
  std::ostringstream os;
  write_trajectory_csv(os, t);
  CHECK(os.str() == "t,x\n0,1\n0.5,0.25\n");
}

TEST_CASE("hermite interpolation") {
  SampledSignal lin;
  lin.times = {0.0, 1.0, 2.0, 3.0};
  lin.values.resize(4, 1);
  lin.values << 0.0, 2.0, 4.0, 6.0;
  const HermiteInterpolator h(lin);

  SUBCASE("linear data is reproduced") {
    CHECK(h(0.5)[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(h(2.25)[0] == doctest::Approx(4.5).epsilon(1e-14));
  }
  SUBCASE("knots are exact") {
    SampledSignal s;
    s.times = {0.0, 0.7, 1.1, 2.5, 4.0};
    s.values.resize(5, 2);
    s.values << 0.3, -1.0, 1.7, 2.0, -0.4, 0.5, 2.2, 2.2, 9.0, -3.0;
    const HermiteInterpolator g(s);
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      CHECK(g(s.times[i]) == s.values.row(static_cast<Eigen::Index>(i)).transpose());
    }
  }
  SUBCASE("continuous across knots") {
    SampledSignal s;
    s.times = {0.0, 1.0, 2.0, 3.0};
    s.values.resize(4, 1);
    s.values << 0.0, 1.0, -2.0, 0.5;
    const HermiteInterpolator g(s);
    for (double knot : {1.0, 2.0}) {
      CHECK(g(knot - 1e-9)[0] == doctest::Approx(g(knot)[0]).epsilon(1e-6));
      CHECK(g(knot + 1e-9)[0] == doctest::Approx(g(knot)[0]).epsilon(1e-6));
    }
  }
  SUBCASE("outside the sampled range") {
    CHECK_THROWS_AS(h(-0.1), OutOfRangeError);
    CHECK_THROWS_AS(h(3.1), OutOfRangeError);
    CHECK(h(3.0)[0] == 6.0);
  }
  SUBCASE("invalid signals") {
    SampledSignal one;
    one.times = {0.0};
    one.values = Mat::Zero(1, 1);
    CHECK_THROWS_AS(HermiteInterpolator{one}, DataError);
    SampledSignal unsorted = lin;
    unsorted.times = {0.0, 2.0, 1.0, 3.0};
    CHECK_THROWS_AS(HermiteInterpolator{unsorted}, DataError);
    SampledSignal nonfinite = lin;
    nonfinite.values(2, 0) = NAN;
    CHECK_THROWS_AS(HermiteInterpolator{nonfinite}, DataError);
  }
}
