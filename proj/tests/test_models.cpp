#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "oua/error.hpp"
#include "oua/models.hpp"

using namespace oua;

namespace {

// Root of z - tanh(a z + b) on [-2, 2]; unique for a < 1.
double bisect_equilibrium(double a, double b) {
  double lo = -2.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid - std::tanh(a * mid + b) > 0.0) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("scalar tanh model") {
  CHECK(tanh_scalar(0.0, 3.7) == 0.0);
  CHECK(tanh_scalar(1.0, 0.0) == 0.0);
  CHECK(tanh_scalar(1.0, 0.5) == doctest::Approx(0.46211715726000974).epsilon(1e-15));
}

TEST_CASE("multi-parameter tanh model") {
  const std::vector<double> star{0.3, 1.1, 0.0, -0.3, -1.5, -0.4};
  const std::vector<double> e2{0, 1, 0, 0, 0, 0};
  CHECK(tanh_multi(star, e2) == doctest::Approx(0.80049902176062971).epsilon(1e-15));
  CHECK(tanh_multi(std::vector<double>(6, 0.0), e2) == 0.0);
  CHECK(tanh_multi(std::vector<double>{1.0, 1.0}, std::vector<double>{2.0, -2.0}) == 0.0);
  CHECK_THROWS_AS(tanh_multi(star, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("linear model") {
  CHECK(linear(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(linear(std::vector<double>{1, 0}, std::vector<double>{3.2, 9.0}) == 3.2);
  CHECK(linear(std::vector<double>{0.5, -0.5}, std::vector<double>{2, 2}) == 0.0);
  CHECK_THROWS_AS(linear(std::vector<double>{1, 0}, std::vector<double>{1}), DimensionError);
}

TEST_CASE("ctrnn unit") {
  const std::vector<double> star{0.3, 0.7, 1.0};
  SUBCASE("origin is a fixed point") {
    const auto e = ctrnn(star, 0.0, 0.0);
    CHECK(e.dz == 0.0);
    CHECK(e.y == 0.0);
  }
  SUBCASE("input drive") {
    const auto e = ctrnn(star, 1.0, 0.0);
    CHECK(e.dz == doctest::Approx(std::tanh(0.7)).epsilon(1e-15));
    CHECK(e.y == 0.0);
  }
  SUBCASE("equilibria found by bisection have zero drift") {
    for (double x : {-1.0, -0.3, 0.0, 0.6, 1.0}) {
      const double z = bisect_equilibrium(star[0], star[1] * x);
      const auto e = ctrnn(star, x, z);
      CHECK(std::abs(e.dz) < 1e-12);
      CHECK(e.y == doctest::Approx(z).epsilon(1e-15));
    }
  }
  SUBCASE("logistic nonlinearity") {
    const auto e = ctrnn(star, 1.0, 0.0, Nonlinearity::Logistic);
    CHECK(e.dz == doctest::Approx(1.0 / (1.0 + std::exp(-0.7))).epsilon(1e-15));
  }
  SUBCASE("wrong parameter count") {
    CHECK_THROWS_AS(ctrnn(std::vector<double>{1.0, 2.0}, 0.0, 0.0), DimensionError);
  }
}

TEST_CASE("nonlinearity names") {
  CHECK(parse_nonlinearity("tanh") == Nonlinearity::Tanh);
  CHECK(parse_nonlinearity("logistic") == Nonlinearity::Logistic);
  CHECK(to_string(Nonlinearity::Logistic) == "logistic");
  CHECK_THROWS_AS(parse_nonlinearity("relu"), ConfigError);
}

TEST_CASE("model invariants on random inputs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const double th = n(rng), x = n(rng);
    const double y = tanh_scalar(th, x);
    CHECK(std::abs(y) <= 1.0);
    CHECK(tanh_scalar(th, -x) == -y);

    std::vector<double> t6(6), x6(6), neg(6);
    for (std::size_t i = 0; i < 6; ++i) {
      t6[i] = n(rng);
      x6[i] = n(rng);
      neg[i] = -x6[i];
    }
    CHECK(tanh_multi(t6, neg) == -tanh_multi(t6, x6));
    const double a = 4.0;
    std::vector<double> scaled = t6;
    for (auto& v : scaled) v *= a;
    CHECK(linear(scaled, x6) == doctest::Approx(a * linear(t6, x6)).epsilon(1e-15));
  }
  // Strictly inside (-1, 1) wherever tanh does not round to +-1.
  CHECK(std::abs(tanh_scalar(1.0, 5.0)) < 1.0);
}

TEST_CASE("model factories") {
  const Model s = make_tanh_scalar_model();
  CHECK(s.param_dim == 1);
  CHECK(s.latent_dim == 0);
  CHECK_NOTHROW(s.validate());
  const Model r = make_ctrnn_model();
  CHECK(r.param_dim == 3);
  CHECK(r.latent_dim == 1);
  CHECK_NOTHROW(r.validate());
  CHECK(make_tanh_multi_model(6).input_dim == 6);
  CHECK(make_linear_model(2).param_dim == 2);
  Model broken = make_ctrnn_model();
  broken.latent_drift = nullptr;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
}
