#pragma once

// Inference models y = g_theta(x, z) with optional latent drift dz/dt = f_theta(x, z).
// Every model in this library has a scalar output.

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace oua {

using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

enum class Nonlinearity { Tanh, Logistic };

double apply(Nonlinearity f, double v);
Nonlinearity parse_nonlinearity(const std::string& name);
std::string to_string(Nonlinearity f);

struct Model {
  using Output = std::function<double(ConstSpan theta, ConstSpan x, ConstSpan z)>;
  using LatentDrift = std::function<void(ConstSpan theta, ConstSpan x, ConstSpan z, MutSpan dz)>;

  std::string name;
  std::size_t param_dim = 0;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  Output output;
  /// Present iff latent_dim > 0.
  LatentDrift latent_drift;

  /// Throws ConfigError if the declared shape and callbacks disagree.
  void validate() const;
};

double tanh_scalar(double theta, double x);
/// tanh(theta . x); throws DimensionError if the sizes differ.
double tanh_multi(ConstSpan theta, ConstSpan x);
/// theta . x; throws DimensionError if the sizes differ.
double linear(ConstSpan theta, ConstSpan x);

struct CtrnnEval {
  double dz;
  double y;
};

/// Scalar continuous-time recurrent unit with parameters (recurrent weight,
/// input weight, readout):  dz/dt = f(w_rec z + w_in x) - z,  y = w_out z.
CtrnnEval ctrnn(ConstSpan theta, double x, double z, Nonlinearity f = Nonlinearity::Tanh);

Model make_tanh_scalar_model();
Model make_tanh_multi_model(std::size_t n);
Model make_linear_model(std::size_t n);
Model make_ctrnn_model(Nonlinearity f = Nonlinearity::Tanh);

}  // namespace oua
