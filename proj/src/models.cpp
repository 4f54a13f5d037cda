#include "oua/models.hpp"

#include <cmath>

#include "oua/error.hpp"

namespace oua {

namespace {

double dot(ConstSpan a, ConstSpan b, const char* who) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(who) + ": parameter vector has " + std::to_string(a.size()) +
                         " entries but input has " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double apply(Nonlinearity f, double v) {
  switch (f) {
    case Nonlinearity::Tanh:
      return std::tanh(v);
    case Nonlinearity::Logistic:
      return 1.0 / (1.0 + std::exp(-v));
  }
  return std::tanh(v);
}

Nonlinearity parse_nonlinearity(const std::string& name) {
  if (name == "tanh") return Nonlinearity::Tanh;
  if (name == "logistic" || name == "sigmoid") return Nonlinearity::Logistic;
  throw ConfigError("nonlinearity must be one of tanh, logistic (got '" + name + "')");
}

std::string to_string(Nonlinearity f) {
  return f == Nonlinearity::Tanh ? "tanh" : "logistic";
}

void Model::validate() const {
  std::vector<std::string> problems;
  if (!output) problems.push_back("model '" + name + "' has no output function");
  if (param_dim == 0) problems.push_back("model '" + name + "' has no parameters");
  if ((latent_dim > 0) != static_cast<bool>(latent_drift)) {
    problems.push_back("model '" + name + "' must provide a latent drift iff latent_dim > 0");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

double tanh_scalar(double theta, double x) { return std::tanh(theta * x); }

double tanh_multi(ConstSpan theta, ConstSpan x) { return std::tanh(dot(theta, x, "tanh_multi")); }

double linear(ConstSpan theta, ConstSpan x) { return dot(theta, x, "linear"); }

CtrnnEval ctrnn(ConstSpan theta, double x, double z, Nonlinearity f) {
  if (theta.size() != 3) {
    throw DimensionError("ctrnn expects 3 parameters, got " + std::to_string(theta.size()));
  }
  return {apply(f, theta[0] * z + theta[1] * x) - z, theta[2] * z};
}

Model make_tanh_scalar_model() {
  Model m;
  m.name = "tanh_scalar";
  m.param_dim = 1;
  m.input_dim = 1;
  m.output = [](ConstSpan theta, ConstSpan x, ConstSpan) { return tanh_scalar(theta[0], x[0]); };
  return m;
}

Model make_tanh_multi_model(std::size_t n) {
  Model m;
  m.name = "tanh_multi";
  m.param_dim = n;
  m.input_dim = n;
  m.output = [](ConstSpan theta, ConstSpan x, ConstSpan) { return tanh_multi(theta, x); };
  return m;
}

Model make_linear_model(std::size_t n) {
  Model m;
  m.name = "linear";
  m.param_dim = n;
  m.input_dim = n;
  m.output = [](ConstSpan theta, ConstSpan x, ConstSpan) { return linear(theta, x); };
  return m;
}

Model make_ctrnn_model(Nonlinearity f) {
  Model m;
  m.name = "ctrnn";
  m.param_dim = 3;
  m.input_dim = 1;
  m.latent_dim = 1;
  m.output = [](ConstSpan theta, ConstSpan, ConstSpan z) { return theta[2] * z[0]; };
  m.latent_drift = [f](ConstSpan theta, ConstSpan x, ConstSpan z, MutSpan dz) {
    dz[0] = ctrnn(theta, x[0], z[0], f).dz;
  };
  return m;
}

}  // namespace oua
