#include "oua/sde.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <utility>

namespace oua {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Checks a vector/matrix for non-finite entries and reports the first row.
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const SdeSystem& system, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw IntegrationError(std::string("non-finite ") + what,
                               system.component_name(static_cast<std::size_t>(i)));
      }
    }
  }
}

}  // namespace

void TimeGrid::validate() const {
  std::vector<std::string> problems;
  if (!(dt > 0.0) || !std::isfinite(dt)) problems.emplace_back("dt must be > 0");
  if (!(t_end > t0)) problems.emplace_back("t_end must be > t0");
  if (problems.empty()) {
    const double n = std::round((t_end - t0) / dt);
    if (!std::isfinite(n) || n < 1.0) problems.emplace_back("grid must contain at least one step");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::size_t TimeGrid::steps() const {
  return static_cast<std::size_t>(std::llround((t_end - t0) / dt));
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t substream) {
  return splitmix64(seed ^ splitmix64(substream));
}

WienerSource::WienerSource(std::uint64_t seed, std::size_t dim, std::uint64_t substream)
    : seed_(seed),
      dim_(dim),
      wiener_engine_(substream_seed(seed, 2 * substream)),
      exo_engine_(substream_seed(seed, 2 * substream + 1)) {}

void WienerSource::increment(double dt, Vec& dW) {
  dW.resize(static_cast<Eigen::Index>(dim_));
  const double scale = std::sqrt(dt);
  for (Eigen::Index i = 0; i < dW.size(); ++i) dW[i] = scale * normal_(wiener_engine_);
}

Vec WienerSource::increment(double dt) {
  Vec dW;
  increment(dt, dW);
  return dW;
}

void WienerSource::standard_normals(std::span<double> out) {
  for (double& v : out) v = exo_normal_(exo_engine_);
}

std::string SdeSystem::component_name(std::size_t i) const {
  if (i < names.size()) return names[i];
  return "x" + std::to_string(i);
}

void euler_heun_step(const SdeSystem& system, double t, const Vec& state, double dt, const Vec& dW,
                     std::span<const double> exo, StepWorkspace& ws, Vec& out) {
  const auto n = static_cast<Eigen::Index>(system.state_dim);
  const auto m = static_cast<Eigen::Index>(system.noise_dim);
  if (state.size() != n) {
    throw DimensionError("state has " + std::to_string(state.size()) + " entries, expected " + std::to_string(n));
  }
  if (dW.size() != m) {
    throw DimensionError("Wiener increment has " + std::to_string(dW.size()) + " entries, expected " +
                         std::to_string(m));
  }

  ws.drift.resize(n);
  system.drift(t, state, exo, ws.drift);
  require_finite(ws.drift, system, "drift");

  if (m == 0) {
    out = state + ws.drift * dt;
    require_finite(out, system, "state");
    return;
  }

  ws.g0.resize(n, m);
  system.diffusion(t, state, ws.g0);
  require_finite(ws.g0, system, "diffusion");

  ws.noise_term.noalias() = ws.g0 * dW;
  ws.predictor = state + ws.drift * dt + ws.noise_term;

  ws.g1.resize(n, m);
  system.diffusion(t, ws.predictor, ws.g1);
  require_finite(ws.g1, system, "diffusion");

  ws.noise_term.noalias() = 0.5 * (ws.g0 + ws.g1) * dW;
  out = state + ws.drift * dt + ws.noise_term;
  require_finite(out, system, "state");
}

Vec euler_heun_step(const SdeSystem& system, double t, const Vec& state, double dt, const Vec& dW,
                    std::span<const double> exo) {
  StepWorkspace ws;
  Vec out;
  euler_heun_step(system, t, state, dt, dW, exo, ws, out);
  return out;
}

Trajectory integrate(const SdeSystem& system, const TimeGrid& grid, const Vec& initial_state,
                     WienerSource& noise, const Recorder& recorder) {
  grid.validate();
  if (noise.dim() != system.noise_dim) {
    throw ConfigError("noise source has dimension " + std::to_string(noise.dim()) +
                      " but the system expects " + std::to_string(system.noise_dim));
  }
  const std::size_t stride = std::max<std::size_t>(1, recorder.stride);
  const std::size_t steps = grid.steps();

  Trajectory traj;
  traj.names = system.names;
  const std::size_t expected = steps / stride + 2;
  traj.times.reserve(expected);
  if (recorder.keep_states) traj.states.reserve(expected);

  StepWorkspace ws;
  Vec state = initial_state;
  Vec next(state.size());
  Vec dW(static_cast<Eigen::Index>(system.noise_dim));
  std::vector<double> exo(system.exo_dim);

  auto record = [&](std::size_t k, double t) {
    traj.times.push_back(t);
    if (recorder.keep_states) traj.states.push_back(state);
    if (recorder.on_record) recorder.on_record(StepView{k, t, state, exo});
  };

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = grid.time_at(k);
    noise.standard_normals(exo);
    noise.increment(grid.dt, dW);
    if (k % stride == 0) record(k, t);
    try {
      euler_heun_step(system, t, state, grid.dt, dW, exo, ws, next);
    } catch (const IntegrationError& e) {
      throw e.at_step(k);
    }
    std::swap(state, next);
  }
  // The final state has no step of its own; draw its exogenous noise from the
  // same stream so observables at T are well-defined.
  noise.standard_normals(exo);
  record(steps, grid.time_at(steps));
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
  const auto dim = trajectory.states.empty() ? std::size_t{0}
                                             : static_cast<std::size_t>(trajectory.states.front().size());
  os << "t";
  for (std::size_t i = 0; i < dim; ++i) {
    os << ',' << (i < trajectory.names.size() ? trajectory.names[i] : "x" + std::to_string(i));
  }
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    os << trajectory.times[k];
    for (Eigen::Index i = 0; i < trajectory.states[k].size(); ++i) os << ',' << trajectory.states[k][i];
    os << '\n';
  }
  os.precision(old_precision);
}

void SampledSignal::validate() const {
  if (times.size() < 2) throw DataError("sampled signal needs at least 2 samples");
  if (static_cast<std::size_t>(values.rows()) != times.size()) {
    throw DataError("sampled signal has " + std::to_string(times.size()) + " times but " +
                    std::to_string(values.rows()) + " value rows");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw DataError("sample times must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  if (!values.allFinite()) throw DataError("sampled signal contains non-finite values");
}

HermiteInterpolator::HermiteInterpolator(SampledSignal signal) : signal_(std::move(signal)) {
  signal_.validate();
  const auto n = static_cast<Eigen::Index>(signal_.times.size());
  slopes_.resize(n, signal_.values.cols());
  for (Eigen::Index i = 1; i < n; ++i) {
    const double h = signal_.times[i] - signal_.times[i - 1];
    slopes_.row(i) = (signal_.values.row(i) - signal_.values.row(i - 1)) / h;
  }
  slopes_.row(0) = slopes_.row(1);
}

void HermiteInterpolator::evaluate(double t, Vec& out) const {
  const auto& ts = signal_.times;
  if (!(t >= ts.front() && t <= ts.back())) {
    throw OutOfRangeError("interpolation time " + std::to_string(t) + " outside [" +
                          std::to_string(ts.front()) + ", " + std::to_string(ts.back()) + "]");
  }
  // Segment [ts[i], ts[i+1]] containing t.
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  auto i = static_cast<Eigen::Index>(std::distance(ts.begin(), it)) - 1;
  const auto last = static_cast<Eigen::Index>(ts.size()) - 1;
  if (i >= last) {
    out = signal_.values.row(last).transpose();
    return;
  }
  const double h = ts[i + 1] - ts[i];
  const double s = (t - ts[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  out = (h00 * signal_.values.row(i) + h10 * h * slopes_.row(i) + h01 * signal_.values.row(i + 1) +
         h11 * h * slopes_.row(i + 1))
            .transpose();
}

Vec HermiteInterpolator::operator()(double t) const {
  Vec out;
  evaluate(t, out);
  return out;
}

Vec hermite_interpolate(const SampledSignal& signal, double t) {
  return HermiteInterpolator(signal)(t);
}

}  // namespace oua
