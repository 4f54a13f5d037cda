#include "oua/harness.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>

#include "oua/error.hpp"
#include "oua/weather.hpp"

namespace oua {

namespace {

// Substream used for random initial parameters; Wiener/exo noise use 0 and 1.
constexpr std::uint64_t kInitSubstream = 3;

bool is_supervised(Task task) {
  return task == Task::Single || task == Task::Recurrent || task == Task::Multi || task == Task::Meta;
}

Model make_model(const ExperimentConfig& c) {
  switch (c.task) {
    case Task::Single:
    case Task::Meta:
      return make_tanh_scalar_model();
    case Task::Recurrent:
      return make_ctrnn_model(c.nonlinearity);
    case Task::Multi:
      return make_tanh_multi_model(c.param_dim());
    case Task::Weather:
      return make_linear_model(kWeatherFeatures);
    case Task::Sdi:
      return make_linear_model(2);
  }
  throw ConfigError("unknown task");
}

ExperimentConfig normalized(ExperimentConfig c) {
  const std::size_t n = c.param_dim();
  if (c.hp.sigma.size() == 1 && n > 1) c.hp.sigma.assign(n, c.hp.sigma.front());
  if (c.initial.theta0.empty()) c.initial.theta0.assign(n, 0.0);
  if (c.task == Task::Meta) c.meta.enabled = true;
  return c;
}

std::shared_ptr<const HermiteInterpolator> interpolate_rows(const Mat& values, double spacing) {
  SampledSignal s;
  s.times.resize(static_cast<std::size_t>(values.rows()));
  for (std::size_t i = 0; i < s.times.size(); ++i) s.times[i] = static_cast<double>(i) * spacing;
  s.values = values;
  return std::make_shared<const HermiteInterpolator>(std::move(s));
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::Single:
      return "single";
    case Task::Recurrent:
      return "recurrent";
    case Task::Multi:
      return "multi";
    case Task::Weather:
      return "weather";
    case Task::Sdi:
      return "sdi";
    case Task::Meta:
      return "meta";
  }
  return "unknown";
}

Task parse_task(const std::string& name) {
  for (Task t : {Task::Single, Task::Recurrent, Task::Multi, Task::Weather, Task::Sdi, Task::Meta}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown task '" + name + "' (expected single, recurrent, multi, weather, sdi or meta)");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Learn:
      return "learn";
    case RunMode::FrozenInitial:
      return "frozen_initial";
    case RunMode::FrozenMean:
      return "frozen_mean";
  }
  return "unknown";
}

std::size_t ExperimentConfig::param_dim() const {
  switch (task) {
    case Task::Single:
    case Task::Meta:
      return 1;
    case Task::Recurrent:
      return 3;
    case Task::Multi:
      return target.theta_star.empty() ? 6 : target.theta_star.size();
    case Task::Weather:
      return kWeatherFeatures;
    case Task::Sdi:
      return 2;
  }
  return 0;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  auto collect = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
  };
  const ExperimentConfig c = normalized(*this);
  const std::size_t n = c.param_dim();

  collect([&] { c.grid.validate(); });
  collect([&] { c.hp.validate(n); });
  if (record_stride == 0) problems.emplace_back("record_stride must be >= 1");
  if (seeds.empty()) problems.emplace_back("seeds must not be empty");
  if (c.initial.theta0.size() != n) {
    problems.push_back("theta0 must have " + std::to_string(n) + " entries");
  }
  if (!c.initial.mu0.empty() && c.initial.mu0.size() != n) {
    problems.push_back("mu0 must have " + std::to_string(n) + " entries");
  }
  if (!std::isfinite(initial.rbar0)) problems.emplace_back("rbar0 must be finite");
  if (!(theta0_std >= 0.0)) problems.emplace_back("theta0_std must be >= 0");
  if (is_supervised(task)) {
    if (target.theta_star.size() != n) {
      problems.push_back("theta_star must have " + std::to_string(n) + " entries");
    }
    if (target.switch_time && !target.theta_star_after.empty() && target.theta_star_after.size() != n) {
      problems.push_back("theta_star_after must have " + std::to_string(n) + " entries");
    }
    if (target.switch_time && target.theta_star_after.empty()) {
      problems.emplace_back("switch_time requires theta_star_after");
    }
  }
  if (c.meta.enabled) {
    for (auto [name, v] : {std::pair{"lambda_sigma", meta.lambda_sigma}, std::pair{"eta_sigma", meta.eta_sigma},
                           std::pair{"meta_diffusion", meta.meta_diffusion},
                           std::pair{"sigma_floor", meta.sigma_floor}}) {
      if (!std::isfinite(v) || v < 0.0) problems.push_back(std::string(name) + " must be >= 0");
    }
    if (!std::isfinite(meta.sigma0) || !std::isfinite(meta.mu_sigma0)) {
      problems.emplace_back("sigma0 and mu_sigma0 must be finite");
    }
  }
  if (task == Task::Sdi) {
    if (!(sdi.gamma >= 0.0)) problems.emplace_back("gamma must be >= 0");
    if (!(sdi.alpha >= 0.0)) problems.emplace_back("alpha must be >= 0");
    if (!(sdi.beta >= 0.0)) problems.emplace_back("beta must be >= 0");
    if (sdi_s0.size() != 2) problems.emplace_back("s0 must have 2 entries");
  }
  if (task == Task::Weather) {
    if (!(weather.train_fraction > 0.0 && weather.train_fraction < 1.0)) {
      problems.emplace_back("train_fraction must be in (0, 1)");
    }
    if (!(weather.hours_per_unit > 0.0)) problems.emplace_back("hours_per_unit must be > 0");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

const std::vector<double>& RunRecord::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return columns[i];
  }
  throw ConfigError("run record has no column '" + name + "'");
}

bool RunRecord::has_column(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<const std::vector<double>*> RunRecord::block(const std::string& prefix) const {
  std::vector<const std::vector<double>*> out;
  for (std::size_t i = 0;; ++i) {
    const std::string name = prefix + "_" + std::to_string(i);
    if (!has_column(name)) break;
    out.push_back(&column(name));
  }
  return out;
}

Experiment::Experiment(ExperimentConfig config) : Experiment(std::move(config), nullptr) {}

Experiment::Experiment(ExperimentConfig config, std::shared_ptr<const WeatherData> weather)
    : config_(normalized(std::move(config))), weather_(std::move(weather)) {
  if (config_.task == Task::Weather) {
    if (!weather_) {
      weather_ = std::make_shared<const WeatherData>(prepare_weather(
          config_.weather.path, config_.weather.train_fraction, config_.weather.zca, config_.weather.max_train_rows));
    }
    // The horizon spans the training rows.
    config_.grid.t0 = 0.0;
    config_.grid.t_end = static_cast<double>(weather_->train_X.rows() - 1) * config_.weather.hours_per_unit;
  }
  config_.validate();
  model_ = make_model(config_);
}

Environment Experiment::make_environment() const {
  const auto& c = config_;
  switch (c.task) {
    case Task::Single:
    case Task::Recurrent:
    case Task::Multi:
    case Task::Meta: {
      std::optional<TargetSwitch> change;
      if (c.target.switch_time) {
        const double when =
            *c.target.switch_time < 0.0 ? 0.5 * (c.grid.t0 + c.grid.t_end) : *c.target.switch_time;
        change = TargetSwitch{when, c.target.theta_star_after};
      }
      return supervised_task(model_, c.target.theta_star, c.grid, change, c.initial.z0);
    }
    case Task::Weather: {
      const Eigen::Map<const Vec> y(weather_->train_y.data(), static_cast<Eigen::Index>(weather_->train_y.size()));
      return sampled_regression_task(interpolate_rows(weather_->train_X, c.weather.hours_per_unit),
                                     interpolate_rows(Mat(y), c.weather.hours_per_unit));
    }
    case Task::Sdi:
      return sdi_task(c.sdi, SdiState{c.sdi_s0[0], c.sdi_s0[1]});
  }
  throw ConfigError("unknown task");
}

std::vector<double> Experiment::theta0(std::uint64_t seed) const {
  std::vector<double> theta = config_.initial.theta0;
  if (config_.theta0_std > 0.0) {
    WienerSource init(seed, 0, kInitSubstream);
    std::vector<double> draws(theta.size());
    init.standard_normals(draws);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = config_.theta0_std * draws[i];
  }
  return theta;
}

RunRecord Experiment::run(std::uint64_t seed, RunMode mode, const std::optional<Vec>& theta_fixed) const {
  const auto started = std::chrono::steady_clock::now();
  const auto& c = config_;
  const std::size_t n = c.param_dim();

  Hyperparams hp = c.hp;
  std::optional<MetaState> meta;
  InitialConditions ic = c.initial;
  ic.theta0 = theta0(seed);
  if (c.theta0_std > 0.0 && c.initial.mu0.empty()) ic.mu0 = ic.theta0;

  switch (mode) {
    case RunMode::Learn:
      if (c.meta.enabled) {
        meta = MetaState{c.meta.sigma0,    c.meta.mu_sigma0,      c.meta.lambda_sigma,
                         c.meta.eta_sigma, c.meta.meta_diffusion, c.meta.sigma_floor};
      }
      break;
    case RunMode::FrozenMean:
      if (!theta_fixed || static_cast<std::size_t>(theta_fixed->size()) != n) {
        throw ConfigError("frozen-mean run needs " + std::to_string(n) + " fixed parameters");
      }
      ic.theta0.assign(theta_fixed->data(), theta_fixed->data() + n);
      [[fallthrough]];
    case RunMode::FrozenInitial:
      hp.lambda = 0.0;
      hp.eta = 0.0;
      hp.sigma.assign(n, 0.0);
      ic.mu0 = ic.theta0;
      break;
  }

  Environment env = make_environment();
  const LearnerSystem sys = learner_as_sde(model_, env, hp, meta, LearnerOptions{c.zero_rpe});
  const StateLayout& l = sys.layout();

  RunRecord rec;
  rec.task = to_string(c.task);
  rec.mode = mode;
  rec.seed = seed;
  rec.names.emplace_back("t");
  for (std::size_t i = 0; i < n; ++i) rec.names.push_back("theta_" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) rec.names.push_back("mu_" + std::to_string(i));
  for (const char* name : {"rbar", "delta_r", "r", "G", "y", "y_star"}) rec.names.emplace_back(name);
  if (l.meta) {
    rec.names.emplace_back("sigma");
    rec.names.emplace_back("mu_sigma");
  }
  for (std::size_t i = 0; i < l.latent_dim; ++i) rec.names.push_back("z_" + std::to_string(i));
  for (std::size_t i = 0; i < l.plant_dim; ++i) rec.names.push_back("s_" + std::to_string(i));
  rec.columns.resize(rec.names.size());
  const std::size_t expected = c.grid.steps() / std::max<std::size_t>(1, c.record_stride) + 2;
  for (auto& col : rec.columns) col.reserve(expected);

  Recorder recorder;
  recorder.stride = c.record_stride;
  recorder.keep_states = false;
  Vec last_state;
  recorder.on_record = [&](const StepView& v) {
    const Observation obs = sys.observe(v.t, v.state, v.exo);
    std::size_t k = 0;
    rec.columns[k++].push_back(v.t);
    for (std::size_t i = 0; i < n; ++i) rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.theta + i)]);
    for (std::size_t i = 0; i < n; ++i) rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.mu + i)]);
    rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.rbar)]);
    rec.columns[k++].push_back(obs.delta_r);
    rec.columns[k++].push_back(obs.r);
    rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.G)]);
    rec.columns[k++].push_back(obs.y);
    rec.columns[k++].push_back(obs.y_star);
    if (l.meta) {
      rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.sigma)]);
      rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.mu_sigma)]);
    }
    for (std::size_t i = 0; i < l.latent_dim; ++i) rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.latent + i)]);
    for (std::size_t i = 0; i < l.plant_dim; ++i) rec.columns[k++].push_back(v.state[static_cast<Eigen::Index>(l.plant + i)]);
    last_state = v.state;
  };

  WienerSource noise(seed, l.noise_dim);
  integrate(sys.sde(), c.grid, sys.initial_state(ic), noise, recorder);

  const LearnerState final = sys.learner_state(last_state);
  rec.G_T = final.G;
  rec.mu_T = final.mu;
  rec.theta_T = final.theta;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

std::vector<RunRecord> run_seeds(const Experiment& experiment, RunMode mode) {
  const auto& seeds = experiment.config().seeds;
  return parallel_map<RunRecord>(seeds.size(), experiment.config().threads,
                                 [&](std::size_t i) { return experiment.run(seeds[i], mode); });
}

bool is_sweepable(const std::string& param) {
  return param == "lambda" || param == "sigma" || param == "rho" || param == "eta";
}

ExperimentConfig with_param(ExperimentConfig config, const std::string& param, double value) {
  if (param == "lambda") {
    config.hp.lambda = value;
  } else if (param == "eta") {
    config.hp.eta = value;
  } else if (param == "rho") {
    config.hp.rho = value;
  } else if (param == "sigma") {
    const std::size_t n = std::max<std::size_t>(1, config.hp.sigma.size());
    config.hp.sigma.assign(n, value);
  } else {
    throw ConfigError("cannot sweep '" + param + "' (expected lambda, sigma, rho or eta)");
  }
  return config;
}

SweepResult sweep(const ExperimentConfig& config, const std::string& param, const std::vector<double>& values,
                  std::shared_ptr<const WeatherData> weather) {
  if (!is_sweepable(param)) with_param(config, param, 0.0);
  if (values.empty()) throw ConfigError("sweep needs at least one value");

  std::vector<Experiment> experiments;
  experiments.reserve(values.size() + 1);
  for (double v : values) experiments.emplace_back(with_param(config, param, v), weather);
  const Experiment base(config, weather);

  const auto& seeds = config.seeds;
  const std::size_t per = seeds.size();
  const std::size_t jobs = (values.size() + 1) * per;
  const auto results = parallel_map<double>(jobs, config.threads, [&](std::size_t job) {
    const std::size_t which = job / per;
    const std::uint64_t seed = seeds[job % per];
    if (which == values.size()) return base.run(seed, RunMode::FrozenInitial).G_T;
    return experiments[which].run(seed).G_T;
  });

  SweepResult out;
  out.param = param;
  out.seeds = seeds;
  for (std::size_t v = 0; v < values.size(); ++v) {
    SweepPoint p;
    p.value = values[v];
    p.G_T.assign(results.begin() + static_cast<std::ptrdiff_t>(v * per),
                 results.begin() + static_cast<std::ptrdiff_t>((v + 1) * per));
    p.mean = std::accumulate(p.G_T.begin(), p.G_T.end(), 0.0) / static_cast<double>(per);
    const auto [lo, hi] = std::minmax_element(p.G_T.begin(), p.G_T.end());
    p.min = *lo;
    p.max = *hi;
    out.points.push_back(std::move(p));
  }
  out.reference = std::accumulate(results.end() - static_cast<std::ptrdiff_t>(per), results.end(), 0.0) /
                  static_cast<double>(per);
  return out;
}

std::vector<double> log_grid(double centre, std::size_t count, double decades) {
  if (!(centre > 0.0)) throw ConfigError("log grid centre must be > 0");
  if (count == 0) throw ConfigError("log grid needs at least one value");
  if (count == 1) return {centre};
  std::vector<double> out(count);
  const double lo = std::log10(centre) - decades / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::pow(10.0, lo + decades * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("pearson: series lengths differ");
  if (a.size() < 2) throw DimensionError("pearson: need at least 2 samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DomainError("pearson: a series has zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("mse: series lengths differ");
  if (a.empty()) throw DimensionError("mse: empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

WeatherScore score_weather(const WeatherData& data, const Vec& theta) {
  if (theta.size() != data.test_X.cols()) throw DimensionError("weather score: parameter count does not match features");
  const Vec pred = data.test_X * theta;
  WeatherScore out;
  out.predictions.assign(pred.data(), pred.data() + pred.size());
  out.mse = mse(out.predictions, data.test_y);
  try {
    out.pearson = pearson(out.predictions, data.test_y);
  } catch (const DomainError&) {
    out.pearson = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double window_mean(const std::vector<double>& column, double from, double to) {
  const auto n = column.size();
  auto lo = static_cast<std::size_t>(std::floor(from * static_cast<double>(n)));
  auto hi = static_cast<std::size_t>(std::floor(to * static_cast<double>(n)));
  hi = std::min(hi, n);
  if (hi <= lo) throw DimensionError("empty window");
  return std::accumulate(column.begin() + static_cast<std::ptrdiff_t>(lo), column.begin() + static_cast<std::ptrdiff_t>(hi),
                         0.0) /
         static_cast<double>(hi - lo);
}

double final_rate(const RunRecord& record, const std::string& column, double from) {
  const auto& t = record.column("t");
  const auto& g = record.column(column);
  const auto start = std::min(t.size() - 1, static_cast<std::size_t>(std::floor(from * static_cast<double>(t.size() - 1))));
  const double span = t.back() - t[start];
  if (!(span > 0.0)) throw DimensionError("final_rate: empty window");
  return (g.back() - g[start]) / span;
}

}  // namespace oua
