// Command-line entry point: binds configs to experiments and writes results.
//
// Exit codes: 0 success, 1 configuration error, 2 data error,
// 3 numerical failure, 4 unexpected internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "oua/config.hpp"
#include "oua/error.hpp"
#include "oua/harness.hpp"
#include "oua/results.hpp"
#include "oua/weather.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using oua::ConfigError;
using oua::Settings;
using oua::Task;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 4;

struct CommonOptions {
  std::string config_path;
  std::string preset_name;
  std::vector<std::string> overrides;
  std::string seeds;
  std::string output_dir = "results";
  std::optional<std::size_t> threads;
  bool check = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "INI config file");
  cmd->add_option("-p,--preset", o.preset_name, "Built-in preset (fig2..fig8 or a task name)");
  cmd->add_option("-s,--set", o.overrides, "Override a config key: key=value (repeatable)");
  cmd->add_option("--seeds", o.seeds, "Seeds: N, A..B or a comma list");
  cmd->add_option("-o,--output-dir", o.output_dir, "Results directory")->capture_default_str();
  cmd->add_option("-j,--threads", o.threads, "Worker threads (0 = all cores)");
  cmd->add_flag("--check", o.check, "Validate and print the normalized config, then exit");
}

Settings resolve(const CommonOptions& o, const std::string& default_preset) {
  std::vector<std::string> defaults;
  if (const char* env = std::getenv("OUA_SEED"); env && *env) defaults.push_back(std::string("run.seeds=") + env);
  std::vector<std::string> overrides = o.overrides;
  if (!o.seeds.empty()) overrides.push_back("run.seeds=" + o.seeds);
  if (o.threads) overrides.push_back("run.threads=" + std::to_string(*o.threads));

  const std::string fallback = o.preset_name.empty() ? default_preset : o.preset_name;
  if (!o.config_path.empty()) return oua::load_settings(o.config_path, overrides, fallback, defaults);
  if (fallback.empty()) throw ConfigError("no configuration: pass --config FILE or --preset NAME");
  std::vector<std::string> layered = defaults;
  layered.insert(layered.end(), overrides.begin(), overrides.end());
  Settings base = oua::preset(fallback);
  return oua::apply_overrides(std::move(base), layered);
}

void require_task(const Settings& s, Task task, const std::string& command) {
  if (s.experiment.task != task) {
    throw ConfigError(command + " needs task '" + to_string(task) + "', config has '" +
                      to_string(s.experiment.task) + "'");
  }
}

/// Collects written files and the manifest for one invocation.
class Output {
 public:
  Output(const std::string& dir, std::string command, const Settings& settings)
      : dir_(dir), command_(std::move(command)), started_(oua::utc_now()) {
    fs::create_directories(dir_);
    manifest_["version"] = oua::version();
    manifest_["command"] = command_;
    manifest_["started"] = started_;
    manifest_["config"] = oua::to_json(settings);
    manifest_["config_ini"] = oua::to_ini(settings);
    manifest_["seeds"] = settings.experiment.seeds;
  }

  std::string path(const std::string& name) {
    files_.push_back(name);
    return (dir_ / name).string();
  }

  json& manifest() { return manifest_; }

  void finish(const std::string& status) {
    manifest_["finished"] = oua::utc_now();
    manifest_["status"] = status;
    manifest_["files"] = files_;
    oua::write_json((dir_ / "manifest.json").string(), manifest_);
  }

 private:
  fs::path dir_;
  std::string command_;
  std::string started_;
  json manifest_;
  std::vector<std::string> files_;
};

struct SeedOutcome {
  std::optional<oua::RunRecord> learn;
  std::optional<oua::RunRecord> baseline;
  std::optional<oua::RunRecord> frozen_mean;
  std::string failure;
};

double abs_window(const oua::RunRecord& r, double from, double to) {
  std::vector<double> a;
  for (double d : r.column("delta_r")) a.push_back(std::abs(d));
  return oua::window_mean(a, from, to);
}

std::map<std::string, double> metrics(const oua::RunRecord& r) {
  std::map<std::string, double> m;
  if (r.size() < 10) return m;
  m["G_rate_final_decile"] = oua::final_rate(r, "G");
  m["abs_delta_r_first_decile"] = abs_window(r, 0.0, 0.1);
  m["abs_delta_r_last_decile"] = abs_window(r, 0.9, 1.0);
  if (r.has_column("s_0")) {
    const auto& a = r.column("s_0");
    const auto& b = r.column("s_1");
    std::vector<double> norm(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) norm[i] = std::hypot(a[i], b[i]);
    m["norm_s_last_decile"] = oua::window_mean(norm, 0.9, 1.0);
  }
  if (r.has_column("sigma")) m["sigma_last_decile"] = oua::window_mean(r.column("sigma"), 0.9, 1.0);
  return m;
}

oua::SummaryRow failed_row(const std::string& label, std::uint64_t seed, const std::string& why) {
  oua::SummaryRow row;
  row.run = label;
  row.mode = oua::to_string(oua::RunMode::Learn);
  row.seed = seed;
  row.status = why;
  row.G_T = std::numeric_limits<double>::quiet_NaN();
  return row;
}

/// Learning run, frozen-theta0 baseline and frozen-mean evaluation per seed.
std::vector<SeedOutcome> run_all(const oua::Experiment& exp, bool frozen_mean) {
  const auto& seeds = exp.config().seeds;
  return oua::parallel_map<SeedOutcome>(seeds.size(), exp.config().threads, [&](std::size_t i) {
    SeedOutcome out;
    const std::uint64_t seed = seeds[i];
    out.baseline = exp.run(seed, oua::RunMode::FrozenInitial);
    try {
      out.learn = exp.run(seed);
    } catch (const oua::IntegrationError& e) {
      out.failure = e.what();
      return out;
    }
    if (frozen_mean) out.frozen_mean = exp.run(seed, oua::RunMode::FrozenMean, out.learn->mu_T);
    return out;
  });
}

struct Tally {
  std::vector<double> learn;
  std::vector<double> baseline;
  std::vector<std::string> failures;

  static double mean(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
};

Tally write_outcomes(Output& out, const std::string& label, const std::vector<SeedOutcome>& outcomes,
                     std::vector<oua::SummaryRow>& rows) {
  Tally tally;
  for (const auto& o : outcomes) {
    if (o.baseline) {
      oua::write_run_csv(out.path(oua::run_file_name(label + "_baseline", o.baseline->seed)), *o.baseline);
      auto row = oua::summarize(label + "_baseline", *o.baseline);
      row.metrics = metrics(*o.baseline);
      rows.push_back(std::move(row));
      tally.baseline.push_back(o.baseline->G_T);
    }
    if (o.learn) {
      oua::write_run_csv(out.path(oua::run_file_name(label, o.learn->seed)), *o.learn);
      auto row = oua::summarize(label, *o.learn);
      row.metrics = metrics(*o.learn);
      rows.push_back(std::move(row));
      tally.learn.push_back(o.learn->G_T);
    } else {
      rows.push_back(failed_row(label, o.baseline ? o.baseline->seed : 0, o.failure));
      tally.failures.push_back(o.failure);
    }
    if (o.frozen_mean) {
      oua::write_run_csv(out.path(oua::run_file_name(label + "_frozenmean", o.frozen_mean->seed)), *o.frozen_mean);
      auto row = oua::summarize(label + "_frozenmean", *o.frozen_mean);
      row.metrics = metrics(*o.frozen_mean);
      rows.push_back(std::move(row));
    }
  }
  return tally;
}

int report(const std::string& label, const Settings& s, const Tally& t) {
  std::cout << "task=" << label << " seeds=" << s.experiment.seeds.size()
            << " mean_G_T=" << Tally::mean(t.learn) << " baseline_G_T=" << Tally::mean(t.baseline)
            << " failed=" << t.failures.size() << "\n";
  for (const auto& f : t.failures) std::cerr << "error: " << label << ": " << f << "\n";
  return t.failures.empty() ? 0 : kExitNumerical;
}

int cmd_run(const CommonOptions& o, const std::string& command, const std::string& default_preset,
            std::optional<Task> required) {
  const Settings s = resolve(o, default_preset);
  if (required) require_task(s, *required, command);
  if (o.check) {
    std::cout << oua::to_ini(s);
    return 0;
  }
  const oua::Experiment exp(s.experiment);
  Output out(o.output_dir, command, s);
  const std::string label = to_string(s.experiment.task);
  const auto outcomes = run_all(exp, true);
  std::vector<oua::SummaryRow> rows;
  const Tally tally = write_outcomes(out, label, outcomes, rows);
  oua::write_summary_csv(out.path("summary.csv"), rows);
  out.finish(tally.failures.empty() ? "ok" : "numerical failure");
  return report(label, s, tally);
}

int cmd_meta(const CommonOptions& o) {
  const Settings s = resolve(o, "fig8");
  require_task(s, Task::Meta, "meta");
  if (o.check) {
    std::cout << oua::to_ini(s);
    return 0;
  }
  // Comparison run: same task with sigma held at sigma0.
  oua::ExperimentConfig fixed = s.experiment;
  fixed.task = Task::Single;
  fixed.meta.enabled = false;
  fixed.hp.sigma = {s.experiment.meta.sigma0};

  const oua::Experiment learnable(s.experiment);
  const oua::Experiment constant(fixed);
  Output out(o.output_dir, "meta", s);
  std::vector<oua::SummaryRow> rows;
  const Tally a = write_outcomes(out, "meta", run_all(learnable, false), rows);
  const Tally b = write_outcomes(out, "meta_fixed", run_all(constant, false), rows);
  oua::write_summary_csv(out.path("summary.csv"), rows);
  out.manifest()["fixed_sigma"] = s.experiment.meta.sigma0;
  const bool ok = a.failures.empty() && b.failures.empty();
  out.finish(ok ? "ok" : "numerical failure");
  const int rc = report("meta", s, a);
  const int rc_fixed = report("meta_fixed", s, b);
  return rc ? rc : rc_fixed;
}

int cmd_sweep(const CommonOptions& o, const std::vector<std::string>& params, const std::vector<double>& values) {
  Settings s = resolve(o, "fig3");
  if (!params.empty()) s.sweep.params = params;
  if (!values.empty()) s.sweep.values = values;
  oua::validate(s);
  if (o.check) {
    std::cout << oua::to_ini(s);
    return 0;
  }
  std::shared_ptr<const oua::WeatherData> weather;
  if (s.experiment.task == Task::Weather) {
    const auto& w = s.experiment.weather;
    weather = std::make_shared<const oua::WeatherData>(
        oua::prepare_weather(w.path, w.train_fraction, w.zca, w.max_train_rows));
  }
  Output out(o.output_dir, "sweep", s);
  std::vector<oua::SweepResult> results;
  for (const auto& param : s.sweep.params) {
    std::vector<double> grid = s.sweep.values;
    if (grid.empty()) {
      const auto& hp = s.experiment.hp;
      const double centre = param == "lambda" ? hp.lambda
                            : param == "eta"  ? hp.eta
                            : param == "rho"  ? hp.rho
                                              : hp.sigma.front();
      grid = oua::log_grid(centre, s.sweep.count, s.sweep.decades);
    }
    auto r = oua::sweep(s.experiment, param, grid, weather);
    oua::write_sweep_csv(out.path("sweep_" + param + ".csv"), r);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : r.points) best = std::max(best, p.mean);
    std::cout << "task=" << to_string(s.experiment.task) << " sweep=" << param
              << " seeds=" << s.experiment.seeds.size() << " points=" << r.points.size() << " best_mean_G_T=" << best
              << " reference_G_T=" << r.reference << "\n";
    results.push_back(std::move(r));
  }
  oua::write_sweep_summary_csv(out.path("summary.csv"), results);
  out.finish("ok");
  return 0;
}

int cmd_weather(const CommonOptions& o, const std::string& data_path) {
  CommonOptions opts = o;
  if (!data_path.empty()) opts.overrides.push_back("weather.path=" + data_path);
  const Settings s = resolve(opts, "fig6");
  require_task(s, Task::Weather, "weather");
  if (o.check) {
    std::cout << oua::to_ini(s);
    return 0;
  }
  const auto& w = s.experiment.weather;
  oua::LoadReport load;
  oua::CleaningReport cleaning;
  const oua::WeatherTable table = oua::load_clean_weather(w.path, &load, &cleaning);
  auto prepare = [&](bool zca) {
    auto d = oua::prepare_weather(table, w.train_fraction, zca, w.max_train_rows);
    d.load = load;
    d.cleaning = cleaning;
    return std::make_shared<const oua::WeatherData>(std::move(d));
  };
  const auto zca_data = prepare(true);
  const auto raw_data = prepare(false);

  oua::ExperimentConfig zca_cfg = s.experiment;
  zca_cfg.weather.zca = true;
  oua::ExperimentConfig raw_cfg = s.experiment;
  raw_cfg.weather.zca = false;
  const oua::Experiment zca_exp(zca_cfg, zca_data);
  const oua::Experiment raw_exp(raw_cfg, raw_data);

  Output out(o.output_dir, "weather", s);
  oua::write_weather_cache(o.output_dir, *zca_data);
  for (const char* f : {"weather_train.csv", "weather_test.csv", "weather_manifest.json"}) out.path(f);

  std::vector<oua::SummaryRow> rows;
  auto zca_out = run_all(zca_exp, true);
  auto raw_out = run_all(raw_exp, true);
  const Tally tz = write_outcomes(out, "weather_zca", zca_out, rows);
  const Tally tr = write_outcomes(out, "weather_raw", raw_out, rows);

  std::vector<double> pearson_zca, mse_zca, mse_raw;
  for (std::size_t i = 0; i < zca_out.size(); ++i) {
    const std::uint64_t seed = s.experiment.seeds[i];
    const auto theta0 = zca_exp.theta0(seed);
    const auto base = oua::score_weather(*zca_data, Eigen::Map<const oua::Vec>(theta0.data(), theta0.size()));
    std::optional<oua::WeatherScore> sz, sr;
    if (zca_out[i].learn) sz = oua::score_weather(*zca_data, zca_out[i].learn->mu_T);
    if (raw_out[i].learn) sr = oua::score_weather(*raw_data, raw_out[i].learn->mu_T);

    std::ofstream pred(out.path("predictions_" + std::to_string(seed) + ".csv"));
    pred << std::setprecision(17) << "y_true,y_theta0,y_zca,y_raw\n";
    for (std::size_t k = 0; k < zca_data->test_y.size(); ++k) {
      pred << zca_data->test_y[k] << "," << base.predictions[k] << ",";
      if (sz) pred << sz->predictions[k];
      pred << ",";
      if (sr) pred << sr->predictions[k];
      pred << "\n";
    }

    std::ofstream coef(out.path("coefficients_" + std::to_string(seed) + ".csv"));
    coef << std::setprecision(17) << "feature,zca_whitened,zca_original,raw\n";
    for (std::size_t f = 0; f < oua::kWeatherFeatures; ++f) {
      const auto fi = static_cast<Eigen::Index>(f);
      coef << oua::kWeatherFeatureNames[f] << ",";
      if (sz) coef << zca_out[i].learn->mu_T[fi] << "," << zca_data->original_coefficients(zca_out[i].learn->mu_T)[fi];
      else coef << ",";
      coef << ",";
      if (sr) coef << raw_out[i].learn->mu_T[fi];
      coef << "\n";
    }

    for (auto& row : rows) {
      if (row.seed != seed) continue;
      if (row.run == "weather_zca" && sz) {
        row.metrics["test_pearson"] = sz->pearson;
        row.metrics["test_mse"] = sz->mse;
      } else if (row.run == "weather_raw" && sr) {
        row.metrics["test_pearson"] = sr->pearson;
        row.metrics["test_mse"] = sr->mse;
      } else if (row.run == "weather_zca_baseline") {
        row.metrics["test_pearson"] = base.pearson;
        row.metrics["test_mse"] = base.mse;
      }
    }
    if (sz) {
      pearson_zca.push_back(sz->pearson);
      mse_zca.push_back(sz->mse);
    }
    if (sr) mse_raw.push_back(sr->mse);
  }
  oua::write_summary_csv(out.path("summary.csv"), rows);
  out.manifest()["weather"] = oua::weather_manifest(*zca_data);
  const bool ok = tz.failures.empty() && tr.failures.empty();
  out.finish(ok ? "ok" : "numerical failure");
  std::cout << "task=weather seeds=" << s.experiment.seeds.size() << " mean_G_T=" << Tally::mean(tz.learn)
            << " test_pearson_zca=" << Tally::mean(pearson_zca) << " test_mse_zca=" << Tally::mean(mse_zca)
            << " test_mse_raw=" << Tally::mean(mse_raw) << "\n";
  const int rc = report("weather_zca", s, tz);
  const int rc_raw = report("weather_raw", s, tr);
  return rc ? rc : rc_raw;
}

int cmd_validate_data(const std::string& path, const std::string& output_dir, double train_fraction) {
  oua::LoadReport load;
  oua::CleaningReport cleaning;
  oua::WeatherTable table = oua::load_clean_weather(path, &load, &cleaning);
  auto data = oua::prepare_weather(std::move(table), train_fraction, true);
  data.load = load;
  data.cleaning = cleaning;
  if (!output_dir.empty()) oua::write_weather_cache(output_dir, data);
  json j = oua::weather_manifest(data);
  j.erase("whitening");
  j.erase("standardizer");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Ornstein-Uhlenbeck adaptation experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", oua::version());

  CommonOptions run_o, sweep_o, weather_o, sdi_o, meta_o;
  auto* run = app.add_subcommand("run", "Learning runs plus frozen baselines over seeds");
  add_common(run, run_o);

  auto* sweep = app.add_subcommand("sweep", "Hyper-parameter sensitivity of G(T)");
  add_common(sweep, sweep_o);
  std::vector<std::string> params;
  std::vector<double> values;
  sweep->add_option("--param", params, "lambda, sigma, rho or eta (repeatable)");
  sweep->add_option("--values", values, "Explicit values (default: log grid)")->delimiter(',');

  auto* weather = app.add_subcommand("weather", "Weather regression with and without ZCA whitening");
  add_common(weather, weather_o);
  std::string weather_path;
  weather->add_option("--data", weather_path, "Hourly weather CSV");

  auto* sdi = app.add_subcommand("sdi", "Stochastic double integrator control");
  add_common(sdi, sdi_o);

  auto* meta = app.add_subcommand("meta", "Learnable versus constant exploration noise");
  add_common(meta, meta_o);

  auto* validate_data = app.add_subcommand("validate-data", "Load, clean and summarize a weather CSV");
  std::string vd_path, vd_out;
  double vd_fraction = 0.8;
  validate_data->add_option("--data", vd_path, "Hourly weather CSV")->required();
  validate_data->add_option("-o,--output-dir", vd_out, "Write the cleaned cache here");
  validate_data->add_option("--train-fraction", vd_fraction, "Chronological train fraction")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::string command;
  for (int i = 0; i < argc; ++i) command += (i ? " " : "") + std::string(argv[i]);

  if (*run) return cmd_run(run_o, command, "", std::nullopt);
  if (*sdi) return cmd_run(sdi_o, command, "fig7", Task::Sdi);
  if (*sweep) return cmd_sweep(sweep_o, params, values);
  if (*weather) return cmd_weather(weather_o, weather_path);
  if (*meta) return cmd_meta(meta_o);
  if (*validate_data) return cmd_validate_data(vd_path, vd_out, vd_fraction);
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const oua::ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "config error: " << p << "\n";
    return kExitConfig;
  } catch (const oua::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const oua::IntegrationError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const oua::DomainError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
