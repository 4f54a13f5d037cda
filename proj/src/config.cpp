#include "oua/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "oua/error.hpp"

namespace oua {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& raw) {
  std::string s = trim(raw);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double to_double(const std::string& raw) {
  const std::string s = unquote(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& raw) {
  const std::string s = unquote(raw);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& raw) {
  const std::string s = lower(unquote(raw));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::string s = unquote(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list '" + s + "'");
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& raw) {
  std::vector<double> out;
  for (const auto& item : split_list(raw)) out.push_back(to_double(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

std::string fmt(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out + "]";
}

std::string fmt_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() > 2) {
    bool contiguous = true;
    for (std::size_t i = 1; i < seeds.size(); ++i) contiguous = contiguous && seeds[i] == seeds[i - 1] + 1;
    if (contiguous) return std::to_string(seeds.front()) + ".." + std::to_string(seeds.back());
  }
  std::string out = "[";
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ", " : "") + std::to_string(seeds[i]);
  return out + "]";
}

std::string fmt(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string section;
  std::string name;
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;

  std::string full() const { return section.empty() ? name : section + "." + name; }
};

#define OUA_NUMBER(sec, key, field)                                                     \
  Key {                                                                                 \
    sec, #key, [](Settings& s, const std::string& v) { s.field = to_double(v); }, \
        [](const Settings& s) { return fmt(s.field); }                                  \
  }
#define OUA_VECTOR(sec, key, field)                                                      \
  Key {                                                                                  \
    sec, #key, [](Settings& s, const std::string& v) { s.field = to_doubles(v); }, \
        [](const Settings& s) { return fmt(s.field); }                                   \
  }
#define OUA_FLAG(sec, key, field)                                                     \
  Key {                                                                               \
    sec, #key, [](Settings& s, const std::string& v) { s.field = to_bool(v); }, \
        [](const Settings& s) { return fmt(s.field); }                                \
  }
#define OUA_COUNT(sec, key, field)                                                                          \
  Key {                                                                                                     \
    sec, #key, [](Settings& s, const std::string& v) { s.field = static_cast<std::size_t>(to_uint(v)); }, \
        [](const Settings& s) { return std::to_string(s.field); }                                           \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      OUA_NUMBER("grid", t0, experiment.grid.t0),
      OUA_NUMBER("grid", t_end, experiment.grid.t_end),
      OUA_NUMBER("grid", dt, experiment.grid.dt),
      OUA_COUNT("grid", record_stride, experiment.record_stride),

      OUA_NUMBER("hyperparams", lambda, experiment.hp.lambda),
      OUA_NUMBER("hyperparams", eta, experiment.hp.eta),
      OUA_NUMBER("hyperparams", rho, experiment.hp.rho),
      OUA_VECTOR("hyperparams", sigma, experiment.hp.sigma),

      OUA_FLAG("meta", enabled, experiment.meta.enabled),
      OUA_NUMBER("meta", lambda_sigma, experiment.meta.lambda_sigma),
      OUA_NUMBER("meta", eta_sigma, experiment.meta.eta_sigma),
      OUA_NUMBER("meta", meta_diffusion, experiment.meta.meta_diffusion),
      OUA_NUMBER("meta", sigma0, experiment.meta.sigma0),
      OUA_NUMBER("meta", mu_sigma0, experiment.meta.mu_sigma0),
      OUA_NUMBER("meta", sigma_floor, experiment.meta.sigma_floor),

      OUA_VECTOR("initial", theta0, experiment.initial.theta0),
      OUA_VECTOR("initial", mu0, experiment.initial.mu0),
      OUA_NUMBER("initial", rbar0, experiment.initial.rbar0),
      OUA_NUMBER("initial", z0, experiment.initial.z0),
      OUA_NUMBER("initial", theta0_std, experiment.theta0_std),

      OUA_VECTOR("target", theta_star, experiment.target.theta_star),
      Key{"target", "switch_time",
          [](Settings& s, const std::string& v) {
            const std::string t = lower(unquote(v));
            if (t.empty() || t == "none") {
              s.experiment.target.switch_time.reset();
            } else if (t == "half") {
              s.experiment.target.switch_time = -1.0;
            } else {
              s.experiment.target.switch_time = to_double(v);
            }
          },
          [](const Settings& s) {
            const auto& w = s.experiment.target.switch_time;
            return !w ? std::string("none") : *w < 0.0 ? std::string("half") : fmt(*w);
          }},
      OUA_VECTOR("target", theta_star_after, experiment.target.theta_star_after),

      OUA_NUMBER("sdi", gamma, experiment.sdi.gamma),
      OUA_NUMBER("sdi", alpha, experiment.sdi.alpha),
      OUA_NUMBER("sdi", beta, experiment.sdi.beta),
      OUA_VECTOR("sdi", s0, experiment.sdi_s0),

      Key{"weather", "path", [](Settings& s, const std::string& v) { s.experiment.weather.path = unquote(v); },
          [](const Settings& s) { return "\"" + s.experiment.weather.path + "\""; }},
      OUA_FLAG("weather", zca, experiment.weather.zca),
      OUA_NUMBER("weather", train_fraction, experiment.weather.train_fraction),
      OUA_NUMBER("weather", hours_per_unit, experiment.weather.hours_per_unit),
      OUA_COUNT("weather", max_train_rows, experiment.weather.max_train_rows),

      Key{"model", "nonlinearity",
          [](Settings& s, const std::string& v) {
            try {
              s.experiment.nonlinearity = parse_nonlinearity(unquote(v));
            } catch (const std::exception& e) {
              throw ConfigError(std::string("nonlinearity: ") + e.what());
            }
          },
          [](const Settings& s) { return to_string(s.experiment.nonlinearity); }},

      Key{"run", "seeds", [](Settings& s, const std::string& v) { s.experiment.seeds = parse_seeds(v); },
          [](const Settings& s) { return fmt_seeds(s.experiment.seeds); }},
      OUA_COUNT("run", threads, experiment.threads),
      OUA_FLAG("run", zero_rpe, experiment.zero_rpe),

      Key{"sweep", "params",
          [](Settings& s, const std::string& v) {
            s.sweep.params.clear();
            for (const auto& p : split_list(v)) s.sweep.params.push_back(lower(p));
          },
          [](const Settings& s) {
            std::string out = "[";
            for (std::size_t i = 0; i < s.sweep.params.size(); ++i) out += (i ? ", " : "") + s.sweep.params[i];
            return out + "]";
          }},
      OUA_VECTOR("sweep", values, sweep.values),
      OUA_COUNT("sweep", count, sweep.count),
      OUA_NUMBER("sweep", decades, sweep.decades),
  };
  return keys;
}

#undef OUA_NUMBER
#undef OUA_VECTOR
#undef OUA_FLAG
#undef OUA_COUNT

bool is_section(const std::string& name) {
  const auto& keys = registry();
  return std::any_of(keys.begin(), keys.end(), [&](const Key& k) { return k.section == name; });
}

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : registry()) {
    if (k.section == section && k.name == name) return &k;
  }
  return nullptr;
}

void apply_one(Settings& s, const Key& key, const std::string& value, std::vector<std::string>& problems) {
  try {
    key.set(s, value);
  } catch (const ConfigError& e) {
    for (const auto& p : e.problems()) problems.push_back(key.full() + ": " + p);
  }
}

void apply_overrides_into(Settings& s, const std::vector<std::string>& overrides, std::vector<std::string>& problems) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override '" + o + "' must have the form key=value");
      continue;
    }
    const std::string name = trim(o.substr(0, eq));
    const std::string value = o.substr(eq + 1);
    if (name == "task") {
      problems.emplace_back("task cannot be overridden; choose a preset or edit the file");
      continue;
    }
    const Key* key = nullptr;
    if (const auto dot = name.find('.'); dot != std::string::npos) {
      key = find_key(name.substr(0, dot), name.substr(dot + 1));
    } else {
      std::vector<const Key*> hits;
      for (const auto& k : registry()) {
        if (k.name == name) hits.push_back(&k);
      }
      if (hits.size() > 1) {
        problems.push_back("override key '" + name + "' is ambiguous; use section.key");
        continue;
      }
      if (!hits.empty()) key = hits.front();
    }
    if (!key) {
      problems.push_back("unknown key '" + name + "'");
      continue;
    }
    apply_one(s, *key, value, problems);
  }
}

void collect_validation(const Settings& s, std::vector<std::string>& problems) {
  try {
    s.experiment.validate();
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  for (const auto& p : s.sweep.params) {
    if (!is_sweepable(p)) problems.push_back("sweep.params: cannot sweep '" + p + "' (expected lambda, sigma, rho or eta)");
  }
  if (s.sweep.count == 0) problems.emplace_back("sweep.count must be >= 1");
  if (!(s.sweep.decades >= 0.0)) problems.emplace_back("sweep.decades must be >= 0");
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t last) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = first; s <= last; ++s) out.push_back(s);
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "single", "recurrent", "multi", "weather", "sdi", "meta"};
}

Settings preset(const std::string& name) {
  Settings s;
  auto& c = s.experiment;
  c.preset = name;
  c.seeds = seed_range(0, 14);
  c.grid = TimeGrid{0.0, 200.0, 0.05};

  if (name == "fig2" || name == "fig3" || name == "single") {
    c.task = Task::Single;
    c.hp = Hyperparams{1.0, 1.0, 1.0, {0.3}};
    c.initial.rbar0 = -1.0;
    c.target.theta_star = {1.0};
  } else if (name == "fig4" || name == "recurrent") {
    c.task = Task::Recurrent;
    c.hp = Hyperparams{1.0, 50.0, 1.0, {0.2}};
    c.initial.rbar0 = -0.1;
    c.initial.theta0 = {0.2, 0.1, 0.5};
    c.target.theta_star = {0.3, 0.7, 1.0};
  } else if (name == "fig5" || name == "multi") {
    c.task = Task::Multi;
    c.hp = Hyperparams{1.0, 1.0, 1.0, {0.2}};
    c.initial.rbar0 = -1.0;
    c.target.theta_star = {0.3, 1.1, 0.0, -0.3, -1.5, -0.4};
    c.grid.t_end = 3000.0;
    c.record_stride = 10;
  } else if (name == "fig6" || name == "weather") {
    c.task = Task::Weather;
    c.hp = Hyperparams{1.0, 0.1, 1.0, {0.05}};
    c.initial.rbar0 = 0.0;
    c.theta0_std = 1e-3;
    c.weather.path = "data/weatherHistory.csv";
    c.record_stride = 20;
  } else if (name == "fig7" || name == "sdi") {
    c.task = Task::Sdi;
    c.hp = Hyperparams{1.0, 50.0, 2.0, {0.02}};
    c.initial.rbar0 = 0.0;
    c.sdi = SdiParams{0.01, 0.005, 0.005};
    c.sdi_s0 = {0.0, 0.0};
  } else if (name == "fig8" || name == "meta") {
    c.task = Task::Meta;
    c.hp = Hyperparams{1.0, 1.0, 1.0, {0.15}};
    c.initial.rbar0 = 0.0;
    c.meta = MetaConfig{true, 2.0, 3.0, 1.0, 0.15, 0.15, kSigmaFloor};
    c.target.theta_star = {1.0};
    c.target.switch_time = -1.0;
    c.target.theta_star_after = {-1.0};
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("task: unknown preset '" + name + "' (expected one of " + known + ")");
  }
  if (name == "fig3") s.sweep.params = {"lambda", "sigma", "rho", "eta"};
  return s;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const std::string s = unquote(text);
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const auto first = to_uint(s.substr(0, dots));
    const auto last = to_uint(s.substr(dots + 2));
    if (last < first) throw ConfigError("range '" + s + "' is empty");
    if (last - first >= 1'000'000) throw ConfigError("range '" + s + "' is too large");
    return seed_range(first, last);
  }
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_uint(item));
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out{"task"};
  for (const auto& k : registry()) out.push_back(k.full());
  return out;
}

Settings parse_settings(std::istream& in, const std::vector<std::string>& overrides,
                        const std::string& fallback_preset, const std::vector<std::string>& defaults) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::vector<std::string> problems;
  std::string name = fallback_preset;
  if (auto task = tree.get_optional<std::string>("task")) {
    name = unquote(*task);
  }
  if (name.empty()) throw ConfigError("missing required key 'task' (a preset such as fig2 or a task name)");

  Settings s;
  try {
    s = preset(name);
  } catch (const ConfigError& e) {
    throw ConfigError(e.problems());
  }
  apply_overrides_into(s, defaults, problems);

  for (const auto& [top, node] : tree) {
    if (top == "task") continue;
    if (node.empty()) {
      if (is_section(top) && node.data().empty()) continue;
      if (const Key* key = find_key("", top)) {
        apply_one(s, *key, node.data(), problems);
      } else {
        problems.push_back("unknown key '" + top + "'");
      }
      continue;
    }
    if (!is_section(top)) {
      problems.push_back("unknown section '" + top + "'");
      continue;
    }
    for (const auto& [name_in_section, leaf] : node) {
      if (const Key* key = find_key(top, name_in_section)) {
        apply_one(s, *key, leaf.data(), problems);
      } else {
        problems.push_back("unknown key '" + top + "." + name_in_section + "'");
      }
    }
  }

  apply_overrides_into(s, overrides, problems);
  collect_validation(s, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return s;
}

Settings load_settings(const std::string& path, const std::vector<std::string>& overrides,
                       const std::string& fallback_preset, const std::vector<std::string>& defaults) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_settings(in, overrides, fallback_preset, defaults);
}

Settings apply_overrides(Settings settings, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  apply_overrides_into(settings, overrides, problems);
  collect_validation(settings, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return settings;
}

void validate(const Settings& settings) {
  std::vector<std::string> problems;
  collect_validation(settings, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string to_ini(const Settings& settings) {
  std::ostringstream out;
  out << "task = " << (settings.experiment.preset.empty() ? to_string(settings.experiment.task)
                                                          : settings.experiment.preset)
      << "\n";
  std::string section;
  for (const auto& k : registry()) {
    if (k.section != section) {
      section = k.section;
      out << "\n[" << section << "]\n";
    }
    out << k.name << " = " << k.get(settings) << "\n";
  }
  return out.str();
}

nlohmann::json to_json(const Settings& settings) {
  nlohmann::json j;
  j["task"] = to_string(settings.experiment.task);
  j["preset"] = settings.experiment.preset;
  for (const auto& k : registry()) {
    // INI values that are also JSON literals (numbers, lists, booleans) keep their type.
    const std::string text = k.get(settings);
    auto value = nlohmann::json::parse(text, nullptr, false);
    j[k.section][k.name] = value.is_discarded() ? nlohmann::json(text) : value;
  }
  return j;
}

}  // namespace oua
