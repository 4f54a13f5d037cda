#include "oua/weather.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "oua/error.hpp"

namespace oua {

namespace {

constexpr double kOutlierSigmas = 6.0;
constexpr double kMaxSkippedFraction = 0.01;
constexpr double kMaxOutlierFraction = 0.5;
constexpr std::size_t kPressure = 5;
constexpr std::int64_t kHour = 3600;

// RFC 4180 field splitting (quoted fields, doubled quotes). Records never span
// lines in this dataset.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

double column_mean(const Mat& m, Eigen::Index c) { return m.col(c).mean(); }

// ddof = 1 gives the sample deviation, ddof = 0 the population deviation.
double column_stddev(const Mat& m, Eigen::Index c, double mean, Eigen::Index ddof = 1) {
  const auto n = m.rows();
  if (n <= ddof) return 0.0;
  return std::sqrt((m.col(c).array() - mean).square().sum() / static_cast<double>(n - ddof));
}

WeatherTable take_rows(const WeatherTable& t, std::size_t begin, std::size_t end) {
  WeatherTable out;
  out.timestamps.assign(t.timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        t.timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.features = t.features.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  if (!t.target.empty()) {
    out.target.assign(t.target.begin() + static_cast<std::ptrdiff_t>(begin),
                      t.target.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(const std::string& text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0;
  double second = 0.0;
  char sign = '+';
  int offset = 0;
  std::istringstream in(text);
  char dash1 = 0, dash2 = 0, colon1 = 0, colon2 = 0;
  in >> year >> dash1 >> month >> dash2 >> day >> hour >> colon1 >> minute >> colon2 >> second;
  if (!in || dash1 != '-' || dash2 != '-' || colon1 != ':' || colon2 != ':') return std::nullopt;
  in >> std::ws;
  if (!in.eof()) {
    in >> sign >> offset;
    if (!in || (sign != '+' && sign != '-')) return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second >= 61) {
    return std::nullopt;
  }
  const std::int64_t days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  const std::int64_t offset_seconds = (offset / 100) * 3600 + (offset % 100) * 60;
  const std::int64_t local =
      days * 86400 + hour * 3600 + minute * 60 + static_cast<std::int64_t>(std::floor(second));
  return sign == '+' ? local - offset_seconds : local + offset_seconds;
}

WeatherTable parse_weather_csv(std::istream& in, LoadReport* report) {
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError("weather file is empty");
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);

  const std::array<const char*, 6> required = {WeatherColumns::kDate,        WeatherColumns::kTemperature,
                                               WeatherColumns::kHumidity,    WeatherColumns::kWindSpeed,
                                               WeatherColumns::kWindBearing, WeatherColumns::kPressure};
  std::vector<std::string> missing;
  std::array<std::size_t, 6> col{};
  for (std::size_t i = 0; i < required.size(); ++i) {
    auto it = index.find(required[i]);
    if (it == index.end()) {
      missing.emplace_back(required[i]);
    } else {
      col[i] = it->second;
    }
  }
  if (!missing.empty()) {
    std::string msg = "weather file is missing required column(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw DataError(msg);
  }

  struct Row {
    std::int64_t ts;
    std::array<double, kWeatherFeatures> f;
    std::size_t order;
  };
  std::vector<Row> rows;
  LoadReport rep;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++rep.rows_read;
    const auto fields = split_csv_line(line);
    bool ok = fields.size() == header.size();
    Row row{};
    if (ok) {
      const auto ts = parse_timestamp(fields[col[0]]);
      const auto temp = parse_double(fields[col[1]]);
      const auto hum = parse_double(fields[col[2]]);
      const auto wind = parse_double(fields[col[3]]);
      const auto bearing = parse_double(fields[col[4]]);
      const auto pressure = parse_double(fields[col[5]]);
      ok = ts && temp && hum && wind && bearing && pressure;
      if (ok) {
        const double rad = *bearing * std::numbers::pi / 180.0;
        row = Row{*ts, {*temp, *hum, *wind, std::sin(rad), std::cos(rad), *pressure}, rows.size()};
      }
    }
    if (ok) {
      rows.push_back(row);
    } else {
      ++rep.rows_skipped;
    }
  }
  if (rep.rows_read == 0) throw DataError("weather file has a header but no rows");
  if (static_cast<double>(rep.rows_skipped) > kMaxSkippedFraction * static_cast<double>(rep.rows_read)) {
    throw DataError(std::to_string(rep.rows_skipped) + " of " + std::to_string(rep.rows_read) +
                    " weather rows could not be parsed (limit 1%)");
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  std::vector<Row> unique;
  unique.reserve(rows.size());
  for (const auto& r : rows) {
    if (!unique.empty() && unique.back().ts == r.ts) {
      ++rep.duplicates_dropped;
      continue;
    }
    unique.push_back(r);
  }

  WeatherTable table;
  table.timestamps.reserve(unique.size());
  table.features.resize(static_cast<Eigen::Index>(unique.size()), kWeatherFeatures);
  for (std::size_t i = 0; i < unique.size(); ++i) {
    table.timestamps.push_back(unique[i].ts);
    for (std::size_t j = 0; j < kWeatherFeatures; ++j) {
      table.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = unique[i].f[j];
    }
  }
  if (report) *report = rep;
  return table;
}

WeatherTable load_weather(const std::string& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weather file '" + path + "'");
  return parse_weather_csv(in, report);
}

std::size_t fill_hourly_gaps(WeatherTable& table) {
  if (table.rows() < 2) return 0;
  std::vector<std::int64_t> ts;
  std::vector<Eigen::RowVectorXd> rows;
  std::size_t filled = 0;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const Eigen::RowVectorXd cur = table.features.row(static_cast<Eigen::Index>(i));
    if (i > 0) {
      const std::int64_t gap = table.timestamps[i] - ts.back();
      const std::int64_t missing = gap / kHour - 1;
      const Eigen::RowVectorXd prev = rows.back();
      for (std::int64_t k = 1; k <= missing; ++k) {
        const double w = static_cast<double>(k * kHour) / static_cast<double>(gap);
        ts.push_back(ts.back() + kHour);
        rows.emplace_back((1.0 - w) * prev + w * cur);
        ++filled;
      }
    }
    ts.push_back(table.timestamps[i]);
    rows.push_back(cur);
  }
  if (filled == 0) return 0;
  table.timestamps = std::move(ts);
  table.features.resize(static_cast<Eigen::Index>(rows.size()), kWeatherFeatures);
  for (std::size_t i = 0; i < rows.size(); ++i) table.features.row(static_cast<Eigen::Index>(i)) = rows[i];
  return filled;
}

WeatherTable remove_outliers(const WeatherTable& table, CleaningReport* report) {
  if (table.rows() == 0) throw DataError("cannot clean an empty weather table");
  WeatherTable out = table;
  const auto n = static_cast<Eigen::Index>(table.rows());
  CleaningReport rep;
  if (report) rep.gaps_filled = report->gaps_filled;

  for (Eigen::Index c = 0; c < table.features.cols(); ++c) {
    const auto col = table.features.col(c);
    const double mean = column_mean(table.features, c);
    const double sd = column_stddev(table.features, c, mean);
    std::vector<bool> bad(static_cast<std::size_t>(n), false);
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = col[i];
      const bool zero_pressure = c == static_cast<Eigen::Index>(kPressure) && v == 0.0;
      const bool far = sd > 0.0 && std::abs(v - mean) > kOutlierSigmas * sd;
      if (zero_pressure || far) {
        bad[static_cast<std::size_t>(i)] = true;
        ++count;
      }
    }
    rep.outliers[static_cast<std::size_t>(c)] = count;
    if (count == 0) continue;
    if (static_cast<double>(count) > kMaxOutlierFraction * static_cast<double>(n)) {
      throw DataError("feature '" + kWeatherFeatureNames[static_cast<std::size_t>(c)] + "' has " +
                      std::to_string(count) + " outliers out of " + std::to_string(n) + " rows (limit 50%)");
    }
    // Nearest valid neighbour on each side.
    std::vector<Eigen::Index> prev_valid(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> next_valid(static_cast<std::size_t>(n), -1);
    Eigen::Index last = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!bad[static_cast<std::size_t>(i)]) last = i;
      prev_valid[static_cast<std::size_t>(i)] = last;
    }
    last = -1;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (!bad[static_cast<std::size_t>(i)]) last = i;
      next_valid[static_cast<std::size_t>(i)] = last;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!bad[static_cast<std::size_t>(i)]) continue;
      const Eigen::Index a = prev_valid[static_cast<std::size_t>(i)];
      const Eigen::Index b = next_valid[static_cast<std::size_t>(i)];
      double v;
      if (a < 0) {
        v = col[b];
      } else if (b < 0) {
        v = col[a];
      } else {
        const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
        v = (1.0 - w) * col[a] + w * col[b];
      }
      out.features(i, c) = v;
    }
  }
  if (report) *report = rep;
  return out;
}

WeatherTable with_targets(const WeatherTable& table, std::size_t horizon) {
  if (table.rows() <= horizon) {
    throw DataError("need more than " + std::to_string(horizon) + " rows to build forecast targets");
  }
  const std::size_t keep = table.rows() - horizon;
  WeatherTable out = take_rows(table, 0, keep);
  out.target.resize(keep);
  for (std::size_t i = 0; i < keep; ++i) out.target[i] = table.features(static_cast<Eigen::Index>(i + horizon), 0);
  return out;
}

TableSplit make_split(const WeatherTable& table, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(table.rows())));
  if (n_train == 0 || n_train >= table.rows()) {
    throw DataError("split of " + std::to_string(table.rows()) + " rows at " + std::to_string(train_fraction) +
                    " leaves an empty side");
  }
  return {take_rows(table, 0, n_train), take_rows(table, n_train, table.rows())};
}

Standardizer Standardizer::fit(const WeatherTable& train) {
  if (train.rows() < 2) throw DataError("need at least 2 training rows to standardize");
  Standardizer s;
  const auto d = train.features.cols();
  s.mean.resize(d);
  s.stddev.resize(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    s.mean[c] = column_mean(train.features, c);
    s.stddev[c] = column_stddev(train.features, c, s.mean[c], 0);
    if (!(s.stddev[c] > 0.0)) {
      const std::string name =
          c < static_cast<Eigen::Index>(kWeatherFeatures) ? kWeatherFeatureNames[static_cast<std::size_t>(c)]
                                                          : std::to_string(c);
      throw DataError("feature '" + name + "' has zero variance on the training split");
    }
  }
  if (!train.target.empty()) {
    const Eigen::Map<const Vec> y(train.target.data(), static_cast<Eigen::Index>(train.target.size()));
    s.target_mean = y.mean();
    s.target_stddev = std::sqrt((y.array() - s.target_mean).square().sum() / static_cast<double>(y.size()));
    if (!(s.target_stddev > 0.0)) throw DataError("target has zero variance on the training split");
  }
  return s;
}

WeatherTable Standardizer::apply(const WeatherTable& table) const {
  WeatherTable out = table;
  out.features = ((table.features.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array()).matrix();
  for (double& y : out.target) y = (y - target_mean) / target_stddev;
  return out;
}

WeatherTable standardize(const WeatherTable& table, const WeatherTable& train) {
  return Standardizer::fit(train).apply(table);
}

Mat WhiteningTransform::apply(const Mat& X) const { return (X.rowwise() - mean.transpose()) * R; }

Whitened zca_whiten(const Mat& X) {
  if (X.rows() < 2) throw DataError("ZCA whitening needs at least 2 rows");
  const auto d = X.cols();
  WhiteningTransform tf;
  tf.mean = X.colwise().mean().transpose();
  const Mat centred = X.rowwise() - tf.mean.transpose();
  Mat cov = (centred.transpose() * centred) / static_cast<double>(X.rows() - 1);
  const double ridge = 1e-8 * cov.trace() / static_cast<double>(d);
  cov.diagonal().array() += ridge;

  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.info() != Eigen::Success) throw DataError("eigendecomposition of the feature covariance failed");
  const Vec& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) throw DataError("feature covariance is not positive definite");
  const Mat& E = eig.eigenvectors();
  tf.R = E * ev.cwiseInverse().cwiseSqrt().asDiagonal() * E.transpose();
  tf.R_inv = E * ev.cwiseSqrt().asDiagonal() * E.transpose();
  // Symmetrize away rounding so R is exactly symmetric.
  tf.R = 0.5 * (tf.R + tf.R.transpose()).eval();
  tf.R_inv = 0.5 * (tf.R_inv + tf.R_inv.transpose()).eval();

  Whitened out;
  out.X = centred * tf.R;
  out.transform = std::move(tf);
  return out;
}

Vec project_back(const Vec& mu_T, const WhiteningTransform& transform) {
  if (mu_T.size() != transform.R.rows()) {
    throw DimensionError("coefficient vector has " + std::to_string(mu_T.size()) + " entries, transform has " +
                         std::to_string(transform.R.rows()));
  }
  return (mu_T.transpose() * transform.R).transpose();
}

Vec WeatherData::original_coefficients(const Vec& mu_T) const {
  return whitening ? project_back(mu_T, *whitening) : mu_T;
}

WeatherData prepare_weather(WeatherTable cleaned, double train_fraction, bool zca, std::size_t max_train_rows) {
  WeatherData data;
  TableSplit split = make_split(cleaned, train_fraction);
  data.split_row = split.train.rows();
  data.split_timestamp = split.test.timestamps.front();
  if (max_train_rows > 0 && split.train.rows() > max_train_rows) {
    split.train = take_rows(split.train, split.train.rows() - max_train_rows, split.train.rows());
  }
  WeatherTable train = with_targets(split.train);
  WeatherTable test = with_targets(split.test);

  data.standardizer = Standardizer::fit(train);
  train = data.standardizer.apply(train);
  test = data.standardizer.apply(test);

  if (zca) {
    Whitened w = zca_whiten(train.features);
    data.train_X = std::move(w.X);
    data.test_X = w.transform.apply(test.features);
    data.whitening = std::move(w.transform);
  } else {
    data.train_X = train.features;
    data.test_X = test.features;
  }
  data.train_y = std::move(train.target);
  data.test_y = std::move(test.target);
  return data;
}

WeatherTable load_clean_weather(const std::string& path, LoadReport* load, CleaningReport* cleaning) {
  WeatherTable table = load_weather(path, load);
  CleaningReport local;
  CleaningReport& report = cleaning ? *cleaning : local;
  const std::size_t filled = fill_hourly_gaps(table);
  table = remove_outliers(table, &report);
  report.gaps_filled = filled;
  return table;
}

WeatherData prepare_weather(const std::string& path, double train_fraction, bool zca, std::size_t max_train_rows) {
  LoadReport load;
  CleaningReport cleaning;
  WeatherTable table = load_clean_weather(path, &load, &cleaning);
  WeatherData data = prepare_weather(std::move(table), train_fraction, zca, max_train_rows);
  data.load = load;
  data.cleaning = cleaning;
  return data;
}

namespace {

nlohmann::json to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_split_csv(const std::filesystem::path& path, const Mat& X, const std::vector<double>& y) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (const auto& name : kWeatherFeatureNames) out << name << ',';
  out << "target\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << X(i, j) << ',';
    out << y[static_cast<std::size_t>(i)] << '\n';
  }
}

}  // namespace

nlohmann::json weather_manifest(const WeatherData& data) {
  nlohmann::json j;
  j["features"] = kWeatherFeatureNames;
  j["load"] = {{"rows_read", data.load.rows_read},
               {"rows_skipped", data.load.rows_skipped},
               {"duplicates_dropped", data.load.duplicates_dropped}};
  nlohmann::json outliers;
  for (std::size_t i = 0; i < kWeatherFeatures; ++i) outliers[kWeatherFeatureNames[i]] = data.cleaning.outliers[i];
  j["cleaning"] = {{"gaps_filled", data.cleaning.gaps_filled}, {"outliers_replaced", outliers}};
  j["split"] = {{"train_rows", data.train_X.rows()},
                {"test_rows", data.test_X.rows()},
                {"split_row", data.split_row},
                {"split_timestamp", data.split_timestamp}};
  j["standardizer"] = {{"mean", to_json(data.standardizer.mean)},
                       {"stddev", to_json(data.standardizer.stddev)},
                       {"target_mean", data.standardizer.target_mean},
                       {"target_stddev", data.standardizer.target_stddev}};
  if (data.whitening) {
    j["whitening"] = {{"mean", to_json(data.whitening->mean)},
                      {"R", to_json(data.whitening->R)},
                      {"R_inv", to_json(data.whitening->R_inv)}};
  } else {
    j["whitening"] = nullptr;
  }
  return j;
}

void write_weather_cache(const std::string& dir, const WeatherData& data) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  write_split_csv(root / "weather_train.csv", data.train_X, data.train_y);
  write_split_csv(root / "weather_test.csv", data.test_X, data.test_y);
  std::ofstream out(root / "weather_manifest.json");
  if (!out) throw DataError("cannot write weather manifest in '" + dir + "'");
  // Doubles are dumped in shortest round-trip form, so values reload bit-exactly.
  out << weather_manifest(data).dump(2) << '\n';
}

}  // namespace oua
