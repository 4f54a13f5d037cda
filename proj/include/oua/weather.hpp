#pragma once

// Hourly weather data: ingestion, cleaning, standardization and ZCA whitening
// for the 24-hour-ahead temperature regression task.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "oua/sde.hpp"

namespace oua {

inline constexpr std::size_t kWeatherFeatures = 6;
inline constexpr std::size_t kForecastHorizonRows = 24;

/// Feature column order used everywhere.
inline const std::array<std::string, kWeatherFeatures> kWeatherFeatureNames = {
    "temperature", "humidity", "wind_speed", "wind_bearing_sin", "wind_bearing_cos", "pressure"};

/// Column headers of the public Szeged hourly dataset that we consume.
struct WeatherColumns {
  static constexpr const char* kDate = "Formatted Date";
  static constexpr const char* kTemperature = "Temperature (C)";
  static constexpr const char* kHumidity = "Humidity";
  static constexpr const char* kWindSpeed = "Wind Speed (km/h)";
  static constexpr const char* kWindBearing = "Wind Bearing (degrees)";
  static constexpr const char* kPressure = "Pressure (millibars)";
};

struct WeatherTable {
  /// Seconds since the Unix epoch (UTC), ascending.
  std::vector<std::int64_t> timestamps;
  /// rows x kWeatherFeatures, see kWeatherFeatureNames.
  Mat features;
  /// Temperature kForecastHorizonRows rows ahead; empty until with_targets().
  std::vector<double> target;

  std::size_t rows() const { return timestamps.size(); }
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
  std::size_t duplicates_dropped = 0;
};

/// Parses the dataset CSV. Sorts chronologically, keeps the first of any
/// duplicate timestamps, converts wind bearing (degrees) to sine/cosine.
/// Throws DataError for a missing/empty file, missing columns (named), or more
/// than 1% unparseable rows.
WeatherTable load_weather(const std::string& path, LoadReport* report = nullptr);
WeatherTable parse_weather_csv(std::istream& in, LoadReport* report = nullptr);

/// Parses "YYYY-MM-DD HH:MM:SS[.fff] +HHMM" to UTC seconds.
std::optional<std::int64_t> parse_timestamp(const std::string& text);

/// Inserts linearly interpolated rows for missing hours. Returns the count.
std::size_t fill_hourly_gaps(WeatherTable& table);

struct CleaningReport {
  std::array<std::size_t, kWeatherFeatures> outliers{};
  std::size_t gaps_filled = 0;
};

/// Replaces outliers (pressure exactly 0, or beyond 6 sample standard
/// deviations from the feature mean) by linear interpolation between the
/// nearest valid neighbours; leading/trailing runs take the nearest valid
/// value. Throws DataError when more than half of a feature is flagged.
WeatherTable remove_outliers(const WeatherTable& table, CleaningReport* report = nullptr);

/// Attaches the target (temperature `horizon` rows ahead) and drops the last
/// `horizon` rows, which have no target.
WeatherTable with_targets(const WeatherTable& table, std::size_t horizon = kForecastHorizonRows);

struct TableSplit {
  WeatherTable train;
  WeatherTable test;
};

/// Chronological split: the first floor(fraction * N) rows train.
TableSplit make_split(const WeatherTable& table, double train_fraction);

struct Standardizer {
  Vec mean;
  Vec stddev;
  double target_mean = 0.0;
  double target_stddev = 1.0;

  /// Fits on training rows only, population deviations. Throws DataError on
  /// zero variance.
  static Standardizer fit(const WeatherTable& train);
  WeatherTable apply(const WeatherTable& table) const;
};

/// Convenience: standardize `table` with statistics fitted on `train`.
WeatherTable standardize(const WeatherTable& table, const WeatherTable& train);

struct WhiteningTransform {
  Vec mean;
  /// Symmetric whitening matrix E diag(1/sqrt(ev)) E^T.
  Mat R;
  Mat R_inv;

  /// Whitened rows (x - mean) R.
  Mat apply(const Mat& X) const;
};

struct Whitened {
  Mat X;
  WhiteningTransform transform;
};

/// Fits ZCA whitening on the rows of X (ridge 1e-8 * trace / d added to the
/// covariance) and returns the whitened rows. Throws DataError for fewer than
/// 2 rows or a covariance that is not positive definite.
Whitened zca_whiten(const Mat& X);

/// Coefficients for centred original-space inputs: mu^T R, so that
/// mu . ((x - mean) R) == (mu^T R) . (x - mean).
Vec project_back(const Vec& mu_T, const WhiteningTransform& transform);

/// Model-ready arrays for the regression task.
struct WeatherData {
  Mat train_X;
  std::vector<double> train_y;
  Mat test_X;
  std::vector<double> test_y;
  Standardizer standardizer;
  std::optional<WhiteningTransform> whitening;
  LoadReport load;
  CleaningReport cleaning;
  std::size_t split_row = 0;
  std::int64_t split_timestamp = 0;

  /// Coefficients expressed over standardized (unwhitened) features.
  Vec original_coefficients(const Vec& mu_T) const;
};

/// Load, fill hourly gaps, then replace outliers.
WeatherTable load_clean_weather(const std::string& path, LoadReport* load = nullptr,
                                CleaningReport* cleaning = nullptr);

/// Full pipeline: load, fill gaps, clean, split, build targets, standardize,
/// optionally whiten.
WeatherData prepare_weather(const std::string& path, double train_fraction, bool zca,
                            std::size_t max_train_rows = 0);
WeatherData prepare_weather(WeatherTable cleaned, double train_fraction, bool zca, std::size_t max_train_rows = 0);

/// Cleaned cache: `<dir>/weather_train.csv`, `<dir>/weather_test.csv` and
/// `<dir>/weather_manifest.json` (17 significant digits throughout).
void write_weather_cache(const std::string& dir, const WeatherData& data);
nlohmann::json weather_manifest(const WeatherData& data);

}  // namespace oua
