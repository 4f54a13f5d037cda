#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "oua/error.hpp"
#include "oua/weather.hpp"

using namespace oua;

namespace {

const char* kHeader =
    "Formatted Date,Summary,Temperature (C),Humidity,Wind Speed (km/h),Wind Bearing (degrees),Pressure (millibars)\n";

std::string row(int hour_index, double temp, double hum, double wind, double bearing, double pressure) {
  const int day = 1 + hour_index / 24;
  const int hour = hour_index % 24;
  char buf[160];
  std::snprintf(buf, sizeof buf, "2006-04-%02d %02d:00:00.000 +0200,\"Partly, cloudy\",%.6f,%.4f,%.4f,%.1f,%.2f\n", day,
                hour, temp, hum, wind, bearing, pressure);
  return buf;
}

// Hourly synthetic series with daily temperature cycles and correlated humidity.
std::string synthetic_csv(int hours, unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::string out = kHeader;
  for (int h = 0; h < hours; ++h) {
    const double temp = 12.0 + 6.0 * std::sin(2.0 * M_PI * h / 24.0) + 0.01 * h + n(rng);
    out += row(h, temp, 0.7 - 0.02 * (temp - 12.0) + 0.02 * n(rng), 10.0 + 2.0 * n(rng),
               std::fmod(360.0 + 90.0 + 40.0 * n(rng), 360.0), 1015.0 + 3.0 * n(rng));
  }
  return out;
}

WeatherTable parse(const std::string& text, LoadReport* rep = nullptr) {
  std::istringstream in(text);
  return parse_weather_csv(in, rep);
}

Mat cov(const Mat& X) {
  const Mat c = X.rowwise() - X.colwise().mean();
  return c.transpose() * c / static_cast<double>(X.rows() - 1);
}

}  // namespace

TEST_CASE("timestamps carry their UTC offset") {
  CHECK(parse_timestamp("1970-01-01 00:00:00.000 +0000") == 0);
  CHECK(parse_timestamp("1970-01-01 02:00:00.000 +0200") == 0);
  CHECK(parse_timestamp("1970-01-01 01:00:00 +0100") == 0);
  CHECK(parse_timestamp("2006-04-01 00:00:00.000 +0200") == 1143842400);
  CHECK(!parse_timestamp("2006-13-01 00:00:00.000 +0200"));
  CHECK(!parse_timestamp("yesterday"));
}

TEST_CASE("csv parsing") {
  SUBCASE("rows are sorted and bearings become sine and cosine") {
    const std::string text = std::string(kHeader) + row(2, 3.0, 0.5, 1.0, 0.0, 1000.0) +
                             row(0, 1.0, 0.5, 1.0, 90.0, 1000.0) + row(1, 2.0, 0.5, 1.0, 180.0, 1000.0);
    const auto t = parse(text);
    REQUIRE(t.rows() == 3);
    CHECK(t.features(0, 0) == 1.0);
    CHECK(t.features(2, 0) == 3.0);
    CHECK(t.features(0, 3) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(t.features(0, 4)) < 1e-15);
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(std::abs(t.features(i, 3) * t.features(i, 3) + t.features(i, 4) * t.features(i, 4) - 1.0) < 1e-9);
    }
    CHECK(t.timestamps[1] - t.timestamps[0] == 3600);
  }
  SUBCASE("missing column is named") {
    std::string text = "Formatted Date,Temperature (C),Humidity,Wind Speed (km/h),Wind Bearing (degrees)\n";
    try {
      parse(text);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("Pressure (millibars)") != std::string::npos);
    }
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(parse(""), DataError); }
  SUBCASE("more than 1% unparseable rows") {
    std::string text = synthetic_csv(100);
    text += "2006-04-09 00:00:00.000 +0200,x,abc,0.5,1,1,1000\n";
    text += "2006-04-09 01:00:00.000 +0200,x,abc,0.5,1,1,1000\n";
    CHECK_THROWS_AS(parse(text), DataError);
  }
  SUBCASE("a few unparseable rows are skipped") {
    std::string text = synthetic_csv(200);
    text += "2006-04-20 00:00:00.000 +0200,x,abc,0.5,1,1,1000\n";
    LoadReport rep;
    const auto t = parse(text, &rep);
    CHECK(rep.rows_read == 201);
    CHECK(rep.rows_skipped == 1);
    CHECK(t.rows() == 200);
  }
  SUBCASE("duplicate timestamps keep the first") {
    const std::string text = std::string(kHeader) + row(0, 1.0, 0.5, 1.0, 0.0, 1000.0) +
                             row(0, 9.0, 0.5, 1.0, 0.0, 1000.0) + row(1, 2.0, 0.5, 1.0, 0.0, 1000.0);
    LoadReport rep;
    const auto t = parse(text, &rep);
    CHECK(t.rows() == 2);
    CHECK(t.features(0, 0) == 1.0);
    CHECK(rep.duplicates_dropped == 1);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_weather("/nonexistent/weather.csv"), DataError); }
}

TEST_CASE("cleaning") {
  auto table_with_pressure = [](std::vector<double> p) {
    std::string text = kHeader;
    for (std::size_t i = 0; i < p.size(); ++i) text += row(static_cast<int>(i), 1.0 + i, 0.5, 1.0, 0.0, p[i]);
    return parse(text);
  };
  SUBCASE("interior zero pressure is interpolated") {
    CleaningReport rep;
    const auto t = remove_outliers(table_with_pressure({1010, 0, 1012}), &rep);
    CHECK(t.features(1, 5) == 1011.0);
    CHECK(rep.outliers[5] == 1);
  }
  SUBCASE("leading outlier takes the nearest valid value") {
    const auto t = remove_outliers(table_with_pressure({0, 1000, 1001}));
    CHECK(t.features(0, 5) == 1000.0);
    CHECK(t.features(1, 5) == 1000.0);
    CHECK(t.features(2, 5) == 1001.0);
  }
  SUBCASE("clean tables are unchanged") {
    const auto in = table_with_pressure({1010, 1011, 1012});
    CHECK(remove_outliers(in).features == in.features);
  }
  SUBCASE("mostly bad feature") {
    CHECK_THROWS_AS(remove_outliers(table_with_pressure({0, 0, 1012})), DataError);
  }
  SUBCASE("six sigma spikes") {
    auto t = parse(synthetic_csv(300));
    t.features(150, 2) = 1e4;
    const auto c = remove_outliers(t);
    CHECK(c.features(150, 2) == doctest::Approx(0.5 * (t.features(149, 2) + t.features(151, 2))));
  }
  SUBCASE("hourly gaps are filled linearly") {
    std::string text = std::string(kHeader) + row(0, 0.0, 0.5, 1.0, 0.0, 1000.0) + row(3, 3.0, 0.8, 1.0, 0.0, 1003.0);
    auto t = parse(text);
    CHECK(fill_hourly_gaps(t) == 2);
    REQUIRE(t.rows() == 4);
    CHECK(t.features(1, 0) == doctest::Approx(1.0));
    CHECK(t.features(2, 5) == doctest::Approx(1002.0));
    CHECK(t.timestamps[2] - t.timestamps[0] == 7200);
  }
}

TEST_CASE("targets and split") {
  const auto t = parse(synthetic_csv(100));
  const auto w = with_targets(t);
  REQUIRE(w.rows() == 76);
  for (std::size_t i = 0; i < w.rows(); ++i) CHECK(w.target[i] == t.features(static_cast<Eigen::Index>(i + 24), 0));
  CHECK_THROWS_AS(with_targets(parse(synthetic_csv(20))), DataError);

  const auto ten = parse(synthetic_csv(10));
  const auto s = make_split(ten, 0.8);
  CHECK(s.train.rows() == 8);
  CHECK(s.test.rows() == 2);
  CHECK(s.train.timestamps.back() < s.test.timestamps.front());
  CHECK(make_split(ten, 0.999).train.rows() == 9);
  CHECK_THROWS_AS(make_split(ten, 0.05), DataError);
  CHECK_THROWS_AS(make_split(ten, 1.0), ConfigError);
}

TEST_CASE("standardization uses training statistics only") {
  WeatherTable train;
  train.timestamps = {0, 3600};
  train.features = Mat::Zero(2, 6);
  train.features.col(0) << 0.0, 2.0;
  for (int c = 1; c < 6; ++c) train.features.col(c) << 1.0, 3.0;
  const auto z = standardize(train, train);
  CHECK(z.features(0, 0) == -1.0);
  CHECK(z.features(1, 0) == 1.0);

  WeatherTable test = train;
  test.features.row(0).setConstant(1.0);
  test.features(0, 0) = 1.0;
  const auto zt = standardize(test, train);
  CHECK(zt.features(0, 0) == 0.0);

  WeatherTable other = test;
  other.features(1, 0) = 50.0;
  CHECK(standardize(test, train).features(0, 0) == standardize(other, train).features(0, 0));
  CHECK(standardize(test, other).features(0, 0) != standardize(test, train).features(0, 0));

  WeatherTable flat = train;
  flat.features.col(3).setConstant(0.5);
  CHECK_THROWS_AS(Standardizer::fit(flat), DataError);
}

TEST_CASE("zca whitening") {
  SUBCASE("diagonal covariance diag(4, 1)") {
    Mat X(4, 2);
    const double a = std::sqrt(6.0), b = std::sqrt(1.5);
    X << a, 0, -a, 0, 0, b, 0, -b;
    const auto w = zca_whiten(X);
    CHECK(w.transform.R(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(w.transform.R(1, 1) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::abs(w.transform.R(0, 1)) < 1e-12);
    Vec mu(2);
    mu << 2.0, 3.0;
    const Vec back = project_back(mu, w.transform);
    CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(back[1] == doctest::Approx(3.0).epsilon(1e-7));
  }
  SUBCASE("whitened covariance is the identity") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    // Mixing matrix near the identity keeps the covariance well conditioned,
    // so the ridge stays far below the tolerance.
    Mat A = Mat::Identity(6, 6);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] += 0.3 * n(rng);
    Mat Z(500, 6);
    for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = n(rng);
    const Mat X = Z * A;
    const auto w = zca_whiten(X);
    const Mat c = cov(w.X);
    CHECK((c - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((w.transform.R - w.transform.R.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((w.transform.R * w.transform.R_inv - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);

    Vec mu(6);
    for (Eigen::Index i = 0; i < 6; ++i) mu[i] = n(rng);
    const Vec orig = project_back(mu, w.transform);
    for (Eigen::Index i = 0; i < 20; ++i) {
      const Vec x = X.row(i).transpose();
      const double in_white = mu.dot(w.X.row(i).transpose());
      const double in_orig = orig.dot(x - w.transform.mean);
      CHECK(in_white == doctest::Approx(in_orig).epsilon(1e-9));
    }
  }
  SUBCASE("identity transform leaves coefficients alone") {
    WhiteningTransform tf;
    tf.R = tf.R_inv = Mat::Identity(3, 3);
    tf.mean = Vec::Zero(3);
    const Vec mu = Vec::LinSpaced(3, 1.0, 3.0);
    CHECK(project_back(mu, tf) == mu);
    CHECK_THROWS_AS(project_back(Vec::Zero(2), tf), DimensionError);
  }
  SUBCASE("degenerate inputs") {
    CHECK_THROWS_AS(zca_whiten(Mat::Ones(1, 3)), DataError);
  }
}

TEST_CASE("full preparation and cache") {
  const auto dir = std::filesystem::temp_directory_path() / "oua_test_weather";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto csv = dir / "weather.csv";
  {
    std::ofstream out(csv);
    out << synthetic_csv(600, 9);
  }
  const auto a = prepare_weather(csv.string(), 0.8, true);
  const auto b = prepare_weather(csv.string(), 0.8, true);
  CHECK(a.train_X == b.train_X);
  CHECK(a.test_X == b.test_X);
  CHECK(a.split_row == 480);
  CHECK(a.train_X.rows() == 456);
  CHECK(a.test_X.rows() == 96);
  REQUIRE(a.whitening);
  CHECK((cov(a.train_X) - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);

  const auto raw = prepare_weather(csv.string(), 0.8, false);
  CHECK(!raw.whitening);
  CHECK(std::abs(raw.train_X.col(0).mean()) < 1e-12);

  const auto out = dir / "cache";
  write_weather_cache(out.string(), a);
  CHECK(std::filesystem::exists(out / "weather_train.csv"));
  CHECK(std::filesystem::exists(out / "weather_test.csv"));
  std::ifstream in(out / "weather_manifest.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["split"]["train_rows"] == 456);
  CHECK(j["whitening"]["R"][2][3].get<double>() == a.whitening->R(2, 3));
  std::filesystem::remove_all(dir);
}
