#include "oua/results.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

#include "oua/error.hpp"

#ifndef OUA_VERSION
#define OUA_VERSION "unknown"
#endif

namespace oua {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

void write_value(std::ostream& out, double v) {
  if (std::isfinite(v)) out << v;
  else if (std::isnan(v)) out << "nan";
  else out << (v > 0 ? "inf" : "-inf");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string run_file_name(const std::string& label, std::uint64_t seed) {
  return "run_" + label + "_" + std::to_string(seed) + ".csv";
}

void write_run_csv(const std::string& path, const RunRecord& record) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < record.names.size(); ++c) out << (c ? "," : "") << record.names[c];
  out << "\n";
  for (std::size_t i = 0; i < record.size(); ++i) {
    for (std::size_t c = 0; c < record.columns.size(); ++c) {
      if (c) out << ",";
      write_value(out, record.columns[c][i]);
    }
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

SummaryRow summarize(const std::string& run, const RunRecord& record) {
  SummaryRow row;
  row.run = run;
  row.mode = to_string(record.mode);
  row.seed = record.seed;
  row.G_T = record.G_T;
  row.mu_T = record.mu_T;
  row.theta_T = record.theta_T;
  row.wall_seconds = record.wall_seconds;
  return row;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  Eigen::Index n = 0;
  std::set<std::string> metric_set;
  std::vector<std::string> metrics;
  for (const auto& r : rows) {
    n = std::max({n, r.mu_T.size(), r.theta_T.size()});
    for (const auto& [k, v] : r.metrics) {
      if (metric_set.insert(k).second) metrics.push_back(k);
    }
  }
  auto out = open_out(path);
  out << "run,mode,seed,status,G_T";
  for (Eigen::Index i = 0; i < n; ++i) out << ",mu_" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",theta_" << i;
  out << ",wall_seconds";
  for (const auto& m : metrics) out << "," << m;
  out << "\n";
  for (const auto& r : rows) {
    out << csv_field(r.run) << "," << r.mode << "," << r.seed << "," << csv_field(r.status) << ",";
    write_value(out, r.G_T);
    for (const Vec* v : {&r.mu_T, &r.theta_T}) {
      for (Eigen::Index i = 0; i < n; ++i) {
        out << ",";
        if (i < v->size()) write_value(out, (*v)[i]);
      }
    }
    out << ",";
    write_value(out, r.wall_seconds);
    for (const auto& m : metrics) {
      out << ",";
      if (auto it = r.metrics.find(m); it != r.metrics.end()) write_value(out, it->second);
    }
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  auto out = open_out(path);
  out << "value,seed,G_T\n";
  for (const auto& p : sweep.points) {
    for (std::size_t s = 0; s < p.G_T.size(); ++s) {
      write_value(out, p.value);
      out << "," << sweep.seeds[s] << ",";
      write_value(out, p.G_T[s]);
      out << "\n";
    }
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_sweep_summary_csv(const std::string& path, const std::vector<SweepResult>& sweeps) {
  auto out = open_out(path);
  out << "param,value,mean_G_T,min_G_T,max_G_T,reference_G_T\n";
  for (const auto& s : sweeps) {
    for (const auto& p : s.points) {
      out << s.param;
      for (double v : {p.value, p.mean, p.min, p.max, s.reference}) {
        out << ",";
        write_value(out, v);
      }
      out << "\n";
    }
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_json(const std::string& path, const nlohmann::json& value) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << value.dump(2) << "\n";
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{now - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::string version() { return OUA_VERSION; }

}  // namespace oua
