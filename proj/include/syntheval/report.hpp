#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "syntheval/error.hpp"
#include "syntheval/version.hpp"

namespace syntheval {

// Structured run report: per-pair rows, group aggregates recomputable from
// the rows, and provenance (tool version, resolved config, seed, input
// digests). Emission is deterministic: no timestamps, sorted keys, fixed
// float formatting, so re-running the same config on the same inputs gives
// byte-identical files.

// FNV-1a 64-bit content digest, hex-encoded.
inline std::string fnv1a64_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), errc::io_error, "cannot open " + path + " for digest");
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

struct InputDigest {
  std::string path;
  std::string fnv1a64;
};

struct AggregateStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1); 0 for a single row
  std::size_t count = 0;
};

struct AggregateRow {
  std::vector<std::string> group;  // values of the group_by columns
  std::map<std::string, AggregateStats> stats;
};

struct MetricReport {
  std::string kind;  // subcommand name
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<InputDigest> inputs;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
  std::vector<std::string> group_by;       // subset of columns
  std::vector<std::string> value_columns;  // subset of columns, numeric
  std::vector<AggregateRow> aggregates;
  nlohmann::json notes = nlohmann::json::object();
};

namespace report_detail {

inline std::size_t column_index(const MetricReport& r, const std::string& name) {
  auto it = std::find(r.columns.begin(), r.columns.end(), name);
  require(it != r.columns.end(), errc::internal_error, "unknown report column " + name);
  return static_cast<std::size_t>(it - r.columns.begin());
}

inline double cell_number(const nlohmann::json& cell) {
  if (cell.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (cell.is_string())  // "inf" sentinel
    return cell.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                            : std::numeric_limits<double>::quiet_NaN();
  return cell.get<double>();
}

// Fixed shortest-exact formatting for CSV cells.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string cell_to_csv(const nlohmann::json& cell) {
  if (cell.is_null()) return "";
  if (cell.is_string()) return cell.get<std::string>();
  if (cell.is_boolean()) return cell.get<bool>() ? "true" : "false";
  if (cell.is_number_integer()) return std::to_string(cell.get<long long>());
  return format_double(cell.get<double>());
}

}  // namespace report_detail

// Group means/stddevs/counts recomputed from the rows. Null cells are
// excluded (undefined metric values); infinities propagate.
inline std::vector<AggregateRow> recompute_aggregates(const MetricReport& r) {
  std::vector<std::size_t> group_idx, value_idx;
  for (const auto& c : r.group_by) group_idx.push_back(report_detail::column_index(r, c));
  for (const auto& c : r.value_columns) value_idx.push_back(report_detail::column_index(r, c));

  std::map<std::vector<std::string>, std::map<std::string, std::vector<double>>> buckets;
  for (const auto& row : r.rows) {
    std::vector<std::string> key;
    for (std::size_t g : group_idx)
      key.push_back(row[g].is_string() ? row[g].get<std::string>() : row[g].dump());
    auto& bucket = buckets[key];
    for (std::size_t v = 0; v < value_idx.size(); ++v) {
      const auto& cell = row[value_idx[v]];
      if (cell.is_null()) continue;
      bucket[r.value_columns[v]].push_back(report_detail::cell_number(cell));
    }
  }

  std::vector<AggregateRow> out;
  for (const auto& [key, bucket] : buckets) {
    AggregateRow agg;
    agg.group = key;
    for (const auto& col : r.value_columns) {
      auto it = bucket.find(col);
      AggregateStats st;
      if (it != bucket.end() && !it->second.empty()) {
        const auto& vals = it->second;
        st.count = vals.size();
        double sum = 0.0;
        for (double v : vals) sum += v;
        st.mean = sum / static_cast<double>(vals.size());
        if (vals.size() > 1 && std::isfinite(st.mean)) {
          double sq = 0.0;
          for (double v : vals) sq += (v - st.mean) * (v - st.mean);
          st.stddev = std::sqrt(sq / static_cast<double>(vals.size() - 1));
        }
      }
      agg.stats[col] = st;
    }
    out.push_back(std::move(agg));
  }
  return out;
}

inline bool aggregate_stats_equal(const AggregateStats& a, const AggregateStats& b) {
  auto close = [](double x, double y) {
    if (std::isinf(x) || std::isinf(y)) return x == y;
    return std::fabs(x - y) <= 1e-12 * std::max({1.0, std::fabs(x), std::fabs(y)});
  };
  return a.count == b.count && close(a.mean, b.mean) && close(a.stddev, b.stddev);
}

// Aggregates must be recomputable from the rows; a mismatch is an internal
// invariant violation (CLI exit code 2).
inline void verify_aggregates(const MetricReport& r) {
  const auto fresh = recompute_aggregates(r);
  require(fresh.size() == r.aggregates.size(), errc::internal_error,
          "aggregate group count mismatch");
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    require(fresh[i].group == r.aggregates[i].group, errc::internal_error,
            "aggregate group key mismatch");
    for (const auto& [col, st] : fresh[i].stats)
      require(aggregate_stats_equal(st, r.aggregates[i].stats.at(col)), errc::internal_error,
              "aggregate value mismatch in column " + col);
  }
}

namespace report_detail {

inline nlohmann::json number_or_sentinel(double v) {
  if (std::isinf(v)) return v > 0 ? nlohmann::json("inf") : nlohmann::json("-inf");
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace report_detail

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["kind"] = r.kind;
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["inputs"] = nlohmann::json::array();
  for (const auto& in : r.inputs)
    j["inputs"].push_back({{"path", in.path}, {"fnv1a64", in.fnv1a64}});
  j["columns"] = r.columns;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& cell : row) {
      if (cell.is_number_float())
        jr.push_back(report_detail::number_or_sentinel(cell.get<double>()));
      else
        jr.push_back(cell);
    }
    j["rows"].push_back(std::move(jr));
  }
  j["group_by"] = r.group_by;
  j["value_columns"] = r.value_columns;
  j["aggregates"] = nlohmann::json::array();
  for (const auto& agg : r.aggregates) {
    nlohmann::json ja;
    ja["group"] = agg.group;
    for (const auto& [col, st] : agg.stats)
      ja["stats"][col] = {{"mean", report_detail::number_or_sentinel(st.mean)},
                          {"stddev", report_detail::number_or_sentinel(st.stddev)},
                          {"count", st.count}};
    j["aggregates"].push_back(std::move(ja));
  }
  j["notes"] = r.notes;
  return j;
}

inline std::string rows_to_csv(const MetricReport& r) {
  std::string out = "# schema_version=" + std::to_string(kReportSchemaVersion) + " tool=" +
                    kToolName + "/" + kToolVersion + " kind=" + r.kind + "\n";
  for (std::size_t c = 0; c < r.columns.size(); ++c)
    out += (c ? "," : "") + r.columns[c];
  out += "\n";
  for (const auto& row : r.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out += (c ? "," : "") + report_detail::cell_to_csv(row[c]);
    out += "\n";
  }
  return out;
}

inline std::string aggregates_to_csv(const MetricReport& r) {
  std::string out = "# schema_version=" + std::to_string(kReportSchemaVersion) + " tool=" +
                    kToolName + "/" + kToolVersion + " kind=" + r.kind + "\n";
  for (std::size_t c = 0; c < r.group_by.size(); ++c) out += (c ? "," : "") + r.group_by[c];
  for (const auto& col : r.value_columns)
    out += "," + col + "_mean," + col + "_stddev," + col + "_count";
  out += "\n";
  for (const auto& agg : r.aggregates) {
    for (std::size_t c = 0; c < agg.group.size(); ++c) out += (c ? "," : "") + agg.group[c];
    for (const auto& col : r.value_columns) {
      const auto& st = agg.stats.at(col);
      out += "," + report_detail::format_double(st.mean) + "," +
             report_detail::format_double(st.stddev) + "," + std::to_string(st.count);
    }
    out += "\n";
  }
  return out;
}

enum class ReportFormat { Csv, Json, Both };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  if (s == "both") return ReportFormat::Both;
  fail(errc::param_error, "unknown format '" + s + "' (expected csv, json or both)");
}

// Writes <base>.json and/or <base>.csv + <base>_aggregates.csv under
// out_dir. Verifies the aggregate invariant first.
inline std::vector<std::string> emit_report(const MetricReport& r, const std::string& out_dir,
                                            const std::string& base, ReportFormat format) {
  verify_aggregates(r);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  auto write_file = [&](const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
    out << content;
    written.push_back(path);
  };
  if (format == ReportFormat::Json || format == ReportFormat::Both)
    write_file(base + ".json", report_to_json(r).dump(2) + "\n");
  if (format == ReportFormat::Csv || format == ReportFormat::Both) {
    write_file(base + ".csv", rows_to_csv(r));
    write_file(base + "_aggregates.csv", aggregates_to_csv(r));
  }
  return written;
}

}  // namespace syntheval
