#pragma once

// CSV import/export. Dialect: comma separators, '.' decimal point, one
// header row, LF line endings, reals at 17 significant digits so values
// round-trip bit-exactly through decimal. Writes go to a temporary file in
// the target directory followed by an atomic rename.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aircomp/discriminant.hpp"
#include "aircomp/errors.hpp"
#include "aircomp/model.hpp"
#include "aircomp/optimizer.hpp"

namespace aircomp {

inline std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

// Writes content to a sibling temp file, then renames over the target, so a
// crash or error never leaves a partial file at the destination.
inline void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + target.parent_path().string());
  }
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path);
  }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_real(const std::string& text, const std::string& file, int line) {
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
    throw IngestionError(file + " line " + std::to_string(line) + ": bad real value '" + text +
                         "'");
  }
  return value;
}

inline long parse_integer(const std::string& text, const std::string& file, int line) {
  char* end = nullptr;
  errno = 0;
  const long value = std::strtol(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
    throw IngestionError(file + " line " + std::to_string(line) + ": bad integer '" + text + "'");
  }
  return value;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

// Labeled feature samples: header `label,f1,...,fM`, labels are 0-based
// class indices.
inline SampleTable load_samples_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw IngestionError(path + ": empty file");
  const auto header = detail::split_csv(lines[0]);
  if (header.size() < 2 || header[0] != "label") {
    throw IngestionError(path + " line 1: expected header 'label,f1,...,fM'");
  }
  const int features = static_cast<int>(header.size()) - 1;
  std::vector<std::pair<int, std::vector<double>>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i) + 1;
    const auto fields = detail::split_csv(lines[i]);
    if (static_cast<int>(fields.size()) != features + 1) {
      throw IngestionError(path + " line " + std::to_string(line_no) + ": expected " +
                           std::to_string(features + 1) + " fields, got " +
                           std::to_string(fields.size()));
    }
    const long label = detail::parse_integer(fields[0], path, line_no);
    if (label < 0) throw IngestionError(path + " line " + std::to_string(line_no) +
                                        ": negative class label");
    std::vector<double> values(static_cast<std::size_t>(features));
    for (int m = 0; m < features; ++m) {
      values[static_cast<std::size_t>(m)] = detail::parse_real(fields[m + 1], path, line_no);
    }
    rows.emplace_back(static_cast<int>(label), std::move(values));
  }
  if (rows.empty()) throw IngestionError(path + ": no sample rows");
  SampleTable table;
  table.features.resize(static_cast<int>(rows.size()), features);
  table.labels.resize(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.labels(static_cast<int>(i)) = rows[i].first;
    for (int m = 0; m < features; ++m) {
      table.features(static_cast<int>(i), m) = rows[i].second[static_cast<std::size_t>(m)];
    }
  }
  return table;
}

// Statistics triplet: class means (`l,m,mu`), feature variances
// (`m,sigma2`), sensing noise (`k,m,delta2`).
inline void write_statistics_csv(const std::string& means_path, const std::string& variances_path,
                                 const std::string& sensing_path, const FeatureStatistics& stats) {
  std::string means = "l,m,mu\n";
  for (int l = 0; l < stats.num_classes(); ++l) {
    for (int m = 0; m < stats.num_features(); ++m) {
      means += std::to_string(l) + "," + std::to_string(m) + "," +
               format_real(stats.class_means(l, m)) + "\n";
    }
  }
  std::string variances = "m,sigma2\n";
  for (int m = 0; m < stats.num_features(); ++m) {
    variances += std::to_string(m) + "," + format_real(stats.feature_variances(m)) + "\n";
  }
  std::string sensing = "k,m,delta2\n";
  for (int k = 0; k < stats.num_devices(); ++k) {
    for (int m = 0; m < stats.num_features(); ++m) {
      sensing += std::to_string(k) + "," + std::to_string(m) + "," +
                 format_real(stats.sensing_noise_variances(k, m)) + "\n";
    }
  }
  write_text_atomic(means_path, means);
  write_text_atomic(variances_path, variances);
  write_text_atomic(sensing_path, sensing);
}

inline FeatureStatistics load_statistics_csv(const std::string& means_path,
                                             const std::string& variances_path,
                                             const std::string& sensing_path) {
  const auto load_triples = [](const std::string& path, const std::string& header) {
    const auto lines = detail::read_lines(path);
    if (lines.empty() || lines[0] != header) {
      throw IngestionError(path + " line 1: expected header '" + header + "'");
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const int line_no = static_cast<int>(i) + 1;
      const auto fields = detail::split_csv(lines[i]);
      const std::size_t want = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
      if (fields.size() != want) {
        throw IngestionError(path + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(want) + " fields");
      }
      std::vector<double> row;
      for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
        row.push_back(static_cast<double>(detail::parse_integer(fields[j], path, line_no)));
      }
      row.push_back(detail::parse_real(fields.back(), path, line_no));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  const auto means_rows = load_triples(means_path, "l,m,mu");
  const auto var_rows = load_triples(variances_path, "m,sigma2");
  const auto sens_rows = load_triples(sensing_path, "k,m,delta2");
  int classes = 0, features = 0, devices = 0;
  for (const auto& r : means_rows) {
    classes = std::max(classes, static_cast<int>(r[0]) + 1);
    features = std::max(features, static_cast<int>(r[1]) + 1);
  }
  for (const auto& r : sens_rows) devices = std::max(devices, static_cast<int>(r[0]) + 1);
  if (classes < 2 || features < 1) throw IngestionError(means_path + ": incomplete statistics");
  FeatureStatistics stats;
  stats.class_means.setZero(classes, features);
  stats.feature_variances.setZero(features);
  stats.sensing_noise_variances.setZero(std::max(devices, 1), features);
  for (const auto& r : means_rows) {
    stats.class_means(static_cast<int>(r[0]), static_cast<int>(r[1])) = r[2];
  }
  for (const auto& r : var_rows) {
    const int m = static_cast<int>(r[0]);
    if (m < 0 || m >= features) throw IngestionError(variances_path + ": feature index out of range");
    stats.feature_variances(m) = r[1];
  }
  for (const auto& r : sens_rows) {
    stats.sensing_noise_variances(static_cast<int>(r[0]), static_cast<int>(r[1])) = r[2];
  }
  return stats;
}

// Gain table export: per-element block, per-pair block, then the scalars.
inline void write_gain_table_csv(const std::string& path, const GainTable& table) {
  const auto pairs = enumerate_pairs(table.num_classes);
  std::string out = "l,lp,m,gain_elem\n";
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (int m = 0; m < static_cast<int>(table.per_element.cols()); ++m) {
      out += std::to_string(pairs[p].first) + "," + std::to_string(pairs[p].second) + "," +
             std::to_string(m) + "," + format_real(table.per_element(static_cast<int>(p), m)) +
             "\n";
    }
  }
  out += "l,lp,gain_pair\n";
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out += std::to_string(pairs[p].first) + "," + std::to_string(pairs[p].second) + "," +
           format_real(table.per_pair(static_cast<int>(p))) + "\n";
  }
  out += "min_gain,avg_gain\n";
  out += format_real(table.min_gain) + "," + format_real(table.avg_gain) + "\n";
  write_text_atomic(path, out);
}

inline void write_trace_csv(const std::string& path, const SolveTrace& trace) {
  std::string out = "iter,T_sub,min_gain,kkt,accepted\n";
  for (const auto& rec : trace.iterations) {
    out += std::to_string(rec.iteration) + "," + format_real(rec.t_sub) + "," +
           format_real(rec.min_gain) + "," + format_real(rec.kkt) + "," +
           (rec.accepted ? "1" : "0") + "\n";
  }
  write_text_atomic(path, out);
}

inline void write_allocation_csv(const std::string& path, const PrecodingMatrix& b) {
  std::string out = "k,m,b\n";
  for (int k = 0; k < b.num_devices(); ++k) {
    for (int m = 0; m < b.num_features(); ++m) {
      out += std::to_string(k) + "," + std::to_string(m) + "," + format_real(b.b(k, m)) + "\n";
    }
  }
  write_text_atomic(path, out);
}

inline PrecodingMatrix load_allocation_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != "k,m,b") {
    throw IngestionError(path + " line 1: expected header 'k,m,b'");
  }
  int devices = 0, features = 0;
  std::vector<std::array<double, 3>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i) + 1;
    const auto fields = detail::split_csv(lines[i]);
    if (fields.size() != 3) {
      throw IngestionError(path + " line " + std::to_string(line_no) + ": expected 3 fields");
    }
    const int k = static_cast<int>(detail::parse_integer(fields[0], path, line_no));
    const int m = static_cast<int>(detail::parse_integer(fields[1], path, line_no));
    devices = std::max(devices, k + 1);
    features = std::max(features, m + 1);
    rows.push_back({static_cast<double>(k), static_cast<double>(m),
                    detail::parse_real(fields[2], path, line_no)});
  }
  if (devices == 0 || features == 0) throw IngestionError(path + ": no allocation rows");
  PrecodingMatrix b = PrecodingMatrix::zero(devices, features);
  for (const auto& r : rows) b.b(static_cast<int>(r[0]), static_cast<int>(r[1])) = r[2];
  return b;
}

}  // namespace aircomp
