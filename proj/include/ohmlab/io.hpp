// SPDX-License-Identifier: Apache-2.0
#pragma once

// Result files. Every file starts with '#' header lines, the first of which
// is "# config_hash: <hex>".
//
//   summary.txt    flat key = value lines (readable with parse_key_values)
//   <name>.hist    columns "nu_center weight stderr"
//   <name>.dat     two-column series, column names in the last header line

#include "config.hpp"
#include "experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ohmlab {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string header(const RunRecord& r) {
  return "# config_hash: " + r.config_hash + "\n# code_version: " + r.code_version +
         "\n# fourier_convention: " + kFourierConvention + "\n";
}

}  // namespace detail

/// Summary as key = value lines; `wall_clock_seconds` is the only
/// non-deterministic entry.
inline std::string summary_text(const RunRecord& r) {
  std::string s = detail::header(r);
  s += "experiment.kind = " + to_string(r.config.kind) + "\n";
  s += "config_hash = " + r.config_hash + "\n";
  s += "code_version = " + r.code_version + "\n";
  s += "realizations = " + std::to_string(r.realizations.size()) + "\n";
  for (const auto& [k, v] : r.metadata) s += "meta." + k + " = " + v + "\n";
  for (const auto& [k, a] : r.aggregates) {
    s += "mean." + k + " = " + format_double(a.mean) + "\n";
    s += "stderr." + k + " = " + format_double(a.stderr_) + "\n";
  }
  for (const auto& rr : r.realizations) {
    const std::string p = "r" + std::to_string(rr.index) + ".";
    s += p + "seed = " + std::to_string(rr.seed) + "\n";
    for (const auto& [k, v] : rr.values) s += p + k + " = " + format_double(v) + "\n";
  }
  s += "wall_clock_seconds = " + format_double(r.wall_clock_seconds) + "\n";
  return s;
}

inline std::string histogram_text(const RunRecord& r, const Histogram& h) {
  std::string s = detail::header(r);
  s += "# bin_width: " + format_double(h.width) + "\n";
  s += "# realizations: " + std::to_string(h.realizations) + "\n";
  s += "# nu_center weight stderr\n";
  for (std::size_t i = 0; i < h.size(); ++i)
    s += format_double(h.center(i)) + " " + format_double(h.weight[i]) + " " +
         format_double(h.stderr_[i]) + "\n";
  return s;
}

inline std::string series_text(const RunRecord& r, const Series& series,
                               const std::string& columns) {
  std::string s = detail::header(r) + "# " + columns + "\n";
  for (const auto& [x, y] : series) s += format_double(x) + " " + format_double(y) + "\n";
  return s;
}

/// Writes summary, histograms and series; returns the written paths.
inline std::vector<std::filesystem::path> export_results(const RunRecord& record,
                                                         const std::filesystem::path& directory) {
  if (record.empty()) throw std::invalid_argument("refusing to export an empty run record");
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = directory / name;
    detail::write_file(path, text);
    written.push_back(path);
  };
  put("summary.txt", summary_text(record));
  for (const auto& [name, h] : record.histograms) put(name + ".hist", histogram_text(record, h));
  for (const auto& [name, s] : record.series) {
    const auto it = record.series_columns.find(name);
    put(name + ".dat", series_text(record, s, it == record.series_columns.end() ? "x y" : it->second));
  }
  return written;
}

// ---------------------------------------------------------------------------
// Readers

struct ColumnFile {
  std::vector<std::string> header;  // '#' lines without the marker
  std::vector<std::vector<double>> rows;

  std::string config_hash() const {
    const std::string tag = "config_hash: ";
    for (const auto& h : header)
      if (h.rfind(tag, 0) == 0) return h.substr(tag.size());
    return {};
  }
};

inline ColumnFile parse_columns(std::string_view text, std::size_t columns) {
  ColumnFile f;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      f.header.emplace_back(trim(t.substr(1)));
      continue;
    }
    std::vector<double> row;
    std::istringstream fields{std::string(t)};
    std::string item;
    while (fields >> item) {
      const auto v = parse_double(item);
      if (!v) throw IoError("line " + std::to_string(line_no) + ": bad number '" + item + "'");
      row.push_back(*v);
    }
    if (row.size() != columns)
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                    " columns");
    f.rows.push_back(std::move(row));
  }
  return f;
}

inline Histogram read_histogram(const std::filesystem::path& path) {
  const auto f = parse_columns(detail::read_file(path), 3);
  if (f.rows.empty()) throw IoError(path.string() + ": no bins");
  Histogram h;
  const std::string tag = "bin_width: ";
  for (const auto& line : f.header)
    if (line.rfind(tag, 0) == 0) h.width = parse_double(line.substr(tag.size())).value_or(0.0);
  if (!(h.width > 0.0)) throw IoError(path.string() + ": missing bin_width header");
  const std::string rtag = "realizations: ";
  for (const auto& line : f.header)
    if (line.rfind(rtag, 0) == 0) h.realizations = parse_integer<int>(line.substr(rtag.size())).value_or(1);
  h.half_bins = static_cast<int>(f.rows.size() / 2);
  for (const auto& r : f.rows) {
    h.weight.push_back(r[1]);
    h.stderr_.push_back(r[2]);
  }
  return h;
}

inline Series read_series(const std::filesystem::path& path) {
  const auto f = parse_columns(detail::read_file(path), 2);
  Series s;
  for (const auto& r : f.rows) s.emplace_back(r[0], r[1]);
  return s;
}

inline KeyValueDocument read_summary(const std::filesystem::path& path) {
  auto doc = parse_key_values(detail::read_file(path));
  if (!doc.errors.empty()) throw IoError(path.string() + ": " + doc.errors.front());
  return doc;
}

inline std::string read_text(const std::filesystem::path& path) { return detail::read_file(path); }

}  // namespace ohmlab
