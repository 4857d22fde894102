// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat typed key-value configuration:
//
//   # comment
//   box.sites = 32
//   disorder.amplitude = 1.0
//
// One `key = value` per line, no nesting, no sections. Run summaries use the
// same syntax so they can be read back with parse_key_values.

#include "lattice.hpp"
#include "waveform.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ohmlab {

struct KeyValueEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct KeyValueDocument {
  std::vector<KeyValueEntry> entries;
  std::vector<std::string> comments;  // text of '#' lines, without the marker
  std::vector<std::string> errors;

  const KeyValueEntry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline KeyValueDocument parse_key_values(std::string_view text) {
  KeyValueDocument doc;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      doc.comments.emplace_back(trim(line.substr(1)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      doc.errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      doc.errors.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    doc.entries.push_back({std::string(key), std::string(value), line_no});
  }
  return doc;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_integer(std::string_view s) {
  Int v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

enum class ExperimentKind { Passivity, Scaling, GreenKubo, Measure, Drude };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Passivity: return "passivity";
    case ExperimentKind::Scaling: return "scaling";
    case ExperimentKind::GreenKubo: return "green_kubo";
    case ExperimentKind::Measure: return "measure";
    case ExperimentKind::Drude: return "drude";
  }
  return "unknown";
}

struct ExperimentConfig {
  // box
  int dimension = 1;
  int extent = 0;  // sites per axis
  Boundary boundary = Boundary::Open;
  std::optional<int> field_first;
  std::optional<int> field_last;
  // disorder
  double disorder_amplitude = 0.0;
  std::uint64_t seed_base = 1;
  int realizations = 1;
  // KMS
  double beta = 1.0;
  double mu = 0.0;
  // process
  Envelope waveform = Envelope::SmoothBump;
  int smoothness = 2;
  double process_start = 0.0;
  double process_length = 10.0;
  double omega = 1.0;
  double strength = 0.05;
  std::vector<double> strengths;
  // grids (0 selects the documented default)
  double time_step = 0.0;
  double kernel_step = 0.01;
  double bin_width = 0.0;
  double epsilon0 = 0.0;
  // experiment
  ExperimentKind kind = ExperimentKind::Passivity;
  std::string output_directory = "results";

  FieldSpan field_span() const {
    return {field_first.value_or(0), field_last.value_or(extent - 1)};
  }
  LatticeBox box() const { return LatticeBox(dimension, extent, boundary, field_span()); }

  /// Effective configuration as sorted `key = value` lines.
  std::string canonical_text() const;
  std::string hash() const { return hex64(fnv1a(canonical_text())); }
};

/// All validation failures of a config, not only the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string s;
    for (const auto& e : errors) s += (s.empty() ? "" : "\n") + e;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace detail {

struct ConfigReader {
  std::map<std::string, const KeyValueEntry*> seen;
  std::vector<std::string> errors;

  const KeyValueEntry* get(const std::string& key) const {
    auto it = seen.find(key);
    return it == seen.end() ? nullptr : it->second;
  }

  void range_error(const KeyValueEntry& e, const std::string& what) {
    errors.push_back("line " + std::to_string(e.line) + ": " + e.key + " = " + e.value + ": " +
                     what);
  }

  void real(const std::string& key, double& out, double lo, double hi, bool lo_open = false,
            bool required = false) {
    const auto* e = get(key);
    if (!e) {
      if (required) errors.push_back("missing required key " + key);
      return;
    }
    const auto v = parse_double(e->value);
    if (!v) return range_error(*e, "not a number");
    const bool below = lo_open ? !(*v > lo) : !(*v >= lo);
    if (below || !(*v <= hi)) {
      std::ostringstream r;
      r << "out of range " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
      return range_error(*e, r.str());
    }
    out = *v;
  }

  template <typename Int>
  bool integer(const std::string& key, Int& out, Int lo, Int hi, bool required = false) {
    const auto* e = get(key);
    if (!e) {
      if (required) errors.push_back("missing required key " + key);
      return false;
    }
    const auto v = parse_integer<Int>(e->value);
    if (!v) {
      range_error(*e, "not an integer");
      return false;
    }
    if (*v < lo || *v > hi) {
      range_error(*e, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return false;
    }
    out = *v;
    return true;
  }
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "box.dimension",       "box.sites",         "box.half_width",     "box.boundary",
      "box.field_first",     "box.field_last",    "disorder.amplitude", "disorder.seed_base",
      "disorder.realizations", "kms.beta",        "kms.mu",             "process.waveform",
      "process.smoothness",  "process.start",     "process.length",     "process.omega",
      "process.strength",    "process.strengths", "grid.time_step",     "grid.kernel_step",
      "grid.bin_width",      "grid.epsilon0",     "experiment.kind",    "output.directory"};
  return keys;
}

}  // namespace detail

/// Parses and validates a config. Throws ConfigError listing every problem.
inline ExperimentConfig parse_config(std::string_view text) {
  const auto doc = parse_key_values(text);
  detail::ConfigReader rd;
  rd.errors = doc.errors;
  const auto& known = detail::known_keys();

  for (const auto& e : doc.entries) {
    if (std::find(known.begin(), known.end(), e.key) == known.end()) {
      rd.errors.push_back("line " + std::to_string(e.line) + ": unknown key " + e.key);
      continue;
    }
    auto [it, inserted] = rd.seen.emplace(e.key, &e);
    if (!inserted)
      rd.errors.push_back("duplicate key " + e.key + " at lines " +
                          std::to_string(it->second->line) + " and " + std::to_string(e.line));
  }

  ExperimentConfig c;
  rd.integer("box.dimension", c.dimension, 1, 3);
  const bool has_sites = rd.get("box.sites") != nullptr;
  const bool has_half = rd.get("box.half_width") != nullptr;
  if (has_sites == has_half) {
    rd.errors.push_back("exactly one of box.sites or box.half_width is required");
  } else if (has_sites) {
    rd.integer("box.sites", c.extent, 2, 4096);
  } else {
    int half = 0;
    if (rd.integer("box.half_width", half, 1, 2047)) c.extent = 2 * half + 1;
  }
  if (const auto* e = rd.get("box.boundary")) {
    if (e->value == "open") c.boundary = Boundary::Open;
    else if (e->value == "periodic") c.boundary = Boundary::Periodic;
    else rd.range_error(*e, "expected open or periodic");
  }
  int first = 0, last = 0;
  if (rd.integer("box.field_first", first, 0, 4095)) c.field_first = first;
  if (rd.integer("box.field_last", last, 0, 4095)) c.field_last = last;

  rd.real("disorder.amplitude", c.disorder_amplitude, 0.0, 100.0, false, true);
  rd.integer<std::uint64_t>("disorder.seed_base", c.seed_base, 0, UINT64_MAX);
  rd.integer("disorder.realizations", c.realizations, 1, 100000);

  rd.real("kms.beta", c.beta, 0.0, 1e4, true);
  rd.real("kms.mu", c.mu, -100.0, 100.0);

  if (const auto* e = rd.get("process.waveform")) {
    if (e->value == "bump_sine") c.waveform = Envelope::SmoothBump;
    else if (e->value == "sine_power_sine") c.waveform = Envelope::SinePower;
    else rd.range_error(*e, "expected bump_sine or sine_power_sine");
  }
  rd.integer("process.smoothness", c.smoothness, 2, 64);
  rd.real("process.start", c.process_start, -1e6, 1e6);
  rd.real("process.length", c.process_length, 0.0, 1e5, true);
  rd.real("process.omega", c.omega, 0.0, 1e3);
  rd.real("process.strength", c.strength, 0.0, 10.0);
  if (const auto* e = rd.get("process.strengths")) {
    std::string_view rest = e->value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      const auto v = parse_double(item);
      if (!v || !(*v > 0.0) || *v > 10.0) {
        rd.range_error(*e, "entries must be numbers in (0, 10]");
        break;
      }
      c.strengths.push_back(*v);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }

  rd.real("grid.time_step", c.time_step, 0.0, 10.0);
  rd.real("grid.kernel_step", c.kernel_step, 0.0, 10.0, true);
  rd.real("grid.bin_width", c.bin_width, 0.0, 100.0);
  rd.real("grid.epsilon0", c.epsilon0, 0.0, 100.0);

  if (const auto* e = rd.get("experiment.kind")) {
    bool ok = false;
    for (auto k : {ExperimentKind::Passivity, ExperimentKind::Scaling, ExperimentKind::GreenKubo,
                   ExperimentKind::Measure, ExperimentKind::Drude})
      if (e->value == to_string(k)) {
        c.kind = k;
        ok = true;
      }
    if (!ok) rd.range_error(*e, "expected passivity, scaling, green_kubo, measure or drude");
  } else {
    rd.errors.push_back("missing required key experiment.kind");
  }
  if (const auto* e = rd.get("output.directory")) {
    if (e->value.empty()) rd.range_error(*e, "empty path");
    else c.output_directory = e->value;
  }

  // Cross-field checks, only when the fields themselves parsed.
  if (c.extent > 0) {
    const auto span = c.field_span();
    if (span.last >= c.extent || span.first > span.last)
      rd.errors.push_back("box.field_first/box.field_last must satisfy 0 <= first <= last < sites");
    if (c.boundary == Boundary::Periodic && c.extent < 3)
      rd.errors.push_back("box.boundary = periodic needs at least 3 sites per axis");
    long long total = 1;
    for (int i = 0; i < c.dimension; ++i) total *= c.extent;
    if (total > 4096) rd.errors.push_back("box has more than 4096 sites (desk-scale limit)");
  }
  if (c.kind == ExperimentKind::Scaling) {
    if (c.strengths.size() < 3)
      rd.errors.push_back("process.strengths needs at least 3 values for kind = scaling");
    else if (*std::max_element(c.strengths.begin(), c.strengths.end()) /
                 *std::min_element(c.strengths.begin(), c.strengths.end()) < 10.0 - 1e-9)
      rd.errors.push_back("process.strengths must span at least one decade");
  }

  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return c;
}

inline std::string ExperimentConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["box.dimension"] = std::to_string(dimension);
  kv["box.sites"] = std::to_string(extent);
  kv["box.boundary"] = to_string(boundary);
  kv["box.field_first"] = std::to_string(field_span().first);
  kv["box.field_last"] = std::to_string(field_span().last);
  kv["disorder.amplitude"] = format_double(disorder_amplitude);
  kv["disorder.seed_base"] = std::to_string(seed_base);
  kv["disorder.realizations"] = std::to_string(realizations);
  kv["kms.beta"] = format_double(beta);
  kv["kms.mu"] = format_double(mu);
  kv["process.waveform"] = to_string(waveform);
  kv["process.smoothness"] = std::to_string(smoothness);
  kv["process.start"] = format_double(process_start);
  kv["process.length"] = format_double(process_length);
  kv["process.omega"] = format_double(omega);
  kv["process.strength"] = format_double(strength);
  std::string list;
  for (double s : strengths) list += (list.empty() ? "" : ",") + format_double(s);
  kv["process.strengths"] = list;
  kv["grid.time_step"] = format_double(time_step);
  kv["grid.kernel_step"] = format_double(kernel_step);
  kv["grid.bin_width"] = format_double(bin_width);
  kv["grid.epsilon0"] = format_double(epsilon0);
  kv["experiment.kind"] = to_string(kind);
  // output.directory does not enter the hash
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ohmlab
