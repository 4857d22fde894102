// SPDX-License-Identifier: Apache-2.0
#include "ohmlab/io.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <string>

using namespace ohmlab;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal =
    "experiment.kind = passivity\n"
    "box.sites = 8\n"
    "disorder.amplitude = 1.0\n";

std::string with(const std::string& extra) { return kMinimal + extra; }

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& m : e.errors())
    if (m.find(needle) != std::string::npos) return true;
  return false;
}

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("config was accepted: " << text);
  return ConfigError({});
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ohmlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string without_wall_clock(const std::string& text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = text.substr(pos, end - pos);
    if (line.rfind("wall_clock_seconds", 0) != 0) out += line + "\n";
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("parse_config defaults", "[experiment][config]") {
  const auto c = parse_config(kMinimal);
  CHECK(c.kind == ExperimentKind::Passivity);
  CHECK(c.dimension == 1);
  CHECK(c.extent == 8);
  CHECK(c.boundary == Boundary::Open);
  CHECK(c.disorder_amplitude == 1.0);
  CHECK(c.realizations >= 1);
  CHECK(c.beta == 1.0);
  CHECK(c.mu == 0.0);
  CHECK(c.process_length == 10.0);
  CHECK(c.omega == 1.0);
  CHECK(c.time_step == 0.0);
  CHECK(c.box().site_count() == 8);
  CHECK(c.hash().size() == 16);
}

TEST_CASE("parse_config errors", "[experiment][config]") {
  SECTION("negative disorder names the key") {
    const auto e = config_error("experiment.kind = passivity\nbox.sites = 8\ndisorder.amplitude = -1\n");
    CHECK(mentions(e, "disorder.amplitude"));
  }
  SECTION("duplicate key lists both lines") {
    const auto e = config_error(with("box.sites = 9\n"));
    CHECK(mentions(e, "duplicate key box.sites at lines 2 and 4"));
  }
  SECTION("unknown key") {
    CHECK(mentions(config_error(with("box.colour = red\n")), "box.colour"));
  }
  SECTION("missing required key") {
    CHECK(mentions(config_error("box.sites = 8\ndisorder.amplitude = 1\n"), "experiment.kind"));
  }
  SECTION("all errors are collected") {
    const auto e = config_error("experiment.kind = passivity\nbox.sites = 8\ndisorder.amplitude = -1\nfoo = 1\n");
    CHECK(e.errors().size() >= 2);
  }
  SECTION("sites and half width are exclusive") {
    CHECK(mentions(config_error(with("box.half_width = 3\n")), "box.sites"));
  }
  SECTION("scaling strengths must span a decade") {
    const std::string base = "experiment.kind = scaling\nbox.sites = 8\ndisorder.amplitude = 1\n";
    CHECK_NOTHROW(parse_config(base + "process.strengths = 0.001, 0.01, 0.1\n"));
    CHECK(mentions(config_error(base + "process.strengths = 0.02, 0.03, 0.05\n"), "process.strengths"));
  }
}

TEST_CASE("canonical text ignores the output directory", "[experiment][config]") {
  const auto a = parse_config(with("output.directory = a\n"));
  const auto b = parse_config(with("output.directory = b\n"));
  const auto c = parse_config(with("kms.beta = 2\n"));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(parse_config(a.canonical_text()).hash() == a.hash());
}

TEST_CASE("passivity experiment", "[experiment][run]") {
  auto c = parse_config(with("disorder.realizations = 10\nprocess.strength = 0.05\nprocess.length = 6\n"));
  const auto record = run_experiment(c);
  REQUIRE(record.realizations.size() == 10);
  for (const auto& r : record.realizations) {
    CHECK(r.seed == c.seed_base + static_cast<std::uint64_t>(r.index));
    CHECK(r.values.at("passive") == 1.0);
  }
  CHECK(record.metadata.at("passive_count") == "10/10");
  CHECK(record.aggregates.at("work").count == 10);

  SECTION("outputs are deterministic apart from wall-clock time") {
    const auto again = run_experiment(c, {2, std::nullopt});
    const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
    const auto f1 = export_results(record, d1);
    const auto f2 = export_results(again, d2);
    REQUIRE(f1.size() == f2.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
      CHECK(f1[i].filename() == f2[i].filename());
      CHECK(without_wall_clock(read_text(f1[i])) == without_wall_clock(read_text(f2[i])));
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
  }
  SECTION("seed override changes the realizations") {
    const auto other = run_experiment(c, {1, 77});
    CHECK(other.realizations.front().seed == 77);
    CHECK(other.realizations.front().values.at("work") != record.realizations.front().values.at("work"));
  }
}

TEST_CASE("green-kubo experiment", "[experiment][run]") {
  const auto c = parse_config(
      "experiment.kind = green_kubo\nbox.sites = 6\ndisorder.amplitude = 1\n"
      "disorder.realizations = 2\nprocess.omega = 1.3\n");
  const auto record = run_experiment(c);
  for (const auto& r : record.realizations) {
    CHECK(r.values.at("relative_error_time_vs_mu_tilde") <= tol::kJouleRelative);
    CHECK(r.values.at("relative_error_forms") <= tol::kJouleFormsRelative);
  }
}

TEST_CASE("export and read back", "[experiment][io]") {
  SECTION("measure histograms") {
    const auto c = parse_config(
        "experiment.kind = measure\nbox.sites = 8\ndisorder.amplitude = 1\ndisorder.realizations = 4\n");
    const auto record = run_experiment(c);
    const auto dir = scratch_dir("measure");
    export_results(record, dir);
    const auto text = read_text(dir / "mu_tilde.hist");
    CHECK(text.find("# nu_center weight stderr") != std::string::npos);
    CHECK(text.find("# config_hash: " + record.config_hash) != std::string::npos);
    const auto h = read_histogram(dir / "mu_tilde.hist");
    const auto& expected = record.histograms.at("mu_tilde");
    REQUIRE(h.size() == expected.size());
    CHECK(h.width == Catch::Approx(expected.width));
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(h.weight[i] == expected.weight[i]);
      CHECK(h.stderr_[i] == expected.stderr_[i]);
    }
    const auto summary = read_summary(dir / "summary.txt");
    REQUIRE(summary.find("config_hash"));
    CHECK(summary.find("config_hash")->value == record.config_hash);
    CHECK(summary.find("mean.mu_tilde_mass")->value ==
          format_double(record.aggregates.at("mu_tilde_mass").mean));
    fs::remove_all(dir);
  }
  SECTION("scaling series and slope") {
    const auto c = parse_config(
        "experiment.kind = scaling\nbox.sites = 8\ndisorder.amplitude = 1\n"
        "process.strengths = 0.002, 0.005, 0.02, 0.05\nprocess.length = 6\n");
    const auto record = run_experiment(c);
    const auto dir = scratch_dir("scaling");
    export_results(record, dir);
    REQUIRE(fs::exists(dir / "scaling_r000.dat"));
    const auto series = read_series(dir / "scaling_r000.dat");
    CHECK(series.size() == record.series.at("scaling_r000").size());
    CHECK(read_summary(dir / "summary.txt").find("mean.slope") != nullptr);
    fs::remove_all(dir);
  }
  SECTION("empty record is refused") {
    CHECK_THROWS_AS(export_results(RunRecord{}, scratch_dir("empty")), std::invalid_argument);
  }
}

TEST_CASE("ensemble means are stable under more realizations", "[experiment][statistics]") {
  const std::string base = "experiment.kind = measure\nbox.sites = 8\ndisorder.amplitude = 1\n";
  const auto small = run_experiment(parse_config(base + "disorder.realizations = 20\n"));
  const auto large = run_experiment(parse_config(base + "disorder.realizations = 40\n"));
  for (const char* key : {"mu_tilde_mass", "mu_mass"}) {
    const auto& a = small.aggregates.at(key);
    const auto& b = large.aggregates.at(key);
    INFO(key << ": " << a.mean << " ± " << a.stderr_ << " vs " << b.mean << " ± " << b.stderr_);
    CHECK(std::abs(a.mean - b.mean) <= 3.0 * std::hypot(a.stderr_, b.stderr_));
  }
}
