#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "doa/bench.hpp"

using namespace doa;

namespace {

const char* kGoodConfig = R"(
# benchmark run
sensors = 8
sources = 2
snapshots = 100
snr_db = 10
coherent = false
trials = 4
estimators = rootmusic, music
preprocessing = none, sps
sweep_axis = snr
sweep_values = 0, 10
seed = 99
thetas_deg = -20.5, 33
min_separation_deg = 3
)";

}  // namespace

TEST_CASE("config parsing: values, lists, comments, degree conversion") {
  RunConfig c = parse_config_text(kGoodConfig);
  CHECK(c.num_sensors == 8);
  CHECK(c.num_sources == 2);
  CHECK(c.num_snapshots == 100);
  CHECK(c.snr_db == 10.0);
  CHECK(c.coherent == false);
  CHECK(c.trials == 4);
  REQUIRE(c.estimators.size() == 2);
  CHECK(c.estimators[1] == "music");
  REQUIRE(c.preprocessing.size() == 2);
  CHECK(c.sweep_axis == "snr");
  REQUIRE(c.sweep_values.size() == 2);
  CHECK(c.sweep_values[0] == 0.0);
  CHECK(c.seed == 99);
  REQUIRE(c.thetas_rad.size() == 2);
  CHECK(c.thetas_rad[0] == doctest::Approx(-20.5 * 0.017453292519943295).epsilon(1e-12));
  CHECK(c.min_separation_rad == doctest::Approx(3.0 * 0.017453292519943295).epsilon(1e-12));
}

TEST_CASE("config parsing: malformed input is a config error") {
  CHECK_THROWS_AS((void)parse_config_text("bogus_key = 3\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("sensors 8\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("sensors = eight\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("snr_db = 10dB\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("coherent = on\n"), ConfigError);
  // semantic validation
  CHECK_THROWS_AS((void)parse_config_text("sources = 8\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("estimators = magic\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("preprocessing = psps\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("sweep_axis = phase_of_moon\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("sweep_values =\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("eta = 1.5\n"), ConfigError);
  // net estimators need a checkpoint by sweep time (not at parse time, so a
  // command-line override can still supply the path)
  RunConfig no_ckpt = parse_config_text("estimators = net_rootmusic\ntrials = 1\n");
  CHECK_THROWS_AS((void)run_sweep(no_ckpt), ConfigError);
  CHECK_THROWS_AS((void)parse_config_file("missing_file.cfg"), ConfigError);
}

TEST_CASE("scenario construction mirrors the config") {
  RunConfig c = parse_config_text(kGoodConfig);
  Scenario sc = scenario_from_config(c);
  CHECK(sc.geometry.num_sensors == 8);
  CHECK(sc.num_snapshots == 100);
  CHECK(sc.snr_db == 10.0);
  CHECK(sc.coherence == Coherence::kNonCoherent);
  CHECK(sc.kind == SignalKind::kNarrowband);
  CHECK(sc.rng_seed == 99);
  REQUIRE(sc.thetas_rad.size() == 2);
  CHECK(sc.thetas_rad[0] < sc.thetas_rad[1]);
}

TEST_CASE("config fingerprints are stable and sensitive") {
  RunConfig a = parse_config_text(kGoodConfig);
  RunConfig b = parse_config_text(kGoodConfig);
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.snr_db = 11.0;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("run_sweep produces one row per estimator, route, and sweep value") {
  RunConfig c = parse_config_text(kGoodConfig);
  c.thetas_rad.clear();  // draw fresh angles per trial
  c.trials = 3;
  MetricsTable table = run_sweep(c);
  // 2 estimators x 2 routes x 2 sweep values
  REQUIRE(table.rows.size() == 8);
  for (const MetricsRow& row : table.rows) {
    CHECK(row.trials == 3);
    CHECK(std::isfinite(row.rmspe_mean));
    CHECK(row.rmspe_mean >= 0.0);
    CHECK(std::isfinite(row.mspe_db));
  }
}

TEST_CASE("run_sweep is deterministic and cell seeds are value-keyed") {
  RunConfig c = parse_config_text(kGoodConfig);
  c.thetas_rad.clear();
  c.trials = 3;
  c.estimators = {"rootmusic"};
  c.preprocessing = {"none"};

  MetricsTable first = run_sweep(c);
  MetricsTable second = run_sweep(c);
  REQUIRE(first.rows.size() == second.rows.size());
  for (size_t i = 0; i < first.rows.size(); ++i)
    CHECK(first.rows[i].rmspe_mean == second.rows[i].rmspe_mean);

  // a single-value sweep reproduces the matching row of the wider sweep
  RunConfig narrow = c;
  narrow.sweep_values = {10.0};
  MetricsTable alone = run_sweep(narrow);
  REQUIRE(alone.rows.size() == 1);
  CHECK(alone.rows[0].rmspe_mean == first.rows[1].rmspe_mean);
  CHECK(alone.rows[0].rmspe_std == first.rows[1].rmspe_std);
}

TEST_CASE("snapshot sweep changes the observation length") {
  RunConfig c = parse_config_text(kGoodConfig);
  c.thetas_rad.clear();
  c.trials = 2;
  c.estimators = {"rootmusic"};
  c.preprocessing = {"none"};
  c.sweep_axis = "snapshots";
  c.sweep_values = {16.0, 64.0};
  MetricsTable table = run_sweep(c);
  REQUIRE(table.rows.size() == 2);
  for (const MetricsRow& row : table.rows) CHECK(std::isfinite(row.rmspe_mean));
}

TEST_CASE("eta sweep redraws the geometry per trial deterministically") {
  RunConfig c = parse_config_text(kGoodConfig);
  c.thetas_rad.clear();
  c.trials = 3;
  c.estimators = {"rootmusic"};
  c.preprocessing = {"none"};
  c.sweep_axis = "eta";
  c.sweep_values = {0.0, 0.3};
  MetricsTable table = run_sweep(c);
  REQUIRE(table.rows.size() == 2);
  // distorted arrays must hurt
  CHECK(table.rows[1].rmspe_mean > table.rows[0].rmspe_mean);
  MetricsTable again = run_sweep(c);
  CHECK(again.rows[1].rmspe_mean == table.rows[1].rmspe_mean);
}

TEST_CASE("diagnostics write the advertised files plus a manifest") {
  RunConfig c = parse_config_text(kGoodConfig);
  c.out_dir = "test_diag_out";
  std::vector<std::string> files = emit_diagnostics(c, "all");
  CHECK(files.size() >= 10);  // 3 routes x 3 kinds + manifest
  for (const std::string& name : files) {
    CHECK(std::filesystem::exists(std::filesystem::path("test_diag_out") / name));
  }
  // manifest lists every emitted file with the config hash
  std::ifstream manifest("test_diag_out/manifest.txt");
  std::string header;
  std::getline(manifest, header);
  CHECK(header == "file,config_hash");
  int rows = 0;
  for (std::string line; std::getline(manifest, line);) ++rows;
  CHECK(rows == static_cast<int>(files.size()) - 1);
  manifest.close();
  std::filesystem::remove_all("test_diag_out");

  CHECK_THROWS_AS((void)emit_diagnostics(c, "sonogram"), ConfigError);
}
