#ifndef DOA_BENCH_HPP
#define DOA_BENCH_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "doa/signal_sim.hpp"

namespace doa {

// Raised for malformed configuration (bad keys, bad values, impossible
// combinations); the CLI maps it to its config-error exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One benchmark run, fully determined by a key=value config file plus the
// command-line overrides. Angles and separations are stored in radians here;
// the file format takes degrees for human convenience.
struct RunConfig {
  // Scenario
  int num_sensors = 8;
  int num_sources = 2;
  std::vector<double> thetas_rad;         // empty = drawn per trial
  std::vector<int> source_count_choices;  // non-empty = mixed source counts
  int num_snapshots = 100;
  double snr_db = 10.0;
  bool coherent = false;
  bool wideband = false;
  int ofdm_subcarriers = 500;
  double ofdm_bandwidth_hz = 500.0;
  double sample_rate_hz = 200.0;
  double min_separation_rad = 3.0 * 0.017453292519943295;
  double eta = 0.0;       // relative sensor-gap perturbation, redrawn per trial
  double sigma_sv = 0.0;  // steering-vector noise std

  // Benchmark
  std::vector<std::string> estimators = {"rootmusic"};
  std::vector<std::string> preprocessing = {"none"};
  std::string checkpoint_path;
  int trials = 1000;
  std::string sweep_axis = "snr";  // snr | snapshots | eta | sigma_sv | fs
  std::vector<double> sweep_values = {10.0};
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool m_known = true;
  int bb_bins = 50;

  // Training / dataset plumbing for the train and simulate subcommands.
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 50;
  double epsilon = 1.0;
  int tau_max = 8;
  int dataset_size = 5000;
  std::string dataset_path;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Base scenario before any sweep value is applied.
Scenario scenario_from_config(const RunConfig& config);

struct MetricsRow {
  std::string estimator;
  std::string preprocessing;
  double sweep_value = 0.0;
  double rmspe_mean = 0.0;
  double rmspe_std = 0.0;
  double mspe_db = 0.0;  // 10 log10 of the mean squared periodic error
  long trials = 0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
};

// Monte-Carlo sweep over the configured axis. Each (estimator, preprocessing)
// pipeline sees the identical per-trial sample; surrogate- and broadband-
// routed estimators run only under the "none" preprocessing row.
MetricsTable run_sweep(const RunConfig& config);

void write_metrics_csv(const MetricsTable& table, const std::string& path);
std::string format_metrics(const MetricsTable& table);

// Single-trial diagnostic exports (comma-separated text plus a manifest).
// `which` is one of "spectrum", "beampattern", "eigvals", or "all".
std::vector<std::string> emit_diagnostics(const RunConfig& config, const std::string& which);

// Stable hash of every field that influences results; stamped into manifests.
std::uint64_t config_fingerprint(const RunConfig& config);

}  // namespace doa

#endif  // DOA_BENCH_HPP
