#include "doa/bench.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "doa/covariance_ops.hpp"
#include "doa/rng.hpp"
#include "doa/subspace_estimators.hpp"
#include "doa/surrogate_net.hpp"
#include "doa/trainer.hpp"

namespace doa {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

const std::vector<std::string> kKnownEstimators = {
    "music",     "rootmusic",     "esprit",     "mvdr",     "bb_music",
    "net_music", "net_rootmusic", "net_esprit", "net_mvdr"};
const std::vector<std::string> kKnownPreprocessing = {"none", "sps", "fb"};
const std::vector<std::string> kKnownAxes = {"snr", "snapshots", "eta", "sigma_sv", "fs"};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + value +
                      "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + value + "'");
}

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

void validate_config(const RunConfig& c) {
  if (c.num_sensors < 2) throw ConfigError("sensors must be >= 2");
  if (c.num_sources < 1 || c.num_sources >= c.num_sensors)
    throw ConfigError("sources must satisfy 1 <= sources < sensors");
  for (int m : c.source_count_choices)
    if (m < 1 || m >= c.num_sensors)
      throw ConfigError("source_choices entries must satisfy 1 <= M < sensors");
  if (c.num_snapshots < 1) throw ConfigError("snapshots must be >= 1");
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (c.sweep_values.empty()) throw ConfigError("sweep_values must be nonempty");
  if (!contains(kKnownAxes, c.sweep_axis))
    throw ConfigError("unknown sweep_axis '" + c.sweep_axis + "'");
  if (c.estimators.empty()) throw ConfigError("estimators must be nonempty");
  for (const std::string& e : c.estimators)
    if (!contains(kKnownEstimators, e)) throw ConfigError("unknown estimator '" + e + "'");
  if (c.preprocessing.empty()) throw ConfigError("preprocessing must be nonempty");
  for (const std::string& p : c.preprocessing)
    if (!contains(kKnownPreprocessing, p))
      throw ConfigError("unknown preprocessing '" + p + "'");
  if (c.eta < 0.0 || c.eta >= 1.0) throw ConfigError("eta must lie in [0, 1)");
  if (c.sigma_sv < 0.0) throw ConfigError("sigma_sv must be nonnegative");
  if (c.bb_bins < 1) throw ConfigError("bb_bins must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (c.tau_max < 1) throw ConfigError("tau_max must be >= 1");
  if (c.dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
}

// A sweep cell's seed depends on the value itself, so a one-value config
// reproduces any row of a larger sweep bit for bit.
std::uint64_t cell_seed_for(std::uint64_t run_seed, double sweep_value) {
  return mix_seed(run_seed, std::bit_cast<std::uint64_t>(sweep_value));
}

Scenario apply_axis(const RunConfig& config, const Scenario& base, double value) {
  Scenario sc = base;
  if (config.sweep_axis == "snr") {
    sc.snr_db = value;
  } else if (config.sweep_axis == "snapshots") {
    int t = static_cast<int>(std::llround(value));
    if (t < 1) throw ConfigError("snapshots sweep value must be >= 1");
    sc.num_snapshots = t;
  } else if (config.sweep_axis == "eta") {
    if (value < 0.0 || value >= 1.0) throw ConfigError("eta sweep value must lie in [0, 1)");
    // applied per trial via the geometry redraw below
  } else if (config.sweep_axis == "sigma_sv") {
    if (value < 0.0) throw ConfigError("sigma_sv sweep value must be nonnegative");
    sc.geometry.steering_noise_std = value;
  } else if (config.sweep_axis == "fs") {
    if (!(value > 0.0)) throw ConfigError("fs sweep value must be positive");
    sc.ofdm.sample_rate_hz = value;
    // one-second observation window: the snapshot count follows the rate
    sc.num_snapshots = static_cast<int>(std::llround(value));
  }
  return sc;
}

double effective_eta(const RunConfig& config, double sweep_value) {
  return config.sweep_axis == "eta" ? sweep_value : config.eta;
}

struct Pipeline {
  std::string estimator;
  std::string preproc;
};

std::vector<Pipeline> build_pipelines(const RunConfig& config) {
  std::vector<Pipeline> pipelines;
  for (const std::string& e : config.estimators) {
    const bool single_route = e == "bb_music" || e.rfind("net_", 0) == 0;
    if (single_route) {
      pipelines.push_back({e, "none"});
    } else {
      for (const std::string& p : config.preprocessing) pipelines.push_back({e, p});
    }
  }
  return pipelines;
}

DoaEstimate run_pipeline(const Pipeline& pipeline, const DatasetSample& sample,
                         const RunConfig& config, const Scenario& scenario,
                         const SurrogateModel* model) {
  const int n = static_cast<int>(sample.snapshots.rows());
  const int m_true = static_cast<int>(sample.thetas_rad.size());

  if (pipeline.estimator == "bb_music") {
    int m_hat = std::min(m_true, n - 1);
    // Short windows cannot supply bb_bins DFT bins; adapt to the window so a
    // snapshots/fs sweep degrades gracefully instead of aborting.
    const int bins = std::min<int>(config.bb_bins, static_cast<int>(sample.snapshots.cols()));
    return broadband_music(sample.snapshots, m_hat, bins,
                           scenario.ofdm.sample_rate_hz, scenario.ofdm.bandwidth_hz);
  }

  const bool net = pipeline.estimator.rfind("net_", 0) == 0;
  const std::string base = net ? pipeline.estimator.substr(4) : pipeline.estimator;

  CovarianceLike cov;
  ArrayGeometry geometry = ArrayGeometry::nominal(n);
  if (net) {
    cov = surrogate_covariance(*model, sample.snapshots);
  } else if (pipeline.preproc == "sps") {
    const int subarray = n / 2 + 1;
    cov = spatial_smoothing(sample.snapshots, subarray);
    geometry = ArrayGeometry::nominal(subarray);
  } else if (pipeline.preproc == "fb") {
    cov = forward_backward(empirical_covariance(sample.snapshots));
  } else {
    cov = empirical_covariance(sample.snapshots);
  }

  const int rows = static_cast<int>(cov.matrix.rows());
  std::optional<int> m_opt;
  if (config.m_known) m_opt = std::min(m_true, rows - 1);

  if (base == "music") {
    SubspaceDecomposition dec = decompose(cov, m_opt);
    return music_doa(music_spectrum(dec, geometry), dec.num_sources_est);
  }
  if (base == "rootmusic") {
    SubspaceDecomposition dec = decompose(cov, m_opt);
    return rootmusic_doa(dec, dec.num_sources_est).first;
  }
  if (base == "esprit") {
    int m_hat = m_opt ? *m_opt : decompose(cov).num_sources_est;
    return esprit_doa(cov, std::min(m_hat, rows - 2));
  }
  if (base == "mvdr") {
    int m_hat = m_opt ? *m_opt : decompose(cov).num_sources_est;
    return music_doa(mvdr_beampattern(cov, geometry), m_hat);
  }
  throw ConfigError("unknown estimator '" + pipeline.estimator + "'");
}

void write_eigvals_csv(const Eigen::VectorXd& eigenvalues, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "index,normalized_eigenvalue\n";
  const double top = std::max(eigenvalues(0), 1e-300);
  char line[64];
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    std::snprintf(line, sizeof(line), "%ld,%.17g\n", static_cast<long>(i),
                  eigenvalues(i) / top);
    out << line;
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: '" +
                        line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));

    if (key == "sensors") {
      config.num_sensors = static_cast<int>(parse_long(key, value));
    } else if (key == "sources") {
      config.num_sources = static_cast<int>(parse_long(key, value));
    } else if (key == "thetas_deg") {
      config.thetas_rad.clear();
      for (const std::string& item : split_list(value))
        config.thetas_rad.push_back(parse_double(key, item) * kDegToRad);
    } else if (key == "source_choices") {
      config.source_count_choices.clear();
      for (const std::string& item : split_list(value))
        config.source_count_choices.push_back(static_cast<int>(parse_long(key, item)));
    } else if (key == "snapshots") {
      config.num_snapshots = static_cast<int>(parse_long(key, value));
    } else if (key == "snr_db") {
      config.snr_db = parse_double(key, value);
    } else if (key == "coherent") {
      config.coherent = parse_bool(key, value);
    } else if (key == "wideband") {
      config.wideband = parse_bool(key, value);
    } else if (key == "subcarriers") {
      config.ofdm_subcarriers = static_cast<int>(parse_long(key, value));
    } else if (key == "bandwidth_hz") {
      config.ofdm_bandwidth_hz = parse_double(key, value);
    } else if (key == "sample_rate_hz") {
      config.sample_rate_hz = parse_double(key, value);
    } else if (key == "min_separation_deg") {
      config.min_separation_rad = parse_double(key, value) * kDegToRad;
    } else if (key == "eta") {
      config.eta = parse_double(key, value);
    } else if (key == "sigma_sv") {
      config.sigma_sv = parse_double(key, value);
    } else if (key == "estimators") {
      config.estimators = split_list(value);
    } else if (key == "preprocessing") {
      config.preprocessing = split_list(value);
    } else if (key == "checkpoint") {
      config.checkpoint_path = value;
    } else if (key == "trials") {
      config.trials = static_cast<int>(parse_long(key, value));
    } else if (key == "sweep_axis") {
      config.sweep_axis = value;
    } else if (key == "sweep_values") {
      config.sweep_values.clear();
      for (const std::string& item : split_list(value))
        config.sweep_values.push_back(parse_double(key, item));
    } else if (key == "out_dir") {
      config.out_dir = value;
    } else if (key == "seed") {
      config.seed = parse_u64(key, value);
    } else if (key == "m_known") {
      config.m_known = parse_bool(key, value);
    } else if (key == "bb_bins") {
      config.bb_bins = static_cast<int>(parse_long(key, value));
    } else if (key == "learning_rate") {
      config.learning_rate = parse_double(key, value);
    } else if (key == "batch_size") {
      config.batch_size = static_cast<int>(parse_long(key, value));
    } else if (key == "epochs") {
      config.epochs = static_cast<int>(parse_long(key, value));
    } else if (key == "epsilon") {
      config.epsilon = parse_double(key, value);
    } else if (key == "tau_max") {
      config.tau_max = static_cast<int>(parse_long(key, value));
    } else if (key == "dataset_size") {
      config.dataset_size = static_cast<int>(parse_long(key, value));
    } else if (key == "dataset") {
      config.dataset_path = value;
    } else {
      throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  validate_config(config);
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

Scenario scenario_from_config(const RunConfig& config) {
  Scenario sc;
  sc.geometry = config.eta > 0.0
                    ? ArrayGeometry::miscalibrated(config.num_sensors, config.eta,
                                                   mix_seed(config.seed, 4))
                    : ArrayGeometry::nominal(config.num_sensors);
  sc.geometry.steering_noise_std = config.sigma_sv;
  sc.num_sources = config.num_sources;
  sc.thetas_rad = config.thetas_rad;
  sc.source_count_choices = config.source_count_choices;
  sc.num_snapshots = config.num_snapshots;
  sc.snr_db = config.snr_db;
  sc.coherence = config.coherent ? Coherence::kFullyCoherent : Coherence::kNonCoherent;
  sc.kind = config.wideband ? SignalKind::kOfdm : SignalKind::kNarrowband;
  sc.ofdm.num_subcarriers = config.ofdm_subcarriers;
  sc.ofdm.bandwidth_hz = config.ofdm_bandwidth_hz;
  sc.ofdm.sample_rate_hz = config.sample_rate_hz;
  sc.min_separation_rad = config.min_separation_rad;
  sc.rng_seed = config.seed;
  return sc;
}

MetricsTable run_sweep(const RunConfig& config) {
  validate_config(config);
  SurrogateModel model;
  bool have_model = false;
  for (const std::string& e : config.estimators)
    if (e.rfind("net_", 0) == 0) have_model = true;
  if (have_model) {
    // Checked here rather than at parse time so a command-line --checkpoint
    // can supply the path for a config file that lists net_* estimators.
    if (config.checkpoint_path.empty())
      throw ConfigError("a net_* estimator is listed but no checkpoint is configured");
    model = load_checkpoint(config.checkpoint_path);
    if (model.num_sensors != config.num_sensors)
      throw ConfigError("checkpoint was trained for " + std::to_string(model.num_sensors) +
                        " sensors but the scenario has " + std::to_string(config.num_sensors));
  }

  const Scenario base = scenario_from_config(config);
  const std::vector<Pipeline> pipelines = build_pipelines(config);

  MetricsTable table;
  for (double value : config.sweep_values) {
    Scenario cell = apply_axis(config, base, value);
    cell.rng_seed = cell_seed_for(config.seed, value);
    const double eta = effective_eta(config, value);

    std::vector<double> sum(pipelines.size(), 0.0);
    std::vector<double> sum_sq(pipelines.size(), 0.0);

    for (int trial = 0; trial < config.trials; ++trial) {
      Scenario sc = cell;
      if (eta > 0.0) {
        sc.geometry = ArrayGeometry::miscalibrated(
            config.num_sensors, eta,
            mix_seed(mix_seed(cell.rng_seed, 4), static_cast<std::uint64_t>(trial)));
        sc.geometry.steering_noise_std = cell.geometry.steering_noise_std;
      }
      const DatasetSample sample = generate_sample(sc, static_cast<std::uint64_t>(trial));
      for (size_t p = 0; p < pipelines.size(); ++p) {
        const DoaEstimate est =
            run_pipeline(pipelines[p], sample, config, sc, have_model ? &model : nullptr);
        const double r = rmspe_value(sample.thetas_rad, est.angles_rad);
        sum[p] += r;
        sum_sq[p] += r * r;
      }
    }

    for (size_t p = 0; p < pipelines.size(); ++p) {
      MetricsRow row;
      row.estimator = pipelines[p].estimator;
      row.preprocessing = pipelines[p].preproc;
      row.sweep_value = value;
      row.trials = config.trials;
      const double n = static_cast<double>(config.trials);
      row.rmspe_mean = sum[p] / n;
      if (config.trials > 1) {
        const double var = (sum_sq[p] - sum[p] * sum[p] / n) / (n - 1.0);
        row.rmspe_std = std::sqrt(std::max(var, 0.0));
      }
      row.mspe_db = 10.0 * std::log10(std::max(sum_sq[p] / n, 1e-300));
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void write_metrics_csv(const MetricsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "estimator,preprocessing,sweep_value,rmspe_mean,rmspe_std,mspe_db,trials\n";
  char line[256];
  for (const MetricsRow& row : table.rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.17g,%.17g,%.17g,%.17g,%ld\n",
                  row.estimator.c_str(), row.preprocessing.c_str(), row.sweep_value,
                  row.rmspe_mean, row.rmspe_std, row.mspe_db, row.trials);
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

std::string format_metrics(const MetricsTable& table) {
  std::string text =
      "estimator       preproc  sweep      rmspe_mean   rmspe_std    mspe_db   trials\n";
  char line[256];
  for (const MetricsRow& row : table.rows) {
    std::snprintf(line, sizeof(line), "%-15s %-8s %-10.4g %-12.6g %-12.6g %-9.3f %ld\n",
                  row.estimator.c_str(), row.preprocessing.c_str(), row.sweep_value,
                  row.rmspe_mean, row.rmspe_std, row.mspe_db, row.trials);
    text += line;
  }
  return text;
}

std::uint64_t config_fingerprint(const RunConfig& config) {
  std::string blob;
  auto add = [&blob](const std::string& s) {
    blob += s;
    blob += '\x1f';
  };
  auto add_d = [&add](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    add(buf);
  };
  add(std::to_string(config.num_sensors));
  add(std::to_string(config.num_sources));
  for (double v : config.thetas_rad) add_d(v);
  for (int v : config.source_count_choices) add(std::to_string(v));
  add(std::to_string(config.num_snapshots));
  add_d(config.snr_db);
  add(config.coherent ? "c" : "nc");
  add(config.wideband ? "wb" : "nb");
  add(std::to_string(config.ofdm_subcarriers));
  add_d(config.ofdm_bandwidth_hz);
  add_d(config.sample_rate_hz);
  add_d(config.min_separation_rad);
  add_d(config.eta);
  add_d(config.sigma_sv);
  for (const std::string& e : config.estimators) add(e);
  for (const std::string& p : config.preprocessing) add(p);
  add(config.checkpoint_path);
  add(std::to_string(config.trials));
  add(config.sweep_axis);
  for (double v : config.sweep_values) add_d(v);
  add(std::to_string(config.seed));
  add(config.m_known ? "mk" : "me");
  add(std::to_string(config.bb_bins));

  std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : blob) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::vector<std::string> emit_diagnostics(const RunConfig& config, const std::string& which) {
  validate_config(config);
  if (which != "spectrum" && which != "beampattern" && which != "eigvals" && which != "all")
    throw ConfigError("unknown diagnostic kind '" + which + "'");

  std::filesystem::create_directories(config.out_dir);
  const Scenario scenario = scenario_from_config(config);
  const DatasetSample sample = generate_sample(scenario, 0);
  const int n = static_cast<int>(sample.snapshots.rows());
  const int m_true = static_cast<int>(sample.thetas_rad.size());
  const ArrayGeometry geometry = ArrayGeometry::nominal(n);

  SurrogateModel model;
  bool have_model = false;
  if (!config.checkpoint_path.empty()) {
    model = load_checkpoint(config.checkpoint_path);
    if (model.num_sensors != n)
      throw ConfigError("checkpoint sensor count does not match the scenario");
    have_model = true;
  }

  struct Route {
    std::string name;
    CovarianceLike cov;
    ArrayGeometry geom;
  };
  std::vector<Route> routes;
  routes.push_back({"empirical", empirical_covariance(sample.snapshots), geometry});
  const int subarray = n / 2 + 1;
  routes.push_back({"sps", spatial_smoothing(sample.snapshots, subarray),
                    ArrayGeometry::nominal(subarray)});
  routes.push_back(
      {"fb", forward_backward(empirical_covariance(sample.snapshots)), geometry});
  if (have_model)
    routes.push_back({"surrogate", surrogate_covariance(model, sample.snapshots), geometry});

  std::vector<std::string> written;
  auto emit_path = [&](const std::string& filename) {
    written.push_back(filename);
    return (std::filesystem::path(config.out_dir) / filename).string();
  };

  for (const Route& route : routes) {
    const int rows = static_cast<int>(route.cov.matrix.rows());
    const int m_hat = std::min(m_true, rows - 1);
    const SubspaceDecomposition dec = decompose(route.cov, m_hat);
    if (which == "eigvals" || which == "all")
      write_eigvals_csv(dec.eigenvalues, emit_path("eigvals_" + route.name + ".csv"));
    if (which == "spectrum" || which == "all") {
      write_spectrum_csv(music_spectrum(dec, route.geom),
                         emit_path("spectrum_music_" + route.name + ".csv"));
      write_rootset_csv(rootmusic_doa(dec, m_hat).second,
                        emit_path("roots_rootmusic_" + route.name + ".csv"));
    }
    if (which == "beampattern" || which == "all")
      write_spectrum_csv(mvdr_beampattern(route.cov, route.geom),
                         emit_path("beampattern_mvdr_" + route.name + ".csv"));
  }

  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_fingerprint(config)));
  std::ofstream manifest((std::filesystem::path(config.out_dir) / "manifest.txt").string());
  if (!manifest) throw std::runtime_error("cannot open manifest for writing");
  manifest << "file,config_hash\n";
  for (const std::string& name : written) manifest << name << "," << hash_hex << "\n";
  written.push_back("manifest.txt");
  return written;
}

}  // namespace doa
