#include "doa/signal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "doa/rng.hpp"

namespace doa {

namespace {

constexpr double kPi = std::numbers::pi;

// Substream labels so structural draws (which angles, how many sources) never
// interleave with waveform draws.
constexpr std::uint64_t kStreamWaveform = 1;
constexpr std::uint64_t kStreamStructure = 2;

void check_scenario_sources(const Scenario& scenario, int num_sources) {
  if (num_sources < 1 || num_sources >= scenario.geometry.num_sensors) {
    throw std::invalid_argument("signal_sim: need 1 <= sources < sensors");
  }
}

// Unit-power waveform rows: independent CN(0,1) per source, or one shared
// row replicated when the sources are fully coherent.
Eigen::MatrixXcd draw_source_block(std::mt19937_64& rng, int num_sources,
                                   int num_snapshots, Coherence coherence) {
  Eigen::MatrixXcd s(num_sources, num_snapshots);
  const int independent_rows = coherence == Coherence::kFullyCoherent ? 1 : num_sources;
  for (int t = 0; t < num_snapshots; ++t) {
    for (int m = 0; m < independent_rows; ++m) {
      s(m, t) = complex_gaussian(rng, 1.0);
    }
  }
  for (int m = independent_rows; m < num_sources; ++m) {
    s.row(m) = s.row(0);
  }
  return s;
}

void add_noise(std::mt19937_64& rng, double variance, Eigen::MatrixXcd& x) {
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    for (Eigen::Index m = 0; m < x.rows(); ++m) {
      x(m, t) += complex_gaussian(rng, variance);
    }
  }
}

}  // namespace

double noise_variance_from_snr_db(double snr_db) {
  return std::pow(10.0, -snr_db / 10.0);
}

std::vector<double> draw_thetas(std::mt19937_64& rng, int num_sources,
                                double min_separation_rad) {
  std::uniform_real_distribution<double> u(-kPi / 2.0, kPi / 2.0);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<double> thetas(static_cast<std::size_t>(num_sources));
    for (double& theta : thetas) {
      theta = u(rng);
    }
    std::sort(thetas.begin(), thetas.end());
    bool separated = true;
    for (std::size_t i = 1; i < thetas.size(); ++i) {
      if (thetas[i] - thetas[i - 1] < min_separation_rad) {
        separated = false;
        break;
      }
    }
    if (separated) {
      return thetas;
    }
  }
  throw std::runtime_error("draw_thetas: separation constraint unsatisfiable");
}

DatasetSample generate_narrowband(const Scenario& scenario,
                                  const std::vector<double>& thetas_rad,
                                  std::uint64_t sample_seed) {
  const int num_sources = static_cast<int>(thetas_rad.size());
  check_scenario_sources(scenario, num_sources);
  if (scenario.num_snapshots < 1) {
    throw std::invalid_argument("generate_narrowband: need at least one snapshot");
  }
  std::mt19937_64 rng = make_rng(mix_seed(sample_seed, kStreamWaveform));

  const Eigen::MatrixXcd a = steering_matrix(scenario.geometry, thetas_rad, rng);
  const Eigen::MatrixXcd s = draw_source_block(rng, num_sources,
                                               scenario.num_snapshots,
                                               scenario.coherence);
  DatasetSample sample;
  sample.snapshots = a * s;
  add_noise(rng, noise_variance_from_snr_db(scenario.snr_db), sample.snapshots);
  sample.thetas_rad = thetas_rad;
  std::sort(sample.thetas_rad.begin(), sample.thetas_rad.end());
  return sample;
}

DatasetSample generate_ofdm(const Scenario& scenario,
                            const std::vector<double>& thetas_rad,
                            std::uint64_t sample_seed) {
  const int num_sources = static_cast<int>(thetas_rad.size());
  check_scenario_sources(scenario, num_sources);
  const int num_snapshots = scenario.num_snapshots;
  if (num_snapshots < 2) {
    throw std::invalid_argument("generate_ofdm: need at least two snapshots");
  }
  const OfdmParams& ofdm = scenario.ofdm;
  if (ofdm.num_subcarriers < 1 || !(ofdm.bandwidth_hz > 0.0) ||
      !(ofdm.sample_rate_hz > 0.0)) {
    throw std::invalid_argument("generate_ofdm: malformed multicarrier parameters");
  }
  std::mt19937_64 rng = make_rng(mix_seed(sample_seed, kStreamWaveform));

  // Subcarrier symbols; coherent sources share one draw.
  const int subcarriers = ofdm.num_subcarriers;
  Eigen::MatrixXcd symbols(num_sources, subcarriers);
  const int independent_rows =
      scenario.coherence == Coherence::kFullyCoherent ? 1 : num_sources;
  for (int m = 0; m < independent_rows; ++m) {
    for (int l = 0; l < subcarriers; ++l) {
      symbols(m, l) = complex_gaussian(rng, 1.0);
    }
  }
  for (int m = independent_rows; m < num_sources; ++m) {
    symbols.row(m) = symbols.row(0);
  }

  // Dense subcarrier sum per source, evaluated at sample instants t = 1..T.
  // Each subcarrier advances by a fixed phasor per sample, so the inner sweep
  // is one complex multiply per step.
  Eigen::MatrixXcd sources = Eigen::MatrixXcd::Zero(num_sources, num_snapshots);
  const double carrier_step = 2.0 * kPi * ofdm.bandwidth_hz /
                              (static_cast<double>(subcarriers) * ofdm.sample_rate_hz);
  for (int m = 0; m < num_sources; ++m) {
    for (int l = 0; l < subcarriers; ++l) {
      const std::complex<double> step = std::polar(1.0, carrier_step * l);
      std::complex<double> phase = step;  // t = 1
      for (int t = 0; t < num_snapshots; ++t) {
        sources(m, t) += symbols(m, l) * phase;
        phase *= step;
      }
    }
    sources.row(m) /= static_cast<double>(subcarriers);
  }

  // Window DFT, per-bin array response, inverse DFT. tw[i] = exp(-2*pi*j*i/T).
  std::vector<std::complex<double>> tw(static_cast<std::size_t>(num_snapshots));
  for (int i = 0; i < num_snapshots; ++i) {
    tw[static_cast<std::size_t>(i)] =
        std::polar(1.0, -2.0 * kPi * static_cast<double>(i) / num_snapshots);
  }
  Eigen::MatrixXcd spectra(num_sources, num_snapshots);
  for (int m = 0; m < num_sources; ++m) {
    for (int k = 0; k < num_snapshots; ++k) {
      std::complex<double> acc = 0.0;
      for (int t = 0; t < num_snapshots; ++t) {
        acc += sources(m, t) *
               tw[static_cast<std::size_t>(k) * t % num_snapshots];
      }
      spectra(m, k) = acc;
    }
  }

  const int num_sensors = scenario.geometry.num_sensors;
  const double wave_speed = 2.0 * ofdm.bandwidth_hz;  // pitch d = c / (2B)
  Eigen::MatrixXcd received_spectra = Eigen::MatrixXcd::Zero(num_sensors, num_snapshots);
  for (int k = 0; k < num_snapshots; ++k) {
    const double bin_hz = (k <= num_snapshots / 2 ? k : k - num_snapshots) *
                          ofdm.sample_rate_hz / num_snapshots;
    const double omega = 2.0 * kPi * bin_hz;
    for (int m = 0; m < num_sources; ++m) {
      Eigen::VectorXcd a =
          scenario.geometry.steering_noise_std > 0.0
              ? broadband_steering_vector(scenario.geometry, omega, thetas_rad[m],
                                          wave_speed, rng)
              : broadband_steering_vector(scenario.geometry, omega, thetas_rad[m],
                                          wave_speed);
      received_spectra.col(k) += a * spectra(m, k);
    }
  }

  DatasetSample sample;
  sample.snapshots = Eigen::MatrixXcd::Zero(num_sensors, num_snapshots);
  for (int t = 0; t < num_snapshots; ++t) {
    for (int k = 0; k < num_snapshots; ++k) {
      // Inverse transform reuses the table through conjugation.
      sample.snapshots.col(t) +=
          received_spectra.col(k) *
          std::conj(tw[static_cast<std::size_t>(k) * t % num_snapshots]);
    }
    sample.snapshots.col(t) /= static_cast<double>(num_snapshots);
  }
  add_noise(rng, noise_variance_from_snr_db(scenario.snr_db), sample.snapshots);
  sample.thetas_rad = thetas_rad;
  std::sort(sample.thetas_rad.begin(), sample.thetas_rad.end());
  return sample;
}

DatasetSample generate_sample(const Scenario& scenario, std::uint64_t sample_index) {
  const std::uint64_t sample_seed = mix_seed(scenario.rng_seed, sample_index);
  std::vector<double> thetas = scenario.thetas_rad;
  if (thetas.empty()) {
    std::mt19937_64 structure_rng = make_rng(mix_seed(sample_seed, kStreamStructure));
    int num_sources = scenario.num_sources;
    if (!scenario.source_count_choices.empty()) {
      std::uniform_int_distribution<std::size_t> pick(
          0, scenario.source_count_choices.size() - 1);
      num_sources = scenario.source_count_choices[pick(structure_rng)];
    }
    thetas = draw_thetas(structure_rng, num_sources, scenario.min_separation_rad);
  }
  return scenario.kind == SignalKind::kOfdm ? generate_ofdm(scenario, thetas, sample_seed)
                                            : generate_narrowband(scenario, thetas, sample_seed);
}

Dataset generate_dataset(const Scenario& scenario, int count) {
  if (count < 1) {
    throw std::invalid_argument("generate_dataset: need a positive sample count");
  }
  Dataset dataset;
  dataset.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    dataset.push_back(generate_sample(scenario, static_cast<std::uint64_t>(j)));
  }
  return dataset;
}

namespace {

constexpr char kDatasetMagic[7] = {'S', 'S', 'N', 'D', 'A', 'T', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw std::runtime_error("load_dataset: truncated file");
  }
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  if (dataset.empty()) {
    throw std::invalid_argument("save_dataset: empty dataset");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_dataset: cannot open " + path);
  }
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  const std::uint32_t num_sensors = static_cast<std::uint32_t>(dataset.front().snapshots.rows());
  const std::uint32_t count = static_cast<std::uint32_t>(dataset.size());
  write_pod(out, num_sensors);
  write_pod(out, count);
  for (const DatasetSample& sample : dataset) {
    const std::uint32_t num_sources = static_cast<std::uint32_t>(sample.thetas_rad.size());
    const std::uint32_t num_snapshots = static_cast<std::uint32_t>(sample.snapshots.cols());
    write_pod(out, num_sources);
    write_pod(out, num_snapshots);
    for (double theta : sample.thetas_rad) {
      write_pod(out, theta);
    }
    for (Eigen::Index t = 0; t < sample.snapshots.cols(); ++t) {
      for (Eigen::Index m = 0; m < sample.snapshots.rows(); ++m) {
        write_pod(out, sample.snapshots(m, t).real());
        write_pod(out, sample.snapshots(m, t).imag());
      }
    }
  }
  if (!out) {
    throw std::runtime_error("save_dataset: write failure on " + path);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_dataset: cannot open " + path);
  }
  char magic[sizeof(kDatasetMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_dataset: bad magic in " + path);
  }
  std::uint32_t num_sensors = 0;
  std::uint32_t count = 0;
  read_pod(in, num_sensors);
  read_pod(in, count);
  if (num_sensors < 2 || count < 1) {
    throw std::runtime_error("load_dataset: malformed header in " + path);
  }
  Dataset dataset;
  dataset.reserve(count);
  for (std::uint32_t j = 0; j < count; ++j) {
    std::uint32_t num_sources = 0;
    std::uint32_t num_snapshots = 0;
    read_pod(in, num_sources);
    read_pod(in, num_snapshots);
    if (num_sources < 1 || num_sources >= num_sensors || num_snapshots < 1) {
      throw std::runtime_error("load_dataset: malformed sample header in " + path);
    }
    DatasetSample sample;
    sample.thetas_rad.resize(num_sources);
    for (double& theta : sample.thetas_rad) {
      read_pod(in, theta);
    }
    sample.snapshots.resize(num_sensors, num_snapshots);
    for (std::uint32_t t = 0; t < num_snapshots; ++t) {
      for (std::uint32_t m = 0; m < num_sensors; ++m) {
        double re = 0.0;
        double im = 0.0;
        read_pod(in, re);
        read_pod(in, im);
        sample.snapshots(m, t) = {re, im};
      }
    }
    dataset.push_back(std::move(sample));
  }
  return dataset;
}

}  // namespace doa
