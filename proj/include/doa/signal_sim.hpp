#ifndef DOA_SIGNAL_SIM_HPP
#define DOA_SIGNAL_SIM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "doa/array_model.hpp"

namespace doa {

enum class Coherence { kNonCoherent, kFullyCoherent };
enum class SignalKind { kNarrowband, kOfdm };

struct OfdmParams {
  int num_subcarriers = 500;
  double bandwidth_hz = 500.0;    // occupied band; also fixes pitch d = c / (2B)
  double sample_rate_hz = 200.0;  // receiver sampling rate
};

// One fully specified generation setup. Angles may be listed explicitly; an
// empty list means "draw per sample, uniform over [-pi/2, pi/2] with the
// configured minimum separation".
struct Scenario {
  ArrayGeometry geometry;
  int num_sources = 1;
  std::vector<double> thetas_rad;          // empty = draw per sample
  std::vector<int> source_count_choices;   // non-empty = per-sample M drawn uniformly from here
  int num_snapshots = 100;
  double snr_db = 10.0;
  Coherence coherence = Coherence::kNonCoherent;
  SignalKind kind = SignalKind::kNarrowband;
  OfdmParams ofdm;
  double min_separation_rad = 3.0 * 0.017453292519943295;
  std::uint64_t rng_seed = 0;
};

struct DatasetSample {
  Eigen::MatrixXcd snapshots;       // N x T
  std::vector<double> thetas_rad;   // ground truth, ascending
};

using Dataset = std::vector<DatasetSample>;

// Noise power for a given SNR with unit-power sources: 10^(-snr_db / 10).
double noise_variance_from_snr_db(double snr_db);

// Draws M angles uniformly over [-pi/2, pi/2], rejecting sets whose sorted
// pairwise gaps fall below min_separation. Returned ascending.
std::vector<double> draw_thetas(std::mt19937_64& rng, int num_sources,
                                double min_separation_rad);

// Narrowband sensor block X = A(theta) S + V. Non-coherent sources draw
// independent unit-power complex Gaussian waveforms; fully coherent sources
// replicate one waveform. Pass the concrete per-sample angle list.
DatasetSample generate_narrowband(const Scenario& scenario,
                                  const std::vector<double>& thetas_rad,
                                  std::uint64_t sample_seed);

// Multicarrier wideband block: per source a dense subcarrier sum is formed,
// the array response is applied per DFT bin of the observation window, and
// white noise is added at the scenario's SNR. Requires num_snapshots >= 2.
DatasetSample generate_ofdm(const Scenario& scenario,
                            const std::vector<double>& thetas_rad,
                            std::uint64_t sample_seed);

// Sample j of the scenario's stream: per-sample structure draw (source count
// and angles when not pinned) plus waveform/noise generation, all derived
// from the substream (rng_seed, j).
DatasetSample generate_sample(const Scenario& scenario, std::uint64_t sample_index);

// count independent samples; sample j uses the substream (rng_seed, j) so the
// dataset is reproducible regardless of generation order.
Dataset generate_dataset(const Scenario& scenario, int count);

// Binary container, little-endian, bit-exact round trip.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace doa

#endif  // DOA_SIGNAL_SIM_HPP
