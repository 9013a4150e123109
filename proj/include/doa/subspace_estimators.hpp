#ifndef DOA_SUBSPACE_ESTIMATORS_HPP
#define DOA_SUBSPACE_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "doa/array_model.hpp"
#include "doa/covariance_ops.hpp"

namespace doa {

// Eigendecomposition of a covariance split into signal and noise subspaces.
struct SubspaceDecomposition {
  Eigen::VectorXd eigenvalues;     // descending
  Eigen::MatrixXcd signal_basis;   // N x m_hat
  Eigen::MatrixXcd noise_basis;    // N x (N - m_hat)
  int num_sources_est = 0;
};

struct SpatialSpectrum {
  std::vector<double> grid_rad;  // uniform over [-pi/2, pi/2]
  std::vector<double> values;    // nonnegative, finite
};

struct DoaEstimate {
  std::vector<double> angles_rad;  // sorted ascending, length num_sources_est
  int num_sources_est = 0;
  bool shortfall = false;  // true when fewer peaks/roots existed than requested
};

// All roots of the noise-subspace polynomial plus the indices that were
// mapped to sources; kept around so root maps can be exported for plots.
struct RootSet {
  Eigen::VectorXcd roots;      // 2N - 2 entries
  std::vector<int> selected;   // indices into roots, |z| <= 1 side of each pair
};

constexpr double kDefaultGridResolutionRad = 0.5 * 0.017453292519943295;

// Uniform grid from -pi/2 to pi/2 inclusive of both ends (up to resolution).
std::vector<double> make_angle_grid(double resolution_rad);

// Eigenvalue-gap source counting: argmax over k of lambda_k / lambda_{k+1},
// denominators floored at 1e-12, ties broken toward the smallest k.
// Expects a descending spectrum.
int estimate_num_sources(const Eigen::VectorXd& eigenvalues_descending);

// EVD split; m_override bypasses source counting (the evaluation protocol
// feeds the true source count here).
SubspaceDecomposition decompose(const CovarianceLike& covariance,
                                std::optional<int> m_override = std::nullopt);

// value(theta) = 1 / ||U_N^H a(theta)||^2 over the angle grid.
SpatialSpectrum music_spectrum(const SubspaceDecomposition& decomposition,
                               const ArrayGeometry& geometry,
                               double grid_resolution_rad = kDefaultGridResolutionRad);

// Peak picking: strict local maxima (plateau midpoint, grid endpoints
// eligible), m_hat largest by value, sorted by angle; zero-padding with a
// shortfall flag when fewer peaks exist.
DoaEstimate music_doa(const SpatialSpectrum& spectrum, int m_hat);

// Coefficients of D(z) = sum_n f_n z^n for n = -(N-1) .. N-1, stored
// ascending (index n + N - 1), where f_n sums the n-th diagonal of
// F = U_N U_N^H. Hermitian by construction: f_{-n} = conj(f_n).
Eigen::VectorXcd rootmusic_coefficients(const SubspaceDecomposition& decomposition);

// Conjugate-reciprocal pairing of a root set: each entry is (inside index,
// partner index) with the inside member satisfying |z| <= |z_partner|.
// Pairs are ranked by the inside member's distance to the unit circle.
std::vector<std::pair<int, int>> pair_roots_by_reciprocal(const Eigen::VectorXcd& roots);

// Roots D(z), pairs them, keeps the m_hat pairs nearest the unit circle and
// maps each pair to theta = -asin(arg(z)/pi) using the circular mean of the
// pair's arguments (the mean cancels the symmetric split of double roots).
std::pair<DoaEstimate, RootSet> rootmusic_doa(const SubspaceDecomposition& decomposition,
                                              int m_hat);

// Shift-invariance estimator: least-squares rotation between the upper and
// lower sensor selections of the signal basis.
DoaEstimate esprit_doa(const CovarianceLike& covariance, int m_hat);

// Per-bin narrowband treatment of a wideband block: window DFT, contiguous
// bin groups, per-group MUSIC at the group center frequency, sum of unit-max
// normalized spectra. wave speed is fixed by pitch = c / (2 * bandwidth).
SpatialSpectrum broadband_music_spectrum(const Eigen::MatrixXcd& snapshots, int m_hat,
                                         int num_bins, double sample_rate_hz,
                                         double bandwidth_hz,
                                         double grid_resolution_rad = kDefaultGridResolutionRad);
DoaEstimate broadband_music(const Eigen::MatrixXcd& snapshots, int m_hat, int num_bins,
                            double sample_rate_hz, double bandwidth_hz,
                            double grid_resolution_rad = kDefaultGridResolutionRad);

// value(theta) = 1 / (a^H R^{-1} a); R gets ridge-regularized when its
// condition number exceeds 1e12.
SpatialSpectrum mvdr_beampattern(const CovarianceLike& covariance,
                                 const ArrayGeometry& geometry,
                                 double grid_resolution_rad = kDefaultGridResolutionRad);

// Plain comma-separated exports for plotting.
void write_spectrum_csv(const SpatialSpectrum& spectrum, const std::string& path);
void write_rootset_csv(const RootSet& roots, const std::string& path);

}  // namespace doa

#endif  // DOA_SUBSPACE_ESTIMATORS_HPP
