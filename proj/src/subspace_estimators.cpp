#include "doa/subspace_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "doa/polyroot.hpp"

namespace doa {

namespace {

constexpr double kPi = std::numbers::pi;

// asin argument guard shared by every angle-mapping estimator: tiny overshoot
// is floating-point noise and gets clamped, anything larger is a logic error.
double safe_asin(double x) {
  if (x > 1.0) {
    if (x > 1.0 + 1e-9) {
      throw std::runtime_error("safe_asin: argument exceeds 1 beyond tolerance");
    }
    x = 1.0;
  } else if (x < -1.0) {
    if (x < -1.0 - 1e-9) {
      throw std::runtime_error("safe_asin: argument below -1 beyond tolerance");
    }
    x = -1.0;
  }
  return std::asin(x);
}

void finalize_estimate(DoaEstimate& estimate) {
  std::sort(estimate.angles_rad.begin(), estimate.angles_rad.end());
}

}  // namespace

std::vector<double> make_angle_grid(double resolution_rad) {
  if (!(resolution_rad > 0.0)) {
    throw std::invalid_argument("make_angle_grid: resolution must be positive");
  }
  const int steps = static_cast<int>(std::floor(kPi / resolution_rad + 1e-9));
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    grid[static_cast<std::size_t>(i)] = -kPi / 2.0 + i * resolution_rad;
  }
  return grid;
}

int estimate_num_sources(const Eigen::VectorXd& eigenvalues_descending) {
  const Eigen::Index n = eigenvalues_descending.size();
  if (n < 2) {
    throw std::invalid_argument("estimate_num_sources: need at least 2 eigenvalues");
  }
  const double max_eig = eigenvalues_descending(0);
  if (!(max_eig >= 0.0) || eigenvalues_descending(n - 1) < -1e-10 * std::max(max_eig, 1.0)) {
    throw std::invalid_argument("estimate_num_sources: spectrum must be nonnegative");
  }
  int best_k = 0;
  double best_ratio = -1.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double denom = std::max(eigenvalues_descending(k + 1), 1e-12);
    const double ratio = std::max(eigenvalues_descending(k), 0.0) / denom;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = static_cast<int>(k);
    }
  }
  return best_k + 1;
}

SubspaceDecomposition decompose(const CovarianceLike& covariance,
                                std::optional<int> m_override) {
  const Eigen::MatrixXcd& r = covariance.matrix;
  if (r.rows() != r.cols() || r.rows() < 2) {
    throw std::invalid_argument("decompose: covariance must be square, at least 2x2");
  }
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  if ((r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("decompose: input violates the Hermitian contract");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(r);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("decompose: eigensolver failed to converge");
  }
  const Eigen::Index n = r.rows();
  SubspaceDecomposition dec;
  dec.eigenvalues = solver.eigenvalues().reverse();
  Eigen::MatrixXcd vectors(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  int m_hat = m_override ? *m_override : estimate_num_sources(dec.eigenvalues);
  if (m_hat < 1 || m_hat >= n) {
    throw std::invalid_argument("decompose: source count must lie in [1, N-1]");
  }
  dec.num_sources_est = m_hat;
  dec.signal_basis = vectors.leftCols(m_hat);
  dec.noise_basis = vectors.rightCols(n - m_hat);
  return dec;
}

SpatialSpectrum music_spectrum(const SubspaceDecomposition& decomposition,
                               const ArrayGeometry& geometry,
                               double grid_resolution_rad) {
  if (decomposition.noise_basis.cols() < 1) {
    throw std::invalid_argument("music_spectrum: empty noise basis");
  }
  if (geometry.num_sensors != decomposition.noise_basis.rows()) {
    throw std::invalid_argument("music_spectrum: geometry does not match decomposition");
  }
  SpatialSpectrum spectrum;
  spectrum.grid_rad = make_angle_grid(grid_resolution_rad);
  spectrum.values.resize(spectrum.grid_rad.size());
  const Eigen::MatrixXcd noise_adj = decomposition.noise_basis.adjoint();
  for (std::size_t i = 0; i < spectrum.grid_rad.size(); ++i) {
    const Eigen::VectorXcd a = steering_vector(geometry, spectrum.grid_rad[i]);
    const double denom = std::max((noise_adj * a).squaredNorm(),
                                  std::numeric_limits<double>::min());
    spectrum.values[i] = 1.0 / denom;
  }
  return spectrum;
}

DoaEstimate music_doa(const SpatialSpectrum& spectrum, int m_hat) {
  if (m_hat < 1) {
    throw std::invalid_argument("music_doa: need m_hat >= 1");
  }
  const std::size_t n = spectrum.values.size();
  if (n != spectrum.grid_rad.size() || n < 2) {
    throw std::invalid_argument("music_doa: malformed spectrum");
  }
  // Plateau-aware strict maxima on the closed steering manifold: a ULA's
  // response at -90 deg and +90 deg is the same alternating-sign vector, so
  // the angle grid is circular and a lobe wrapping the endfire seam must
  // count as one peak, not as a maximum at each grid edge (an edge ghost
  // outranks genuine mid-range sources whenever a source sits near endfire).
  // A run of equal values counts once, located at its midpoint; a run
  // spanning the whole grid (flat spectrum) has no peaks.
  struct Peak {
    double value;
    std::size_t index;
  };
  std::vector<Peak> peaks;
  // Rotate the scan to start at a value change so no plateau run straddles
  // the scan origin.
  std::size_t origin = 0;
  while (origin < n && spectrum.values[origin] == spectrum.values[(origin + n - 1) % n]) {
    ++origin;
  }
  if (origin < n) {
    std::size_t run_start = 0;  // offsets relative to origin
    for (std::size_t i = 1; i <= n; ++i) {
      const std::size_t run_abs = (origin + run_start) % n;
      if (i == n || spectrum.values[(origin + i) % n] != spectrum.values[run_abs]) {
        const std::size_t prev_abs = (origin + run_start + n - 1) % n;
        const std::size_t next_abs = (origin + i) % n;
        if (spectrum.values[run_abs] > spectrum.values[prev_abs] &&
            spectrum.values[run_abs] > spectrum.values[next_abs]) {
          peaks.push_back({spectrum.values[run_abs], (origin + (run_start + i - 1) / 2) % n});
        }
        run_start = i;
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.value > b.value || (a.value == b.value && a.index < b.index);
  });
  DoaEstimate estimate;
  estimate.num_sources_est = m_hat;
  if (peaks.empty()) {
    // A spectrum with no maxima at all (flat) carries no direction
    // information; fall back to the zero-angle padding convention.
    while (estimate.angles_rad.size() < static_cast<std::size_t>(m_hat)) {
      estimate.angles_rad.push_back(0.0);
      estimate.shortfall = true;
    }
    finalize_estimate(estimate);
    return estimate;
  }
  // Maxima orders of magnitude below the tallest lobe are estimation-noise
  // ripples, not sources; counting them as sources sends an estimate far from
  // any true direction whenever two sources merge into one lobe (the grid
  // cannot split closely spaced directions the way root finding can). Rank
  // genuine lobes first, then fill any remaining slots with the strongest
  // grid cells at least two cells away from earlier picks, so an unresolved
  // pair yields two estimates on its shared lobe instead of one estimate on a
  // distant ripple.
  constexpr double kPeakFloorRatio = 0.05;
  constexpr std::size_t kFillSpacingCells = 2;
  std::vector<std::size_t> picks;
  for (const Peak& p : peaks) {
    if (picks.size() == static_cast<std::size_t>(m_hat)) break;
    if (p.value >= kPeakFloorRatio * peaks[0].value) picks.push_back(p.index);
  }
  if (picks.size() < static_cast<std::size_t>(m_hat)) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return spectrum.values[a] > spectrum.values[b] ||
             (spectrum.values[a] == spectrum.values[b] && a < b);
    });
    for (std::size_t idx : order) {
      if (picks.size() == static_cast<std::size_t>(m_hat)) break;
      bool spaced = true;
      for (std::size_t p : picks) {
        // Endfire grid endpoints alias to one manifold point, so distances
        // wrap with period n-1.
        std::size_t d = idx > p ? idx - p : p - idx;
        d = std::min(d, (n - 1) - d);
        if (d < kFillSpacingCells) {
          spaced = false;
          break;
        }
      }
      if (spaced) picks.push_back(idx);
    }
  }
  for (std::size_t idx : picks) estimate.angles_rad.push_back(spectrum.grid_rad[idx]);
  while (estimate.angles_rad.size() < static_cast<std::size_t>(m_hat)) {
    estimate.angles_rad.push_back(0.0);
    estimate.shortfall = true;
  }
  finalize_estimate(estimate);
  return estimate;
}

Eigen::VectorXcd rootmusic_coefficients(const SubspaceDecomposition& decomposition) {
  if (decomposition.noise_basis.cols() < 1) {
    throw std::invalid_argument("rootmusic_coefficients: empty noise basis");
  }
  const Eigen::Index n = decomposition.noise_basis.rows();
  const Eigen::MatrixXcd projector =
      decomposition.noise_basis * decomposition.noise_basis.adjoint();
  Eigen::VectorXcd coeffs(2 * n - 1);
  for (Eigen::Index diag = 0; diag < n; ++diag) {
    std::complex<double> sum = 0.0;
    for (Eigen::Index i = 0; i + diag < n; ++i) {
      sum += projector(i, i + diag);
    }
    coeffs(n - 1 + diag) = sum;
    coeffs(n - 1 - diag) = std::conj(sum);
  }
  return coeffs;
}

std::vector<std::pair<int, int>> pair_roots_by_reciprocal(const Eigen::VectorXcd& roots) {
  const int count = static_cast<int>(roots.size());
  std::vector<bool> used(static_cast<std::size_t>(count), false);
  std::vector<std::pair<int, int>> pairs;
  // Repeatedly take the globally best remaining match under the symmetric
  // pairing metric |z_i * conj(z_j) - 1|, which is 0 for exact reciprocal
  // conjugates and needs no division near z = 0.
  for (int round = 0; round + 1 < count; round += 2) {
    double best = std::numeric_limits<double>::infinity();
    int best_i = -1;
    int best_j = -1;
    for (int i = 0; i < count; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < count; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double quality = std::abs(roots(i) * std::conj(roots(j)) - 1.0);
        if (quality < best) {
          best = quality;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;
    used[static_cast<std::size_t>(best_i)] = true;
    used[static_cast<std::size_t>(best_j)] = true;
    if (std::abs(roots(best_j)) < std::abs(roots(best_i))) {
      std::swap(best_i, best_j);
    }
    pairs.emplace_back(best_i, best_j);  // (inside, outside)
  }
  return pairs;
}

std::pair<DoaEstimate, RootSet> rootmusic_doa(const SubspaceDecomposition& decomposition,
                                              int m_hat) {
  const Eigen::Index n = decomposition.noise_basis.rows();
  if (m_hat < 1 || m_hat > n - 1) {
    throw std::invalid_argument("rootmusic_doa: need 1 <= m_hat <= N-1");
  }
  RootSet root_set;
  root_set.roots = polynomial_roots(rootmusic_coefficients(decomposition));

  struct Candidate {
    double circle_distance;
    double mean_arg;
    int inside_index;
  };
  std::vector<Candidate> candidates;
  for (const auto& [inside, outside] : pair_roots_by_reciprocal(root_set.roots)) {
    const std::complex<double> z_in = root_set.roots(inside);
    const std::complex<double> z_out = root_set.roots(outside);
    if (std::abs(z_in) > 1.0 + 1e-6) {
      continue;  // broken pair entirely outside the disc; never a source
    }
    // Circular mean of the two arguments; for a split double root the two
    // members straddle the true angle symmetrically and the mean cancels
    // the O(sqrt(eps)) separation. The mean itself lives on the circle, so
    // wrap it back into (-pi, pi] before it is read as a phase.
    const double arg_in = std::arg(z_in);
    double diff = std::arg(z_out) - arg_in;
    diff -= 2.0 * kPi * std::round(diff / (2.0 * kPi));
    double mean_arg = arg_in + 0.5 * diff;
    mean_arg -= 2.0 * kPi * std::round(mean_arg / (2.0 * kPi));
    candidates.push_back({std::abs(1.0 - std::abs(z_in)), mean_arg, inside});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.circle_distance < b.circle_distance ||
           (a.circle_distance == b.circle_distance && a.mean_arg < b.mean_arg);
  });

  DoaEstimate estimate;
  estimate.num_sources_est = m_hat;
  const std::size_t kept = std::min<std::size_t>(candidates.size(),
                                                 static_cast<std::size_t>(m_hat));
  for (std::size_t i = 0; i < kept; ++i) {
    estimate.angles_rad.push_back(-safe_asin(candidates[i].mean_arg / kPi));
    root_set.selected.push_back(candidates[i].inside_index);
  }
  while (estimate.angles_rad.size() < static_cast<std::size_t>(m_hat)) {
    estimate.angles_rad.push_back(0.0);
    estimate.shortfall = true;
  }
  finalize_estimate(estimate);
  return {estimate, root_set};
}

DoaEstimate esprit_doa(const CovarianceLike& covariance, int m_hat) {
  const Eigen::Index n = covariance.matrix.rows();
  if (m_hat < 1 || m_hat > n - 2) {
    throw std::invalid_argument("esprit_doa: need 1 <= m_hat <= N-2");
  }
  const SubspaceDecomposition dec = decompose(covariance, m_hat);
  const Eigen::MatrixXcd upper = dec.signal_basis.topRows(n - 1);
  const Eigen::MatrixXcd lower = dec.signal_basis.bottomRows(n - 1);
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(upper, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(m_hat - 1) < 1e-10 * svd.singularValues()(0)) {
    throw std::runtime_error("esprit_doa: rank-deficient signal basis selection");
  }
  const Eigen::MatrixXcd rotation = svd.solve(lower);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(rotation, false);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("esprit_doa: rotation eigensolver failed");
  }
  DoaEstimate estimate;
  estimate.num_sources_est = m_hat;
  for (Eigen::Index i = 0; i < m_hat; ++i) {
    estimate.angles_rad.push_back(safe_asin(-std::arg(eig.eigenvalues()(i)) / kPi));
  }
  finalize_estimate(estimate);
  return estimate;
}

SpatialSpectrum broadband_music_spectrum(const Eigen::MatrixXcd& snapshots, int m_hat,
                                         int num_bins, double sample_rate_hz,
                                         double bandwidth_hz, double grid_resolution_rad) {
  const int num_sensors = static_cast<int>(snapshots.rows());
  const int num_snapshots = static_cast<int>(snapshots.cols());
  if (num_bins < 1 || num_snapshots < num_bins) {
    throw std::invalid_argument("broadband_music: need 1 <= bins <= snapshots");
  }
  if (m_hat < 1 || m_hat >= num_sensors) {
    throw std::invalid_argument("broadband_music: need 1 <= m_hat < sensors");
  }
  if (!(sample_rate_hz > 0.0) || !(bandwidth_hz > 0.0)) {
    throw std::invalid_argument("broadband_music: rates must be positive");
  }

  // Window DFT across snapshots; tw[i] = exp(-2*pi*j*i/T).
  std::vector<std::complex<double>> tw(static_cast<std::size_t>(num_snapshots));
  for (int i = 0; i < num_snapshots; ++i) {
    tw[static_cast<std::size_t>(i)] =
        std::polar(1.0, -2.0 * kPi * static_cast<double>(i) / num_snapshots);
  }
  Eigen::MatrixXcd spectra(num_sensors, num_snapshots);
  for (int k = 0; k < num_snapshots; ++k) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(num_sensors);
    for (int t = 0; t < num_snapshots; ++t) {
      acc += snapshots.col(t) * tw[static_cast<std::size_t>(k) * t % num_snapshots];
    }
    spectra.col(k) = acc;
  }

  const ArrayGeometry geometry = ArrayGeometry::nominal(num_sensors);
  const double wave_speed = 2.0 * bandwidth_hz;
  const std::vector<double> grid = make_angle_grid(grid_resolution_rad);
  std::vector<double> aggregate(grid.size(), 0.0);

  for (int bin = 0; bin < num_bins; ++bin) {
    const int first = static_cast<int>(static_cast<long long>(bin) * num_snapshots / num_bins);
    const int last = static_cast<int>(static_cast<long long>(bin + 1) * num_snapshots / num_bins);
    const int width = last - first;
    CovarianceLike bin_cov;
    bin_cov.matrix = (spectra.middleCols(first, width) *
                      spectra.middleCols(first, width).adjoint()) /
                     static_cast<double>(width);
    bin_cov.matrix = 0.5 * (bin_cov.matrix + bin_cov.matrix.adjoint()).eval();
    const SubspaceDecomposition dec = decompose(bin_cov, m_hat);

    const double center_index = 0.5 * (first + last - 1);
    const double signed_index =
        center_index > num_snapshots / 2.0 ? center_index - num_snapshots : center_index;
    const double omega = 2.0 * kPi * signed_index * sample_rate_hz / num_snapshots;

    Eigen::MatrixXcd steering(num_sensors, static_cast<Eigen::Index>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g) {
      steering.col(static_cast<Eigen::Index>(g)) =
          broadband_steering_vector(geometry, omega, grid[g], wave_speed);
    }
    const Eigen::MatrixXcd projected = dec.noise_basis.adjoint() * steering;
    std::vector<double> bin_values(grid.size());
    double bin_max = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double denom = std::max(projected.col(static_cast<Eigen::Index>(g)).squaredNorm(),
                                    std::numeric_limits<double>::min());
      bin_values[g] = 1.0 / denom;
      bin_max = std::max(bin_max, bin_values[g]);
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      aggregate[g] += bin_values[g] / bin_max;
    }
  }

  SpatialSpectrum spectrum;
  spectrum.grid_rad = grid;
  spectrum.values = std::move(aggregate);
  return spectrum;
}

DoaEstimate broadband_music(const Eigen::MatrixXcd& snapshots, int m_hat, int num_bins,
                            double sample_rate_hz, double bandwidth_hz,
                            double grid_resolution_rad) {
  return music_doa(broadband_music_spectrum(snapshots, m_hat, num_bins, sample_rate_hz,
                                            bandwidth_hz, grid_resolution_rad),
                   m_hat);
}

SpatialSpectrum mvdr_beampattern(const CovarianceLike& covariance,
                                 const ArrayGeometry& geometry,
                                 double grid_resolution_rad) {
  const Eigen::Index n = covariance.matrix.rows();
  if (geometry.num_sensors != n) {
    throw std::invalid_argument("mvdr_beampattern: geometry does not match covariance");
  }
  Eigen::MatrixXcd r = covariance.matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> probe(r);
  if (probe.info() != Eigen::Success) {
    throw std::runtime_error("mvdr_beampattern: eigensolver failed");
  }
  const double max_eig = probe.eigenvalues().maxCoeff();
  const double min_eig = probe.eigenvalues().minCoeff();
  if (!(min_eig > 0.0) || max_eig / min_eig > 1e12) {
    r += (1e-9 * r.trace().real() / static_cast<double>(n)) *
         Eigen::MatrixXcd::Identity(n, n);
  }
  const Eigen::LDLT<Eigen::MatrixXcd> factor(r);
  SpatialSpectrum spectrum;
  spectrum.grid_rad = make_angle_grid(grid_resolution_rad);
  spectrum.values.resize(spectrum.grid_rad.size());
  for (std::size_t i = 0; i < spectrum.grid_rad.size(); ++i) {
    const Eigen::VectorXcd a = steering_vector(geometry, spectrum.grid_rad[i]);
    const double denom = std::max(std::real(a.dot(factor.solve(a))),
                                  std::numeric_limits<double>::min());
    spectrum.values[i] = 1.0 / denom;
  }
  return spectrum;
}

namespace {

void write_csv_or_throw(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("csv export: cannot open " + path);
  }
  out << body;
  if (!out) {
    throw std::runtime_error("csv export: write failure on " + path);
  }
}

}  // namespace

void write_spectrum_csv(const SpatialSpectrum& spectrum, const std::string& path) {
  std::string body = "angle_rad,value\n";
  for (std::size_t i = 0; i < spectrum.grid_rad.size(); ++i) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", spectrum.grid_rad[i],
                  spectrum.values[i]);
    body += buf;
  }
  write_csv_or_throw(path, body);
}

void write_rootset_csv(const RootSet& roots, const std::string& path) {
  std::string body = "re,im,selected\n";
  for (Eigen::Index i = 0; i < roots.roots.size(); ++i) {
    const bool selected = std::find(roots.selected.begin(), roots.selected.end(),
                                    static_cast<int>(i)) != roots.selected.end();
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", roots.roots(i).real(),
                  roots.roots(i).imag(), selected ? 1 : 0);
    body += buf;
  }
  write_csv_or_throw(path, body);
}

}  // namespace doa
