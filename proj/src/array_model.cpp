#include "doa/array_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doa/rng.hpp"

namespace doa {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void check_angle(double theta_rad) {
  if (!(std::abs(theta_rad) <= kHalfPi)) {
    throw std::invalid_argument("steering_vector: angle outside [-pi/2, pi/2]");
  }
}

Eigen::VectorXcd response(const ArrayGeometry& geometry, double phase_per_unit,
                          std::mt19937_64* noise_rng) {
  const std::vector<double> positions = geometry.sensor_positions();
  Eigen::VectorXcd a(geometry.num_sensors);
  for (int m = 0; m < geometry.num_sensors; ++m) {
    a(m) = std::polar(1.0, phase_per_unit * positions[m]);
  }
  if (geometry.steering_noise_std > 0.0) {
    const double var = geometry.steering_noise_std * geometry.steering_noise_std;
    std::mt19937_64 own_rng = make_rng(geometry.rng_seed);
    std::mt19937_64& rng = noise_rng != nullptr ? *noise_rng : own_rng;
    for (int m = 0; m < geometry.num_sensors; ++m) {
      a(m) += complex_gaussian(rng, var);
    }
  }
  return a;
}

}  // namespace

ArrayGeometry ArrayGeometry::nominal(int num_sensors) {
  if (num_sensors < 2) {
    throw std::invalid_argument("ArrayGeometry: need at least 2 sensors");
  }
  ArrayGeometry geometry;
  geometry.num_sensors = num_sensors;
  geometry.gap_spacings.assign(static_cast<std::size_t>(num_sensors - 1), 1.0);
  return geometry;
}

ArrayGeometry ArrayGeometry::miscalibrated(int num_sensors, double max_gap_error,
                                           std::uint64_t seed) {
  if (!(max_gap_error >= 0.0 && max_gap_error < 1.0)) {
    throw std::invalid_argument("ArrayGeometry: gap error must lie in [0, 1)");
  }
  ArrayGeometry geometry = nominal(num_sensors);
  geometry.rng_seed = seed;
  std::mt19937_64 rng = make_rng(mix_seed(seed, 0));
  std::uniform_real_distribution<double> err(-max_gap_error, max_gap_error);
  for (double& gap : geometry.gap_spacings) {
    gap = 1.0 + err(rng);
  }
  return geometry;
}

std::vector<double> ArrayGeometry::sensor_positions() const {
  std::vector<double> positions(static_cast<std::size_t>(num_sensors), 0.0);
  for (int m = 1; m < num_sensors; ++m) {
    positions[m] = positions[m - 1] + gap_spacings[m - 1];
  }
  return positions;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double theta_rad) {
  check_angle(theta_rad);
  return response(geometry, -std::numbers::pi * std::sin(theta_rad), nullptr);
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double theta_rad,
                                 std::mt19937_64& rng) {
  check_angle(theta_rad);
  return response(geometry, -std::numbers::pi * std::sin(theta_rad), &rng);
}

namespace {

double broadband_phase_rate(double omega_rad_s, double theta_rad, double wave_speed) {
  if (!(wave_speed > 0.0)) {
    throw std::invalid_argument("broadband_steering_vector: wave speed must be positive");
  }
  if (!std::isfinite(omega_rad_s)) {
    throw std::invalid_argument("broadband_steering_vector: non-finite frequency");
  }
  return -omega_rad_s * std::sin(theta_rad) / wave_speed;
}

}  // namespace

Eigen::VectorXcd broadband_steering_vector(const ArrayGeometry& geometry,
                                           double omega_rad_s, double theta_rad,
                                           double wave_speed) {
  check_angle(theta_rad);
  return response(geometry, broadband_phase_rate(omega_rad_s, theta_rad, wave_speed),
                  nullptr);
}

Eigen::VectorXcd broadband_steering_vector(const ArrayGeometry& geometry,
                                           double omega_rad_s, double theta_rad,
                                           double wave_speed, std::mt19937_64& rng) {
  check_angle(theta_rad);
  return response(geometry, broadband_phase_rate(omega_rad_s, theta_rad, wave_speed),
                  &rng);
}

namespace {

Eigen::MatrixXcd build_steering_matrix(const ArrayGeometry& geometry,
                                       const std::vector<double>& thetas_rad,
                                       std::mt19937_64* rng) {
  const int num_sources = static_cast<int>(thetas_rad.size());
  if (num_sources < 1 || num_sources >= geometry.num_sensors) {
    throw std::invalid_argument("steering_matrix: need 1 <= sources < sensors");
  }
  Eigen::MatrixXcd a(geometry.num_sensors, num_sources);
  for (int i = 0; i < num_sources; ++i) {
    a.col(i) = rng != nullptr ? steering_vector(geometry, thetas_rad[i], *rng)
                              : steering_vector(geometry, thetas_rad[i]);
  }
  return a;
}

}  // namespace

Eigen::MatrixXcd steering_matrix(const ArrayGeometry& geometry,
                                 const std::vector<double>& thetas_rad) {
  return build_steering_matrix(geometry, thetas_rad, nullptr);
}

Eigen::MatrixXcd steering_matrix(const ArrayGeometry& geometry,
                                 const std::vector<double>& thetas_rad,
                                 std::mt19937_64& rng) {
  return build_steering_matrix(geometry, thetas_rad, &rng);
}

}  // namespace doa
