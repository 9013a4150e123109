#ifndef DOA_ARRAY_MODEL_HPP
#define DOA_ARRAY_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace doa {

// Uniform linear array along a single axis. Gap lengths are expressed in
// units of the nominal element pitch d (half a wavelength for narrowband
// runs), so a calibrated array has every gap equal to 1. Distorted arrays
// carry fixed per-gap placement errors and optionally a per-element complex
// perturbation of the response (steering_noise_std).
struct ArrayGeometry {
  int num_sensors = 0;
  std::vector<double> gap_spacings;  // num_sensors - 1 entries, units of d
  double steering_noise_std = 0.0;   // std of the additive CN perturbation
  std::uint64_t rng_seed = 0;

  static ArrayGeometry nominal(int num_sensors);

  // Gap errors drawn once, uniformly from [-max_gap_error, max_gap_error],
  // and frozen into the geometry; the same seed reproduces the same array.
  static ArrayGeometry miscalibrated(int num_sensors, double max_gap_error,
                                     std::uint64_t seed);

  // Cumulative sensor positions in units of d; the first sensor sits at 0.
  std::vector<double> sensor_positions() const;
};

// Narrowband response for a far-field source at theta_rad (broadside = 0):
// entry m is exp(-j * pi * p_m * sin(theta)) with p_m the sensor position.
// This overload never applies steering noise perturbations; if the geometry
// declares steering_noise_std > 0 the draw is derived from rng_seed so the
// same geometry always yields the same perturbed vector.
Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double theta_rad);

// Same response, but any steering noise is drawn from the supplied stream.
// Simulation code passes its per-trial generator here so each generated
// snapshot block sees a fresh perturbation.
Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double theta_rad,
                                 std::mt19937_64& rng);

// Wideband response at angular frequency omega (rad/s): entry m is
// exp(-j * omega * p_m * sin(theta) / wave_speed). wave_speed is expressed in
// units of d per second, i.e. pass (physical speed / physical pitch). A
// signal occupying bandwidth B with pitch d = c/(2B) uses wave_speed = 2B.
Eigen::VectorXcd broadband_steering_vector(const ArrayGeometry& geometry,
                                           double omega_rad_s, double theta_rad,
                                           double wave_speed);
Eigen::VectorXcd broadband_steering_vector(const ArrayGeometry& geometry,
                                           double omega_rad_s, double theta_rad,
                                           double wave_speed, std::mt19937_64& rng);

// Stacks steering vectors for a set of source angles into an N x M matrix.
// Requires 1 <= M < N.
Eigen::MatrixXcd steering_matrix(const ArrayGeometry& geometry,
                                 const std::vector<double>& thetas_rad);
Eigen::MatrixXcd steering_matrix(const ArrayGeometry& geometry,
                                 const std::vector<double>& thetas_rad,
                                 std::mt19937_64& rng);

}  // namespace doa

#endif  // DOA_ARRAY_MODEL_HPP
