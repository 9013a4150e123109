#include "doa/polyroot.hpp"

#include <stdexcept>

namespace doa {

Eigen::VectorXcd polynomial_roots(const Eigen::VectorXcd& coeffs) {
  const Eigen::Index degree = coeffs.size() - 1;
  if (degree < 1) {
    throw std::invalid_argument("polynomial_roots: degree must be at least 1");
  }
  const std::complex<double> leading = coeffs(degree);
  if (!(std::abs(leading) > 1e-14)) {
    // A vanishing leading coefficient is a numerical condition of the data,
    // not a malformed call: the root count would no longer match the
    // coefficient count, so refuse instead of silently deflating.
    throw std::runtime_error("polynomial_roots: leading coefficient too small");
  }
  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(degree, degree);
  for (Eigen::Index i = 1; i < degree; ++i) {
    companion(i, i - 1) = 1.0;
  }
  for (Eigen::Index i = 0; i < degree; ++i) {
    companion(i, degree - 1) = -coeffs(i) / leading;
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("polynomial_roots: companion eigensolver failed");
  }
  return solver.eigenvalues();
}

std::complex<double> polynomial_eval(const Eigen::VectorXcd& coeffs,
                                     std::complex<double> z) {
  std::complex<double> acc = 0.0;
  for (Eigen::Index k = coeffs.size() - 1; k >= 0; --k) {
    acc = acc * z + coeffs(k);
  }
  return acc;
}

std::complex<double> polynomial_derivative_eval(const Eigen::VectorXcd& coeffs,
                                                std::complex<double> z) {
  std::complex<double> acc = 0.0;
  for (Eigen::Index k = coeffs.size() - 1; k >= 1; --k) {
    acc = acc * z + coeffs(k) * static_cast<double>(k);
  }
  return acc;
}

}  // namespace doa
