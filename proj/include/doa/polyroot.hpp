#ifndef DOA_POLYROOT_HPP
#define DOA_POLYROOT_HPP

#include <Eigen/Dense>

namespace doa {

// Roots of sum_k coeffs(k) z^k via the companion-matrix eigenproblem.
// coeffs is ascending (constant term first); requires degree >= 1 and a
// leading coefficient with magnitude > 1e-14. Returns degree roots in the
// eigensolver's order, which is deterministic for a fixed input.
Eigen::VectorXcd polynomial_roots(const Eigen::VectorXcd& coeffs);

// Evaluates sum_k coeffs(k) z^k (Horner).
std::complex<double> polynomial_eval(const Eigen::VectorXcd& coeffs,
                                     std::complex<double> z);

// Derivative polynomial evaluated at z.
std::complex<double> polynomial_derivative_eval(const Eigen::VectorXcd& coeffs,
                                                std::complex<double> z);

}  // namespace doa

#endif  // DOA_POLYROOT_HPP
