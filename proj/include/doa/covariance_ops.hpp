#ifndef DOA_COVARIANCE_OPS_HPP
#define DOA_COVARIANCE_OPS_HPP

#include <Eigen/Dense>
#include <vector>

namespace doa {

// Where a covariance-like matrix came from; downstream reports keep the label
// so benchmark tables can distinguish the preprocessing routes.
enum class CovProvenance { kEmpirical, kSmoothed, kForwardBackward, kSurrogate };

const char* to_string(CovProvenance provenance);

// Hermitian positive semidefinite matrix handed to the subspace estimators.
// Every producer symmetrizes via (R + R^H) / 2 before returning, so consumers
// may rely on exact Hermitian storage.
struct CovarianceLike {
  Eigen::MatrixXcd matrix;
  CovProvenance provenance = CovProvenance::kEmpirical;
};

// Stack of lagged second-moment estimates; slice tau holds
// (1 / (T - tau)) * sum_t x(t) x(t + tau)^H for t = 1 .. T - tau.
struct AutocorrTensor {
  std::vector<Eigen::MatrixXcd> lags;  // tau_max + 1 slices, each N x N
  int tau_max = 0;
};

// (1 / T) * X X^H over the snapshot block, symmetrized.
CovarianceLike empirical_covariance(const Eigen::MatrixXcd& snapshots);

// Lag slices 0 .. tau_max; requires tau_max < T. Slice 0 equals the
// empirical covariance.
AutocorrTensor lagged_autocorrelation(const Eigen::MatrixXcd& snapshots, int tau_max);

// Averages the empirical covariances of every length-subarray_size window of
// adjacent sensors. The result is subarray_size x subarray_size; consumers
// must pair it with a matching (smaller) array geometry. Restores rank for
// coherent sources at the price of aperture.
CovarianceLike spatial_smoothing(const Eigen::MatrixXcd& snapshots, int subarray_size);

// (R + J conj(R) J) / 2 with J the exchange matrix; the result is persymmetric
// and is a second, cheaper decorrelation route.
CovarianceLike forward_backward(const CovarianceLike& covariance);

}  // namespace doa

#endif  // DOA_COVARIANCE_OPS_HPP
