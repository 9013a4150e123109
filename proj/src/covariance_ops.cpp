#include "doa/covariance_ops.hpp"

#include <stdexcept>

namespace doa {

namespace {

Eigen::MatrixXcd symmetrized(const Eigen::MatrixXcd& m) {
  return 0.5 * (m + m.adjoint());
}

}  // namespace

const char* to_string(CovProvenance provenance) {
  switch (provenance) {
    case CovProvenance::kEmpirical: return "empirical";
    case CovProvenance::kSmoothed: return "sps";
    case CovProvenance::kForwardBackward: return "fb";
    case CovProvenance::kSurrogate: return "surrogate";
  }
  return "unknown";
}

CovarianceLike empirical_covariance(const Eigen::MatrixXcd& snapshots) {
  if (snapshots.cols() < 1) {
    throw std::invalid_argument("empirical_covariance: need at least one snapshot");
  }
  const double scale = 1.0 / static_cast<double>(snapshots.cols());
  CovarianceLike cov;
  cov.matrix = symmetrized(scale * (snapshots * snapshots.adjoint()));
  cov.provenance = CovProvenance::kEmpirical;
  return cov;
}

AutocorrTensor lagged_autocorrelation(const Eigen::MatrixXcd& snapshots, int tau_max) {
  const int num_snapshots = static_cast<int>(snapshots.cols());
  if (tau_max < 0 || tau_max >= num_snapshots) {
    throw std::invalid_argument("lagged_autocorrelation: need 0 <= tau_max < snapshots");
  }
  AutocorrTensor tensor;
  tensor.tau_max = tau_max;
  tensor.lags.reserve(static_cast<std::size_t>(tau_max) + 1);
  for (int tau = 0; tau <= tau_max; ++tau) {
    const int terms = num_snapshots - tau;
    Eigen::MatrixXcd slice = snapshots.leftCols(terms) *
                             snapshots.middleCols(tau, terms).adjoint() /
                             static_cast<double>(terms);
    if (tau == 0) {
      slice = symmetrized(slice);
    }
    tensor.lags.push_back(std::move(slice));
  }
  return tensor;
}

CovarianceLike spatial_smoothing(const Eigen::MatrixXcd& snapshots, int subarray_size) {
  const int num_sensors = static_cast<int>(snapshots.rows());
  if (subarray_size < 1 || subarray_size > num_sensors) {
    throw std::invalid_argument("spatial_smoothing: subarray size must lie in [1, sensors]");
  }
  if (snapshots.cols() < 1) {
    throw std::invalid_argument("spatial_smoothing: need at least one snapshot");
  }
  const int num_subarrays = num_sensors - subarray_size + 1;
  const double scale = 1.0 / (static_cast<double>(num_subarrays) *
                              static_cast<double>(snapshots.cols()));
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(subarray_size, subarray_size);
  for (int first = 0; first < num_subarrays; ++first) {
    const auto window = snapshots.middleRows(first, subarray_size);
    sum.noalias() += window * window.adjoint();
  }
  CovarianceLike cov;
  cov.matrix = symmetrized(scale * sum);
  cov.provenance = CovProvenance::kSmoothed;
  return cov;
}

CovarianceLike forward_backward(const CovarianceLike& covariance) {
  const Eigen::MatrixXcd& r = covariance.matrix;
  if (r.rows() != r.cols()) {
    throw std::invalid_argument("forward_backward: matrix must be square");
  }
  const Eigen::Index n = r.rows();
  Eigen::MatrixXcd reflected(n, n);
  // J conj(R) J flips both indices: reflected(i, j) = conj(r(n-1-i, n-1-j)).
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      reflected(i, j) = std::conj(r(n - 1 - i, n - 1 - j));
    }
  }
  CovarianceLike cov;
  cov.matrix = symmetrized(0.5 * (r + reflected));
  cov.provenance = CovProvenance::kForwardBackward;
  return cov;
}

}  // namespace doa
