#ifndef DOA_SURROGATE_NET_HPP
#define DOA_SURROGATE_NET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "doa/covariance_ops.hpp"
#include "doa/diff_engine.hpp"

namespace doa {

// One stage of the autoencoder. in_channels counts the channels actually
// entering the stage (i.e. after the doubling activation of the previous
// stage). Conv weights are stored [out, in, k, k]; deconv weights [in, out,
// k, k].
struct LayerSpec {
  enum Kind : std::uint32_t { kConv = 0, kDeconv = 1 };
  Kind kind = kConv;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 2;
};

// Trainable covariance autoencoder. Input features are num_lags channels of
// shape 2N x N (real over imaginary part of one autocorrelation lag); the
// network emits one 2N x N plane reinterpreted as a complex N x N matrix K,
// and the surrogate covariance is K K^H + epsilon I.
struct SurrogateModel {
  int num_sensors = 0;
  int num_lags = 0;
  double epsilon = 1.0;
  std::vector<LayerSpec> layers;
  std::vector<Tensor> weights;  // weight, bias per layer, in layer order

  std::uint32_t epochs_trained = 0;
  std::vector<double> train_loss_history;
  std::vector<double> val_loss_history;
};

// The fixed six-stage plan: conv 16/32/64, deconv 32/16/1, all 2x2 kernels,
// channel-doubling activation after every stage but the last.
std::vector<LayerSpec> surrogate_layer_plan(int num_lags);

SurrogateModel make_surrogate_model(int num_sensors, int num_lags, double epsilon,
                                    std::uint64_t init_seed);

long parameter_count(const SurrogateModel& model);

// Lag channels 0 .. num_lags-1, each a [2N, N] block of Re over Im; lags that
// need more snapshots than provided are zero-filled so the shape never
// depends on T. All channels share a single 1/trace(lag-0) scaling.
Tensor extract_features(const Eigen::MatrixXcd& snapshots, int num_lags);

// Put the model weights on a tape (trainable or frozen), in layer order.
std::vector<Var> stage_weights(Tape& tape, const SurrogateModel& model, bool trainable);

// Features -> surrogate covariance, differentiable end to end.
CVar surrogate_forward(Tape& tape, const SurrogateModel& model,
                       const std::vector<Var>& staged_weights, Var features);

// Inference convenience: snapshots -> covariance matrix off-tape.
CovarianceLike surrogate_covariance(const SurrogateModel& model,
                                    const Eigen::MatrixXcd& snapshots);

// Optimizer plumbing: the flat layout is the concatenation of every weight
// tensor's row-major data in layer order.
std::vector<double> flatten_parameters(const SurrogateModel& model);
void assign_parameters(SurrogateModel& model, const std::vector<double>& flat);

// Binary checkpoint with bit-exact weight round trip.
void save_checkpoint(const SurrogateModel& model, const std::string& path);
SurrogateModel load_checkpoint(const std::string& path);

}  // namespace doa

#endif  // DOA_SURROGATE_NET_HPP
