#ifndef DOA_TRAINER_HPP
#define DOA_TRAINER_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "doa/diff_engine.hpp"
#include "doa/signal_sim.hpp"
#include "doa/surrogate_net.hpp"

namespace doa {

struct Hyperparameters {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 50;
  double epsilon = 1.0;  // forwarded to model creation by the CLI
  int tau_max = 8;       // forwarded to model creation by the CLI
  std::uint64_t seed = 0;
  bool m_known = true;   // root selection sees the true source count in training
};

struct LossReport {
  std::vector<double> train_rmspe;   // one entry per completed epoch
  std::vector<double> val_rmspe;
  std::vector<long> gap_clamps;      // eigen-gap clamps hit in backward passes
  std::vector<long> root_warnings;   // multiple roots + selection shortfalls
  int best_epoch = 0;                // 1-based; 0 when no epoch validated
  double best_val_rmspe = std::numeric_limits<double>::infinity();
};

// Permutation-invariant periodic RMSPE. Differences are wrapped into
// [-pi/2, pi/2); missing predictions are padded with zeros, surplus ones are
// resolved by the best injective assignment.
double rmspe_value(const std::vector<double>& truth_rad,
                   const std::vector<double>& predicted_rad);

// The same loss on tape. `predicted` is a length-`predicted_count` vector of
// angles; the optimal assignment is found on values and frozen into the
// graph, so the gradient is that of the active branch.
Var rmspe_loss_on_tape(Tape& tape, const std::vector<double>& truth_rad, Var predicted,
                       int predicted_count);

// Differentiable root-form DOA head: covariance -> eigh -> noise-subspace
// polynomial -> roots -> pair selection (frozen) -> angles. Mirrors the
// inference-path selection so train and eval agree on which roots count.
struct TapeAngles {
  Var angles;           // [count] (undefined when count == 0)
  int count = 0;        // selected pairs, <= m_hat
  int m_hat = 0;
  bool shortfall = false;
};
TapeAngles rootmusic_angles_on_tape(Tape& tape, CVar covariance, int num_sensors,
                                    std::optional<int> m_override);

struct TrainResult {
  SurrogateModel model;  // best-validation weights
  LossReport report;
};

// Minibatch training of the surrogate through the root-form head. Features
// are extracted once per sample; epochs reshuffle with a seeded generator;
// a non-finite loss aborts the epoch and halves the learning rate once.
// Writes one `epoch,train_rmspe,val_rmspe,gap_clamps,root_warnings` line per
// epoch to epoch_log when given.
TrainResult train(const Dataset& dataset, const Hyperparameters& hp,
                  const SurrogateModel& initial, std::ostream* epoch_log = nullptr);

enum class ClassicEstimator { kMusic, kRootMusic, kEsprit, kMvdr };

struct EvalStats {
  double rmspe_mean = 0.0;
  double rmspe_std = 0.0;  // sample standard deviation across trials
  long trials = 0;
};

// Surrogate covariance per sample, then the chosen classic estimator on top.
EvalStats evaluate(const SurrogateModel& model, ClassicEstimator estimator,
                   const Dataset& dataset, bool m_known = true);

}  // namespace doa

#endif  // DOA_TRAINER_HPP
