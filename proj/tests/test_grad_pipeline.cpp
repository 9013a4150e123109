#include <cmath>

#include "doctest.h"
#include "doa/subspace_estimators.hpp"
#include "doa/trainer.hpp"
#include "grad_checks.hpp"

using namespace doa;
using namespace doa_testing;

TEST_CASE("end-to-end weight gradients agree with finite differences") {
  FdReport report = fd_end_to_end(10);
  INFO("worst case: ", report.worst_case, " rel=", report.max_rel);
  CHECK(report.checks == 10);
  CHECK(report.max_rel < 1e-3);
}

TEST_CASE("rmspe_loss_on_tape matches rmspe_value and differentiates") {
  const std::vector<double> truth = {-0.4, 0.3};
  Tensor pred = Tensor::zeros({2});
  pred.data = {0.35, -0.47};  // deliberately swapped order

  Tape tape;
  Var p = tape.input(pred, true);
  Var loss = rmspe_loss_on_tape(tape, truth, p, 2);
  const double on_tape = tape.value(loss).data[0];
  CHECK(on_tape == doctest::Approx(rmspe_value(truth, {0.35, -0.47})).epsilon(1e-12));

  tape.backward(loss);
  const Tensor grad = tape.grad(p);
  const double step = 1e-6;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> up = pred.data;
    up[static_cast<size_t>(i)] += step;
    std::vector<double> down = pred.data;
    down[static_cast<size_t>(i)] -= step;
    const double fd =
        (rmspe_value(truth, up) - rmspe_value(truth, down)) / (2.0 * step);
    CHECK(grad.data[static_cast<size_t>(i)] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("differentiable root head reproduces the inference angles") {
  // Analytic covariance -> the tape head and the plain estimator must select
  // identical roots and return identical angles.
  const ArrayGeometry geometry = ArrayGeometry::nominal(8);
  const std::vector<double> thetas = {-0.35, 0.55};
  const Eigen::MatrixXcd a = steering_matrix(geometry, thetas);
  CovarianceLike cov;
  cov.matrix = a * a.adjoint() + 0.3 * Eigen::MatrixXcd::Identity(8, 8);
  cov.matrix = 0.5 * (cov.matrix + cov.matrix.adjoint());

  SubspaceDecomposition dec = decompose(cov, 2);
  DoaEstimate reference = rootmusic_doa(dec, 2).first;

  Tape tape;
  auto [re, im] = tensor_from_complex(cov.matrix);
  CVar staged = {tape.input(re, false), tape.input(im, false)};
  TapeAngles head = rootmusic_angles_on_tape(tape, staged, 8, 2);
  REQUIRE(head.count == 2);
  const Tensor& angles = tape.value(head.angles);

  std::vector<double> got(angles.data.begin(), angles.data.end());
  std::sort(got.begin(), got.end());
  REQUIRE(reference.angles_rad.size() == 2);
  CHECK(std::abs(got[0] - reference.angles_rad[0]) < 1e-12);
  CHECK(std::abs(got[1] - reference.angles_rad[1]) < 1e-12);
}

TEST_CASE("training smoke run: finite losses, history recorded, deterministic") {
  Scenario sc;
  sc.geometry = ArrayGeometry::nominal(8);
  sc.num_sources = 2;
  sc.num_snapshots = 25;
  sc.snr_db = 10.0;
  sc.coherence = Coherence::kFullyCoherent;
  sc.rng_seed = 11;
  Dataset ds = generate_dataset(sc, 24);

  Hyperparameters hp;
  hp.learning_rate = 1e-3;
  hp.batch_size = 8;
  hp.max_epochs = 2;
  hp.seed = 3;

  SurrogateModel initial = make_surrogate_model(8, 8, 1.0, 3);
  TrainResult first = train(ds, hp, initial);
  TrainResult second = train(ds, hp, initial);

  REQUIRE(first.report.train_rmspe.size() == 2);
  REQUIRE(first.report.val_rmspe.size() == 2);
  for (double v : first.report.train_rmspe) CHECK(std::isfinite(v));
  CHECK(first.report.best_epoch >= 1);
  CHECK(first.model.epochs_trained == 2);

  // bit-for-bit reproducibility of the whole loop
  CHECK(flatten_parameters(first.model) == flatten_parameters(second.model));
  CHECK(first.report.val_rmspe == second.report.val_rmspe);
}
