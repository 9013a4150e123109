#include <cmath>
#include <vector>

#include "doctest.h"
#include "doa/diff_engine.hpp"
#include "grad_checks.hpp"

using namespace doa;
using namespace doa_testing;

TEST_CASE("tensor helpers round-trip Eigen matrices") {
  Eigen::MatrixXcd m(2, 3);
  m << std::complex<double>(1, -2), std::complex<double>(0, 0.5), std::complex<double>(3, 0),
      std::complex<double>(-1, 1), std::complex<double>(2, 2), std::complex<double>(0, -3);
  auto [re, im] = tensor_from_complex(m);
  CHECK(re.shape == std::vector<int>{2, 3});
  Eigen::MatrixXcd back = matrix_from_tensors(re, im);
  CHECK((back - m).norm() == 0.0);

  Eigen::MatrixXd r(2, 2);
  r << 1, 2, 3, 4;
  CHECK((matrix_from_tensor(tensor_from_real(r)) - r).norm() == 0.0);
}

TEST_CASE("forward values of the basic ops") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 2});
  a.data = {1, 2, 3, 4};
  Tensor b = Tensor::zeros({2, 2});
  b.data = {5, 6, 7, 8};
  Var va = tape.input(a, false);
  Var vb = tape.input(b, false);

  CHECK(tape.value(tape.add(va, vb)).data == std::vector<double>{6, 8, 10, 12});
  CHECK(tape.value(tape.mul(va, vb)).data == std::vector<double>{5, 12, 21, 32});
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  CHECK(tape.value(tape.matmul(va, vb)).data == std::vector<double>{19, 22, 43, 50});
  CHECK(tape.value(tape.transpose(va)).data == std::vector<double>{1, 3, 2, 4});
  CHECK(tape.value(tape.sum(va)).data[0] == 10.0);
  CHECK(tape.value(tape.mean(vb)).data[0] == 6.5);
}

TEST_CASE("arelu stacks positive and negative parts along the channel axis") {
  Tape tape;
  Tensor x = Tensor::zeros({1, 2, 2});
  x.data = {1.0, -2.0, 0.5, -0.25};
  Var v = tape.input(x, false);
  const Tensor& out = tape.value(tape.arelu(v));
  CHECK(out.shape == std::vector<int>{2, 2, 2});
  CHECK(out.data == std::vector<double>{1.0, 0.0, 0.5, 0.0, 0.0, 2.0, 0.0, 0.25});
}

TEST_CASE("conv2d matches a hand-computed valid correlation") {
  // one channel, 2x3 image, one 2x2 kernel, bias 0.5
  Tape tape;
  Tensor img = Tensor::zeros({1, 2, 3});
  img.data = {1, 2, 3, 4, 5, 6};
  Tensor w = Tensor::zeros({1, 1, 2, 2});
  w.data = {1, 0, -1, 2};
  Tensor b = Tensor::zeros({1});
  b.data = {0.5};
  const Tensor& out = tape.value(
      tape.conv2d(tape.input(img, false), tape.input(w, false), tape.input(b, false)));
  CHECK(out.shape == std::vector<int>{1, 1, 2});
  // window [1 2; 4 5]: 1*1 + 0*2 - 1*4 + 2*5 + 0.5 = 7.5
  CHECK(out.data[0] == doctest::Approx(7.5).epsilon(1e-12));
  // window [2 3; 5 6]: 2 - 5 + 12 + 0.5 = 9.5
  CHECK(out.data[1] == doctest::Approx(9.5).epsilon(1e-12));
}

TEST_CASE("deconv2d upsamples by kernel-minus-one per axis") {
  Tape tape;
  Tensor img = Tensor::zeros({1, 1, 2});
  img.data = {1.0, 10.0};
  Tensor w = Tensor::zeros({1, 1, 2, 2});
  w.data = {1, 2, 3, 4};
  Tensor b = Tensor::zeros({1});
  const Tensor& out = tape.value(
      tape.deconv2d(tape.input(img, false), tape.input(w, false), tape.input(b, false)));
  CHECK(out.shape == std::vector<int>{1, 2, 3});
  CHECK(out.data == std::vector<double>{1, 12, 20, 3, 34, 40});
}

TEST_CASE("eigh forward: descending eigenvalues, unitary columns") {
  std::mt19937_64 rng = make_rng(5);
  Eigen::MatrixXcd raw(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) raw(i, j) = complex_gaussian(rng, 1.0);
  Eigen::MatrixXcd herm = 0.5 * (raw + raw.adjoint());

  Tape tape;
  auto [re, im] = tensor_from_complex(herm);
  Tape::EighResult eig = tape.eigh({tape.input(re, false), tape.input(im, false)});
  const Tensor& lambda = tape.value(eig.eigenvalues);
  for (int i = 1; i < 5; ++i) CHECK(lambda.data[i - 1] >= lambda.data[i]);

  Eigen::MatrixXcd u =
      matrix_from_tensors(tape.value(eig.vectors.re), tape.value(eig.vectors.im));
  CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(5, 5)).norm() < 1e-12);
  Eigen::VectorXcd lam = matrix_from_tensor(lambda).col(0).cast<std::complex<double>>();
  CHECK((herm * u - u * lam.asDiagonal()).norm() < 1e-11);
}

TEST_CASE("backward reaches only what requires gradients") {
  Tape tape;
  Tensor a = Tensor::zeros({2});
  a.data = {1, 2};
  Var va = tape.input(a, true);
  Var vb = tape.input(a, false);
  Var loss = tape.sum(tape.mul(va, vb));
  tape.backward(loss);
  CHECK(tape.grad(va).data == std::vector<double>{1, 2});
  CHECK(tape.grad(vb).data == std::vector<double>{0, 0});
}

TEST_CASE("finite differences: every primitive, 10 seeds") {
  FdReport report = fd_primitives(10);
  INFO("worst case: ", report.worst_case, " rel=", report.max_rel);
  CHECK(report.checks > 0);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("finite differences: hermitian eigendecomposition backward, 10 seeds") {
  FdReport report = fd_eigh(10);
  INFO("worst case: ", report.worst_case, " rel=", report.max_rel);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("finite differences: polynomial-root backward, 10 seeds") {
  FdReport report = fd_polyroots(10);
  INFO("worst case: ", report.worst_case, " rel=", report.max_rel);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("adam converges on a quadratic and is deterministic") {
  auto run = [] {
    std::vector<double> w = {5.0, -3.0};
    AdamState state;
    state.first_moment.assign(2, 0.0);
    state.second_moment.assign(2, 0.0);
    for (int i = 0; i < 400; ++i) {
      std::vector<double> g = {2.0 * w[0], 2.0 * w[1]};
      adam_step(w, g, state, 0.05);
    }
    return w;
  };
  std::vector<double> w1 = run();
  std::vector<double> w2 = run();
  CHECK(std::abs(w1[0]) < 1e-2);
  CHECK(std::abs(w1[1]) < 1e-2);
  CHECK(w1 == w2);
}

TEST_CASE("shape violations throw") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  Var va = tape.input(a, false);
  Var vb = tape.input(b, false);
  CHECK_THROWS_AS((void)tape.add(va, vb), std::invalid_argument);
  CHECK_THROWS_AS((void)tape.matmul(va, va), std::invalid_argument);
  CHECK_THROWS_AS((void)tape.reshape(va, {4}), std::invalid_argument);
  CHECK_THROWS_AS((void)tape.slice_rows(va, 1, 5), std::invalid_argument);
}
