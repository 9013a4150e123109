#ifndef DOA_DIFF_ENGINE_HPP
#define DOA_DIFF_ENGINE_HPP

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

namespace doa {

// Dense row-major real tensor. Complex quantities travel as (re, im) pairs of
// these; see CVar below.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double value);
  int numel() const;
};

Tensor tensor_from_real(const Eigen::MatrixXd& m);
std::pair<Tensor, Tensor> tensor_from_complex(const Eigen::MatrixXcd& m);
Eigen::MatrixXd matrix_from_tensor(const Tensor& t);       // 2D or 1D column
Eigen::MatrixXcd matrix_from_tensors(const Tensor& re, const Tensor& im);

// Handle into a Tape.
struct Var {
  int id = -1;
};

// Complex tensor = paired real tensors of identical shape.
struct CVar {
  Var re;
  Var im;
};

// Single-use reverse-mode tape. Build the graph through the member ops, call
// backward(loss) once, read gradients of the leaves. Ops record a backward
// rule only when some input requires gradients, so inference over the same
// code path costs no extra bookkeeping.
class Tape {
 public:
  Var input(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return input(std::move(value), false); }
  Var constant_scalar(double value) { return constant(Tensor::scalar(value)); }

  // Elementwise and structural primitives.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var matmul(Var a, Var b);                       // [m,k] x [k,n]
  Var transpose(Var a);                           // 2D
  Var conv2d(Var image, Var weight, Var bias);    // [C,H,W], [O,C,kh,kw], [O]
  Var deconv2d(Var image, Var weight, Var bias);  // [C,H,W], [C,O,kh,kw], [O]
  Var arelu(Var a);                               // [relu(x); relu(-x)] along axis 0
  Var reshape(Var a, std::vector<int> shape);
  Var slice_rows(Var a, int first, int count);    // 2D
  Var slice_cols(Var a, int first, int count);    // 2D
  Var gather(Var a, std::vector<int> flat_indices);
  Var stack_scalars(const std::vector<Var>& scalars);
  Var sum(Var a);
  Var mean(Var a);
  Var sqrt_elem(Var a);
  Var atan2_elem(Var y, Var x);
  Var asin_clamped(Var a);               // input clamped to |x| <= 1 - 1e-9
  Var wrap_mod(Var a, double period);    // x - period*round(x/period), identity grad

  // Hermitian eigendecomposition, eigenvalues descending. Backward uses the
  // standard adjoint with eigen-gap clamping at 1e-8 * max |lambda|.
  struct EighResult {
    Var eigenvalues;  // [N]
    CVar vectors;     // [N,N], column k pairs with eigenvalue k
  };
  EighResult eigh(CVar hermitian);

  // All roots of sum_k c_k z^k (ascending complex coefficients, length D+1).
  // Backward is implicit differentiation; roots where |p'(z)| < 1e-12 get a
  // zero gradient and bump the multiple-root counter.
  CVar polyroots(CVar coeffs);

  void backward(Var scalar_loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;  // zeros tensor when the leaf was unreached
  bool requires_grad(Var v) const;

  int gap_clamp_count() const { return gap_clamp_count_; }
  int multiple_root_count() const { return multiple_root_count_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first touch during backward
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  int push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward_rule);
  Tensor& grad_buffer(int id);
  bool grad_live(int id) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  int gap_clamp_count_ = 0;
  int multiple_root_count_ = 0;
  mutable Tensor empty_grad_;
};

// Complex composites over the real primitives.
CVar cadd(Tape& t, CVar a, CVar b);
CVar csub(Tape& t, CVar a, CVar b);
CVar cconj(Tape& t, CVar a);
CVar cmatmul(Tape& t, CVar a, CVar b);
CVar cadjoint(Tape& t, CVar a);

// K |-> K K^H + epsilon I.
CVar hermitian_gram(Tape& t, CVar k, double epsilon);

// Adam with bias correction.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double learning_rate, double beta1 = 0.9,
               double beta2 = 0.999, double epsilon = 1e-8);

}  // namespace doa

#endif  // DOA_DIFF_ENGINE_HPP
