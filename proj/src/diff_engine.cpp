#include "doa/diff_engine.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "doa/polyroot.hpp"

namespace doa {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

int checked_numel(const std::vector<int>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must not be empty");
  long long n = 1;
  for (int extent : shape) {
    if (extent <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= extent;
  }
  if (n > (1LL << 30)) throw std::invalid_argument("tensor is unreasonably large");
  return static_cast<int>(n);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) + ": operand shapes differ");
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (static_cast<int>(t.shape.size()) != rank)
    throw std::invalid_argument(std::string(op) + ": operand has wrong rank");
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  int n = checked_numel(shape);
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.shape = {1};
  t.data = {value};
  return t;
}

int Tensor::numel() const { return static_cast<int>(data.size()); }

Tensor tensor_from_real(const Eigen::MatrixXd& m) {
  Tensor t = Tensor::zeros({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  RowMap(t.data.data(), m.rows(), m.cols()) = m;
  return t;
}

std::pair<Tensor, Tensor> tensor_from_complex(const Eigen::MatrixXcd& m) {
  return {tensor_from_real(m.real()), tensor_from_real(m.imag())};
}

Eigen::MatrixXd matrix_from_tensor(const Tensor& t) {
  if (t.shape.size() == 1)
    return ConstRowMap(t.data.data(), t.shape[0], 1);
  if (t.shape.size() == 2)
    return ConstRowMap(t.data.data(), t.shape[0], t.shape[1]);
  throw std::invalid_argument("matrix_from_tensor: tensor is not 1D or 2D");
}

Eigen::MatrixXcd matrix_from_tensors(const Tensor& re, const Tensor& im) {
  require_same_shape(re, im, "matrix_from_tensors");
  Eigen::MatrixXd r = matrix_from_tensor(re);
  Eigen::MatrixXd i = matrix_from_tensor(im);
  Eigen::MatrixXcd out(r.rows(), r.cols());
  out.real() = r;
  out.imag() = i;
  return out;
}

int Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward_rule) {
  if (backward_done_)
    throw std::runtime_error("tape already differentiated; build a fresh one");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward_rule);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buffer(int id) {
  Node& node = nodes_[static_cast<size_t>(id)];
  if (node.grad.data.empty()) node.grad = Tensor::zeros(node.value.shape);
  return node.grad;
}

bool Tape::grad_live(int id) const {
  return !nodes_[static_cast<size_t>(id)].grad.data.empty();
}

Var Tape::input(Tensor value, bool requires_grad) {
  checked_numel(value.shape);
  if (static_cast<int>(value.data.size()) != checked_numel(value.shape))
    throw std::invalid_argument("tensor data size does not match its shape");
  return Var{push(std::move(value), requires_grad, nullptr)};
}

const Tensor& Tape::value(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("variable does not belong to this tape");
  return nodes_[static_cast<size_t>(v.id)].value;
}

const Tensor& Tape::grad(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("variable does not belong to this tape");
  const Node& node = nodes_[static_cast<size_t>(v.id)];
  if (node.grad.data.empty()) {
    // Leaf never touched by backward: gradient is identically zero.
    empty_grad_ = Tensor::zeros(node.value.shape);
    return empty_grad_;
  }
  return node.grad;
}

bool Tape::requires_grad(Var v) const {
  return nodes_[static_cast<size_t>(v.id)].requires_grad;
}

void Tape::backward(Var scalar_loss) {
  const Tensor& loss = value(scalar_loss);
  if (loss.numel() != 1)
    throw std::invalid_argument("backward expects a scalar loss");
  if (backward_done_) throw std::runtime_error("backward already ran on this tape");
  if (!nodes_[static_cast<size_t>(scalar_loss.id)].requires_grad)
    throw std::invalid_argument("loss does not depend on any trainable input");
  grad_buffer(scalar_loss.id).data[0] = 1.0;
  for (int id = scalar_loss.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<size_t>(id)];
    if (!node.requires_grad || node.grad.data.empty() || !node.backward) continue;
    node.backward(*this);
  }
  backward_done_ = true;
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  bool needs = requires_grad(a) || requires_grad(b);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id, bid = b.id;
    nodes_.back().backward = [aid, bid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      if (t.requires_grad(Var{aid})) {
        Tensor& ga = t.grad_buffer(aid);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.requires_grad(Var{bid})) {
        Tensor& gb = t.grad_buffer(bid);
        for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
      }
    };
  }
  return Var{out_id};
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
  bool needs = requires_grad(a) || requires_grad(b);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id, bid = b.id;
    nodes_.back().backward = [aid, bid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      if (t.requires_grad(Var{aid})) {
        Tensor& ga = t.grad_buffer(aid);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.requires_grad(Var{bid})) {
        Tensor& gb = t.grad_buffer(bid);
        for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
      }
    };
  }
  return Var{out_id};
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  bool needs = requires_grad(a) || requires_grad(b);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id, bid = b.id;
    nodes_.back().backward = [aid, bid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& av2 = t.nodes_[static_cast<size_t>(aid)].value;
      const Tensor& bv2 = t.nodes_[static_cast<size_t>(bid)].value;
      if (t.requires_grad(Var{aid})) {
        Tensor& ga = t.grad_buffer(aid);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
      }
      if (t.requires_grad(Var{bid})) {
        Tensor& gb = t.grad_buffer(bid);
        for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * av2.data[i];
      }
    };
  }
  return Var{out_id};
}

Var Tape::scale(Var a, double factor) {
  Tensor out = value(a);
  for (double& x : out.data) x *= factor;
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id, factor](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += factor * g.data[i];
    };
  }
  return Var{out_id};
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.shape[1] != bv.shape[0])
    throw std::invalid_argument("matmul: inner dimensions disagree");
  int m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor out = Tensor::zeros({m, n});
  RowMap(out.data.data(), m, n) = ConstRowMap(av.data.data(), m, k) *
                                  ConstRowMap(bv.data.data(), k, n);
  bool needs = requires_grad(a) || requires_grad(b);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id, bid = b.id;
    nodes_.back().backward = [aid, bid, out_id, m, k, n](Tape& t) {
      ConstRowMap g(t.nodes_[static_cast<size_t>(out_id)].grad.data.data(), m, n);
      ConstRowMap av2(t.nodes_[static_cast<size_t>(aid)].value.data.data(), m, k);
      ConstRowMap bv2(t.nodes_[static_cast<size_t>(bid)].value.data.data(), k, n);
      if (t.requires_grad(Var{aid})) {
        RowMap ga(t.grad_buffer(aid).data.data(), m, k);
        ga += g * bv2.transpose();
      }
      if (t.requires_grad(Var{bid})) {
        RowMap gb(t.grad_buffer(bid).data.data(), k, n);
        gb += av2.transpose() * g;
      }
    };
  }
  return Var{out_id};
}

Var Tape::transpose(Var a) {
  const Tensor& av = value(a);
  require_rank(av, 2, "transpose");
  int r = av.shape[0], c = av.shape[1];
  Tensor out = Tensor::zeros({c, r});
  RowMap(out.data.data(), c, r) = ConstRowMap(av.data.data(), r, c).transpose();
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id, r, c](Tape& t) {
      ConstRowMap g(t.nodes_[static_cast<size_t>(out_id)].grad.data.data(), c, r);
      RowMap ga(t.grad_buffer(aid).data.data(), r, c);
      ga += g.transpose();
    };
  }
  return Var{out_id};
}

namespace {

// Gathers the sliding kh x kw windows of a [channels, h, w] block into a
// (channels*kh*kw) x (oh*ow) matrix so both convolution directions reduce to
// one GEMM each.
Eigen::MatrixXd im2col(const double* src, int channels, int h, int w, int kh, int kw,
                       int oh, int ow) {
  Eigen::MatrixXd cols(channels * kh * kw, oh * ow);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (c * kh + ky) * kw + kx;
        for (int y = 0; y < oh; ++y) {
          const double* line = src + (static_cast<size_t>(c) * h + y + ky) * w + kx;
          for (int x = 0; x < ow; ++x) cols(row, y * ow + x) = line[x];
        }
      }
  return cols;
}

// Scatter-add inverse of im2col: cols(c*kh*kw + ky*kw + kx, y*ow + x) lands
// on dst[(c*h + y+ky)*w + x+kx].
void col2im_add(const Eigen::MatrixXd& cols, int channels, int h, int w, int kh, int kw,
                int oh, int ow, double* dst) {
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (c * kh + ky) * kw + kx;
        for (int y = 0; y < oh; ++y) {
          double* line = dst + (static_cast<size_t>(c) * h + y + ky) * w + kx;
          for (int x = 0; x < ow; ++x) line[x] += cols(row, y * ow + x);
        }
      }
}

}  // namespace

Var Tape::conv2d(Var image, Var weight, Var bias) {
  const Tensor& xv = value(image);
  const Tensor& wv = value(weight);
  const Tensor& bv = value(bias);
  require_rank(xv, 3, "conv2d");
  require_rank(wv, 4, "conv2d");
  require_rank(bv, 1, "conv2d");
  int ci = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
  int co = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3];
  if (wv.shape[1] != ci) throw std::invalid_argument("conv2d: channel counts disagree");
  if (bv.shape[0] != co) throw std::invalid_argument("conv2d: bias length disagrees");
  int oh = h - kh + 1, ow = w - kw + 1;
  if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d: kernel larger than image");
  Tensor out = Tensor::zeros({co, oh, ow});
  {
    const Eigen::MatrixXd cols = im2col(xv.data.data(), ci, h, w, kh, kw, oh, ow);
    ConstRowMap wmat(wv.data.data(), co, ci * kh * kw);
    RowMap omat(out.data.data(), co, oh * ow);
    omat.noalias() = wmat * cols;
    omat.colwise() += Eigen::Map<const Eigen::VectorXd>(bv.data.data(), co);
  }
  bool needs = requires_grad(image) || requires_grad(weight) || requires_grad(bias);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int xid = image.id, wid = weight.id, bid = bias.id;
    nodes_.back().backward = [xid, wid, bid, out_id, ci, h, w, co, kh, kw, oh, ow](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& xv2 = t.nodes_[static_cast<size_t>(xid)].value;
      const Tensor& wv2 = t.nodes_[static_cast<size_t>(wid)].value;
      ConstRowMap gmat(g.data.data(), co, oh * ow);
      if (t.requires_grad(Var{bid})) {
        Eigen::Map<Eigen::VectorXd> gb(t.grad_buffer(bid).data.data(), co);
        gb += gmat.rowwise().sum();
      }
      if (t.requires_grad(Var{wid})) {
        const Eigen::MatrixXd cols = im2col(xv2.data.data(), ci, h, w, kh, kw, oh, ow);
        RowMap gw(t.grad_buffer(wid).data.data(), co, ci * kh * kw);
        gw.noalias() += gmat * cols.transpose();
      }
      if (t.requires_grad(Var{xid})) {
        ConstRowMap wmat(wv2.data.data(), co, ci * kh * kw);
        const Eigen::MatrixXd gcols = wmat.transpose() * gmat;
        col2im_add(gcols, ci, h, w, kh, kw, oh, ow, t.grad_buffer(xid).data.data());
      }
    };
  }
  return Var{out_id};
}

Var Tape::deconv2d(Var image, Var weight, Var bias) {
  const Tensor& xv = value(image);
  const Tensor& wv = value(weight);
  const Tensor& bv = value(bias);
  require_rank(xv, 3, "deconv2d");
  require_rank(wv, 4, "deconv2d");
  require_rank(bv, 1, "deconv2d");
  int ci = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
  int co = wv.shape[1], kh = wv.shape[2], kw = wv.shape[3];
  if (wv.shape[0] != ci) throw std::invalid_argument("deconv2d: channel counts disagree");
  if (bv.shape[0] != co) throw std::invalid_argument("deconv2d: bias length disagrees");
  int oh = h + kh - 1, ow = w + kw - 1;
  // The transpose of conv2d: scattering x(c,y,x)*w(c,o,ky,kx) onto output
  // position (o, y+ky, x+kx) is exactly col2im of W^T X.
  Tensor out = Tensor::zeros({co, oh, ow});
  {
    ConstRowMap xmat(xv.data.data(), ci, h * w);
    ConstRowMap wmat(wv.data.data(), ci, co * kh * kw);
    for (int o = 0; o < co; ++o)
      std::fill_n(out.data.begin() + static_cast<size_t>(o) * oh * ow, oh * ow,
                  bv.data[static_cast<size_t>(o)]);
    const Eigen::MatrixXd cols = wmat.transpose() * xmat;
    col2im_add(cols, co, oh, ow, kh, kw, h, w, out.data.data());
  }
  bool needs = requires_grad(image) || requires_grad(weight) || requires_grad(bias);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int xid = image.id, wid = weight.id, bid = bias.id;
    nodes_.back().backward = [xid, wid, bid, out_id, ci, h, w, co, kh, kw, oh, ow](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& xv2 = t.nodes_[static_cast<size_t>(xid)].value;
      const Tensor& wv2 = t.nodes_[static_cast<size_t>(wid)].value;
      if (t.requires_grad(Var{bid})) {
        ConstRowMap gmat(g.data.data(), co, oh * ow);
        Eigen::Map<Eigen::VectorXd> gb(t.grad_buffer(bid).data.data(), co);
        gb += gmat.rowwise().sum();
      }
      const bool need_x = t.requires_grad(Var{xid});
      const bool need_w = t.requires_grad(Var{wid});
      if (need_x || need_w) {
        const Eigen::MatrixXd gcols = im2col(g.data.data(), co, oh, ow, kh, kw, h, w);
        if (need_x) {
          ConstRowMap wmat(wv2.data.data(), ci, co * kh * kw);
          RowMap gx(t.grad_buffer(xid).data.data(), ci, h * w);
          gx.noalias() += wmat * gcols;
        }
        if (need_w) {
          ConstRowMap xmat(xv2.data.data(), ci, h * w);
          RowMap gw(t.grad_buffer(wid).data.data(), ci, co * kh * kw);
          gw.noalias() += xmat * gcols.transpose();
        }
      }
    };
  }
  return Var{out_id};
}

Var Tape::arelu(Var a) {
  const Tensor& av = value(a);
  if (av.shape.empty()) throw std::invalid_argument("arelu: empty shape");
  std::vector<int> out_shape = av.shape;
  out_shape[0] *= 2;
  Tensor out = Tensor::zeros(out_shape);
  size_t n = av.data.size();
  for (size_t i = 0; i < n; ++i) {
    double x = av.data[i];
    out.data[i] = x > 0.0 ? x : 0.0;
    out.data[n + i] = x < 0.0 ? -x : 0.0;
  }
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id, n](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& av2 = t.nodes_[static_cast<size_t>(aid)].value;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < n; ++i) {
        double x = av2.data[i];
        if (x > 0.0) ga.data[i] += g.data[i];
        if (x < 0.0) ga.data[i] -= g.data[n + i];
      }
    };
  }
  return Var{out_id};
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  const Tensor& av = value(a);
  if (checked_numel(shape) != av.numel())
    throw std::invalid_argument("reshape: element count changes");
  Tensor out;
  out.shape = std::move(shape);
  out.data = av.data;
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    };
  }
  return Var{out_id};
}

Var Tape::slice_rows(Var a, int first, int count) {
  const Tensor& av = value(a);
  require_rank(av, 2, "slice_rows");
  int r = av.shape[0], c = av.shape[1];
  if (first < 0 || count < 1 || first + count > r)
    throw std::invalid_argument("slice_rows: range out of bounds");
  Tensor out = Tensor::zeros({count, c});
  std::copy(av.data.begin() + static_cast<long>(first) * c,
            av.data.begin() + static_cast<long>(first + count) * c, out.data.begin());
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id, first, c](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[static_cast<size_t>(first) * c + i] += g.data[i];
    };
  }
  return Var{out_id};
}

Var Tape::slice_cols(Var a, int first, int count) {
  const Tensor& av = value(a);
  require_rank(av, 2, "slice_cols");
  int r = av.shape[0], c = av.shape[1];
  if (first < 0 || count < 1 || first + count > c)
    throw std::invalid_argument("slice_cols: range out of bounds");
  Tensor out = Tensor::zeros({r, count});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < count; ++j)
      out.data[static_cast<size_t>(i * count + j)] =
          av.data[static_cast<size_t>(i * c + first + j)];
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id, first, r, c, count](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      Tensor& ga = t.grad_buffer(aid);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < count; ++j)
          ga.data[static_cast<size_t>(i * c + first + j)] +=
              g.data[static_cast<size_t>(i * count + j)];
    };
  }
  return Var{out_id};
}

Var Tape::gather(Var a, std::vector<int> flat_indices) {
  const Tensor& av = value(a);
  if (flat_indices.empty()) throw std::invalid_argument("gather: no indices");
  for (int idx : flat_indices)
    if (idx < 0 || idx >= av.numel())
      throw std::invalid_argument("gather: index out of bounds");
  Tensor out = Tensor::zeros({static_cast<int>(flat_indices.size())});
  for (size_t i = 0; i < flat_indices.size(); ++i)
    out.data[i] = av.data[static_cast<size_t>(flat_indices[i])];
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id, idx = std::move(flat_indices)](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < idx.size(); ++i)
        ga.data[static_cast<size_t>(idx[i])] += g.data[i];
    };
  }
  return Var{out_id};
}

Var Tape::stack_scalars(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars: no inputs");
  Tensor out = Tensor::zeros({static_cast<int>(scalars.size())});
  bool needs = false;
  std::vector<int> ids;
  ids.reserve(scalars.size());
  for (size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& sv = value(scalars[i]);
    if (sv.numel() != 1) throw std::invalid_argument("stack_scalars: non-scalar input");
    out.data[i] = sv.data[0];
    needs = needs || requires_grad(scalars[i]);
    ids.push_back(scalars[i].id);
  }
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    nodes_.back().backward = [ids = std::move(ids), out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      for (size_t i = 0; i < ids.size(); ++i)
        if (t.requires_grad(Var{ids[i]})) t.grad_buffer(ids[i]).data[0] += g.data[i];
    };
  }
  return Var{out_id};
}

Var Tape::sum(Var a) {
  const Tensor& av = value(a);
  double total = std::accumulate(av.data.begin(), av.data.end(), 0.0);
  bool needs = requires_grad(a);
  int out_id = push(Tensor::scalar(total), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id](Tape& t) {
      double g = t.nodes_[static_cast<size_t>(out_id)].grad.data[0];
      Tensor& ga = t.grad_buffer(aid);
      for (double& x : ga.data) x += g;
    };
  }
  return Var{out_id};
}

Var Tape::mean(Var a) {
  const Tensor& av = value(a);
  double inv = 1.0 / static_cast<double>(av.numel());
  return scale(sum(a), inv);
}

Var Tape::sqrt_elem(Var a) {
  const Tensor& av = value(a);
  Tensor out = av;
  for (double& x : out.data) x = std::sqrt(std::max(x, 0.0));
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& ov = t.nodes_[static_cast<size_t>(out_id)].value;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * 0.5 / std::max(ov.data[i], 1e-12);
    };
  }
  return Var{out_id};
}

Var Tape::atan2_elem(Var y, Var x) {
  const Tensor& yv = value(y);
  const Tensor& xv = value(x);
  require_same_shape(yv, xv, "atan2");
  Tensor out = yv;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::atan2(yv.data[i], xv.data[i]);
  bool needs = requires_grad(y) || requires_grad(x);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int yid = y.id, xid = x.id;
    nodes_.back().backward = [yid, xid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& yv2 = t.nodes_[static_cast<size_t>(yid)].value;
      const Tensor& xv2 = t.nodes_[static_cast<size_t>(xid)].value;
      bool need_y = t.requires_grad(Var{yid});
      bool need_x = t.requires_grad(Var{xid});
      Tensor* gy = need_y ? &t.grad_buffer(yid) : nullptr;
      Tensor* gx = need_x ? &t.grad_buffer(xid) : nullptr;
      for (size_t i = 0; i < g.data.size(); ++i) {
        double yy = yv2.data[i], xx = xv2.data[i];
        double denom = std::max(yy * yy + xx * xx, 1e-30);
        if (gy) gy->data[i] += g.data[i] * xx / denom;
        if (gx) gx->data[i] -= g.data[i] * yy / denom;
      }
    };
  }
  return Var{out_id};
}

Var Tape::asin_clamped(Var a) {
  static constexpr double kLimit = 1.0 - 1e-9;
  const Tensor& av = value(a);
  Tensor out = av;
  for (double& x : out.data) x = std::asin(std::clamp(x, -kLimit, kLimit));
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      const Tensor& av2 = t.nodes_[static_cast<size_t>(aid)].value;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < g.data.size(); ++i) {
        // Derivative taken at the clamped abscissa so the chain stays finite
        // (and informative) even when a root argument grazes +-pi.
        double x = std::clamp(av2.data[i], -kLimit, kLimit);
        ga.data[i] += g.data[i] / std::sqrt(1.0 - x * x);
      }
    };
  }
  return Var{out_id};
}

Var Tape::wrap_mod(Var a, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("wrap_mod: period must be positive");
  const Tensor& av = value(a);
  Tensor out = av;
  for (double& x : out.data) x -= period * std::round(x / period);
  bool needs = requires_grad(a);
  int out_id = push(std::move(out), needs, nullptr);
  if (needs) {
    int aid = a.id;
    nodes_.back().backward = [aid, out_id](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(out_id)].grad;
      Tensor& ga = t.grad_buffer(aid);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    };
  }
  return Var{out_id};
}

Tape::EighResult Tape::eigh(CVar hermitian) {
  const Tensor& rev = value(hermitian.re);
  const Tensor& imv = value(hermitian.im);
  require_rank(rev, 2, "eigh");
  require_same_shape(rev, imv, "eigh");
  int n = rev.shape[0];
  if (rev.shape[1] != n) throw std::invalid_argument("eigh: matrix is not square");
  Eigen::MatrixXcd r = matrix_from_tensors(rev, imv);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (r + r.adjoint()));
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigh: eigendecomposition failed to converge");

  auto ctx = std::make_shared<std::pair<Eigen::VectorXd, Eigen::MatrixXcd>>();
  ctx->first = solver.eigenvalues().reverse();  // descending
  ctx->second = Eigen::MatrixXcd(n, n);
  for (int k = 0; k < n; ++k) ctx->second.col(k) = solver.eigenvectors().col(n - 1 - k);

  bool needs = requires_grad(hermitian.re) || requires_grad(hermitian.im);
  int re_id = hermitian.re.id, im_id = hermitian.im.id;

  // Shared helper turning a complex adjoint matrix into gradient updates of
  // the Hermitian input. The adjoint convention throughout is
  //   conj-gradient(A)_ij = dL/dRe(A_ij) + i dL/dIm(A_ij).
  auto emit = [re_id, im_id](Tape& t, const Eigen::MatrixXcd& adjoint_raw) {
    Eigen::MatrixXcd adj = 0.5 * (adjoint_raw + adjoint_raw.adjoint());
    if (t.requires_grad(Var{re_id})) {
      Tensor& gr = t.grad_buffer(re_id);
      int nn = static_cast<int>(adj.rows());
      RowMap(gr.data.data(), nn, nn) += adj.real();
    }
    if (t.requires_grad(Var{im_id})) {
      Tensor& gi = t.grad_buffer(im_id);
      int nn = static_cast<int>(adj.rows());
      RowMap(gi.data.data(), nn, nn) += adj.imag();
    }
  };

  Tensor lam_t = Tensor::zeros({n});
  for (int k = 0; k < n; ++k) lam_t.data[static_cast<size_t>(k)] = ctx->first(k);
  int lam_id = push(std::move(lam_t), needs, nullptr);
  if (needs) {
    nodes_.back().backward = [ctx, emit, lam_id, n](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(lam_id)].grad;
      Eigen::VectorXd lbar(n);
      for (int k = 0; k < n; ++k) lbar(k) = g.data[static_cast<size_t>(k)];
      const Eigen::MatrixXcd& u = ctx->second;
      emit(t, u * lbar.asDiagonal() * u.adjoint());
    };
  }

  auto vec_backward = [this, ctx, emit, n, needs](bool imaginary_part) {
    auto [ure, uim] = tensor_from_complex(ctx->second);
    Tensor val = imaginary_part ? std::move(uim) : std::move(ure);
    int id = push(std::move(val), needs, nullptr);
    if (needs) {
      nodes_.back().backward = [ctx, emit, id, n, imaginary_part](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
        Eigen::MatrixXcd ubar(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double gv = g.data[static_cast<size_t>(i * n + j)];
            ubar(i, j) = imaginary_part ? std::complex<double>(0.0, gv)
                                        : std::complex<double>(gv, 0.0);
          }
        const Eigen::MatrixXcd& u = ctx->second;
        const Eigen::VectorXd& lam = ctx->first;
        double lam_scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-30);
        double tol = 1e-8 * lam_scale;
        Eigen::MatrixXcd inner = u.adjoint() * ubar;  // (U^H Ubar)_{jk} = u_j^H ubar_k
        Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(n, n);
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            double gap = lam(k) - lam(j);
            if (std::abs(gap) < tol) {
              gap = gap < 0.0 ? -tol : tol;
              ++t.gap_clamp_count_;
            }
            b(j, k) = inner(j, k) / gap;
          }
        emit(t, u * b * u.adjoint());
      };
    }
    return Var{id};
  };

  EighResult result;
  result.eigenvalues = Var{lam_id};
  result.vectors.re = vec_backward(false);
  result.vectors.im = vec_backward(true);
  return result;
}

CVar Tape::polyroots(CVar coeffs) {
  const Tensor& rev = value(coeffs.re);
  const Tensor& imv = value(coeffs.im);
  require_rank(rev, 1, "polyroots");
  require_same_shape(rev, imv, "polyroots");
  int len = rev.shape[0];
  if (len < 2) throw std::invalid_argument("polyroots: need at least a linear polynomial");
  Eigen::VectorXcd c(len);
  for (int i = 0; i < len; ++i)
    c(i) = std::complex<double>(rev.data[static_cast<size_t>(i)],
                                imv.data[static_cast<size_t>(i)]);
  auto ctx = std::make_shared<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>>();
  ctx->first = c;
  ctx->second = polynomial_roots(c);
  int degree = len - 1;

  bool needs = requires_grad(coeffs.re) || requires_grad(coeffs.im);
  int cre_id = coeffs.re.id, cim_id = coeffs.im.id;

  auto emit = [cre_id, cim_id, len](Tape& t, const Eigen::VectorXcd& cbar) {
    if (t.requires_grad(Var{cre_id})) {
      Tensor& gr = t.grad_buffer(cre_id);
      for (int i = 0; i < len; ++i) gr.data[static_cast<size_t>(i)] += cbar(i).real();
    }
    if (t.requires_grad(Var{cim_id})) {
      Tensor& gi = t.grad_buffer(cim_id);
      for (int i = 0; i < len; ++i) gi.data[static_cast<size_t>(i)] += cbar(i).imag();
    }
  };

  auto root_backward = [this, ctx, emit, degree, len, needs](bool imaginary_part) {
    Tensor val = Tensor::zeros({degree});
    for (int k = 0; k < degree; ++k)
      val.data[static_cast<size_t>(k)] =
          imaginary_part ? ctx->second(k).imag() : ctx->second(k).real();
    int id = push(std::move(val), needs, nullptr);
    if (needs) {
      nodes_.back().backward = [ctx, emit, id, degree, len, imaginary_part](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
        Eigen::VectorXcd cbar = Eigen::VectorXcd::Zero(len);
        for (int k = 0; k < degree; ++k) {
          double gv = g.data[static_cast<size_t>(k)];
          if (gv == 0.0) continue;
          std::complex<double> zbar =
              imaginary_part ? std::complex<double>(0.0, gv)
                             : std::complex<double>(gv, 0.0);
          std::complex<double> z = ctx->second(k);
          std::complex<double> dp = polynomial_derivative_eval(ctx->first, z);
          if (std::abs(dp) < 1e-12) {
            // Root is (numerically) multiple: the implicit-function
            // sensitivity blows up, so drop this root's contribution.
            ++t.multiple_root_count_;
            continue;
          }
          // Implicit differentiation of p(z; c) = 0: dz/dc_n = -z^n / p'(z).
          std::complex<double> zpow(1.0, 0.0);
          for (int nidx = 0; nidx < len; ++nidx) {
            std::complex<double> dz_dc = -zpow / dp;
            cbar(nidx) += std::conj(dz_dc) * zbar;
            zpow *= z;
          }
        }
        emit(t, cbar);
      };
    }
    return Var{id};
  };

  CVar roots;
  roots.re = root_backward(false);
  roots.im = root_backward(true);
  return roots;
}

CVar cadd(Tape& t, CVar a, CVar b) { return {t.add(a.re, b.re), t.add(a.im, b.im)}; }

CVar csub(Tape& t, CVar a, CVar b) { return {t.sub(a.re, b.re), t.sub(a.im, b.im)}; }

CVar cconj(Tape& t, CVar a) { return {a.re, t.neg(a.im)}; }

CVar cmatmul(Tape& t, CVar a, CVar b) {
  Var re = t.sub(t.matmul(a.re, b.re), t.matmul(a.im, b.im));
  Var im = t.add(t.matmul(a.re, b.im), t.matmul(a.im, b.re));
  return {re, im};
}

CVar cadjoint(Tape& t, CVar a) {
  return {t.transpose(a.re), t.neg(t.transpose(a.im))};
}

CVar hermitian_gram(Tape& t, CVar k, double epsilon) {
  CVar gram = cmatmul(t, k, cadjoint(t, k));
  int n = t.value(gram.re).shape[0];
  Eigen::MatrixXd eye = epsilon * Eigen::MatrixXd::Identity(n, n);
  gram.re = t.add(gram.re, t.constant(tensor_from_real(eye)));
  return gram;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double learning_rate, double beta1, double beta2,
               double epsilon) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient sizes differ");
  if (state.first_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size())
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  ++state.step;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    state.first_moment[i] = beta1 * state.first_moment[i] + (1.0 - beta1) * g;
    state.second_moment[i] = beta2 * state.second_moment[i] + (1.0 - beta2) * g * g;
    double mhat = state.first_moment[i] / c1;
    double vhat = state.second_moment[i] / c2;
    params[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
  }
}

}  // namespace doa
