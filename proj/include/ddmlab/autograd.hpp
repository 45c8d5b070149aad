#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation of one forward pass; calling
// backward() on a scalar node walks the tape in reverse and accumulates
// gradients into the inputs, including any Parameter leaves.
//
// Feature maps are stored NHWC-flattened: a (batch * height * width) x
// channels matrix. Spatial metadata is carried by the caller.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ddmlab {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

namespace ag {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const;  // value of a 1x1 node

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Data that never receives a gradient.
  Var constant(Mat value);
  /// A differentiable input whose gradient is readable after backward().
  Var input(Mat value);
  /// Leaf bound to a Parameter; backward() adds into param.grad.
  Var param(Parameter& p);

  /// Reverse sweep from a 1x1 node with seed gradient 1.
  void backward(Var root);

  const Mat& value(int id) const { return nodes_[id].value; }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(Mat value, bool needs_grad, Backward backward);
  void accumulate(int id, const Mat& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise and linear algebra ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // elementwise
Var mul_const(Var a, const Mat& m);    // elementwise by a constant
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);           // broadcast 1 x c over rows
Var mul_row(Var a, Var row);           // broadcast 1 x c over rows
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);           // a * b^T
Var transpose(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var detach(Var a);

// ---- reductions ----
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);                    // n x 1
Var row_norm(Var a);                   // n x 1, subgradient 0 at the origin

// ---- shape ----
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var select_rows(Var a, std::span<const int> rows);
Var concat_rows(Var a, Var b);
Var gather_cols(Var a, std::span<const int> cols);  // out(i) = a(i, cols[i])

// ---- normalization ----
/// Row-wise x / max(||x||, eps).
Var row_normalize(Var a, double eps = 1e-12);
/// Column-wise (x - mean) / sqrt(biased_var + eps) over the batch.
Var col_standardize(Var a, double eps);

/// out(i) = log sum_{j: mask(i,j) != 0} exp(a(i,j)); rows with an empty mask
/// yield 0 and receive no gradient.
Var masked_logsumexp_rows(Var a, const Mat& mask);

// ---- convolution helpers (NHWC flattened layout) ----
/// 3x3, stride 1, zero padding 1: (B*H*W) x C -> (B*H*W) x (9*C).
Var im2col3x3(Var x, int batch, int height, int width);
/// 2x2 average pooling: (B*H*W) x C -> (B*H/2*W/2) x C.
Var avgpool2(Var x, int batch, int height, int width);
/// Mean over all spatial positions: (B*H*W) x C -> B x C.
Var global_avgpool(Var x, int batch, int spatial);

}  // namespace ag
}  // namespace ddmlab
