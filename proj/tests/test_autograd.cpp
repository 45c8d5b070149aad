#include <gtest/gtest.h>

#include <functional>

#include "ddmlab/autograd.hpp"
#include "oracles.hpp"

using namespace ddmlab;

namespace {

using UnaryOp = std::function<ag::Var(ag::Var)>;

// Contracts the op output with a fixed random weighting so every output
// entry contributes to the scalar.
double contracted(const UnaryOp& op, const Mat& x, Mat* grad = nullptr) {
  ag::Tape t;
  ag::Var in = t.input(x);
  ag::Var y = op(in);
  const Mat w = oracle::random_matrix(y.rows(), y.cols(), 99);
  ag::Var s = ag::sum(ag::mul_const(y, w));
  if (grad) {
    t.backward(s);
    *grad = in.grad();
  }
  return s.item();
}

void expect_gradient(const UnaryOp& op, const Mat& x, const char* name) {
  Mat analytic;
  contracted(op, x, &analytic);
  const Mat numeric = oracle::numeric_gradient([&](const Mat& m) { return contracted(op, m); }, x);
  EXPECT_LE(oracle::gradient_mismatch(analytic, numeric, 1e-3, 1e-7), 1.0) << name;
}

}  // namespace

TEST(Autograd, ElementwiseAndLinearGradients) {
  const Mat x = oracle::random_matrix(4, 3, 1);
  const Mat other = oracle::random_matrix(4, 3, 2);
  const Mat right = oracle::random_matrix(3, 5, 3);
  expect_gradient([&](ag::Var v) { return ag::add(v, v.tape()->constant(other)); }, x, "add");
  expect_gradient([&](ag::Var v) { return ag::sub(v.tape()->constant(other), v); }, x, "sub");
  expect_gradient([&](ag::Var v) { return ag::mul(v, v); }, x, "mul");
  expect_gradient([&](ag::Var v) { return ag::mul_const(v, other); }, x, "mul_const");
  expect_gradient([](ag::Var v) { return ag::scale(v, -2.5); }, x, "scale");
  expect_gradient([](ag::Var v) { return ag::add_scalar(v, 3.0); }, x, "add_scalar");
  expect_gradient([](ag::Var v) { return ag::add_row(v, ag::slice_rows(v, 0, 1)); }, x, "add_row");
  expect_gradient([](ag::Var v) { return ag::mul_row(v, ag::slice_rows(v, 1, 1)); }, x, "mul_row");
  expect_gradient([&](ag::Var v) { return ag::matmul(v, v.tape()->constant(right)); }, x, "matmul");
  expect_gradient([](ag::Var v) { return ag::matmul_nt(v, v); }, x, "matmul_nt");
  expect_gradient([](ag::Var v) { return ag::transpose(v); }, x, "transpose");
  expect_gradient([](ag::Var v) { return ag::relu(v); }, x, "relu");
  expect_gradient([](ag::Var v) { return ag::leaky_relu(v, 0.2); }, x, "leaky_relu");
  expect_gradient([](ag::Var v) { return ag::exp(v); }, x, "exp");
  expect_gradient([](ag::Var v) { return ag::log(ag::add_scalar(ag::square(v), 0.5)); }, x, "log");
  expect_gradient([](ag::Var v) { return ag::square(v); }, x, "square");
}

TEST(Autograd, ReductionAndShapeGradients) {
  const Mat x = oracle::random_matrix(5, 4, 4);
  const std::vector<int> rows{4, 0, 0, 2};
  const std::vector<int> cols{3, 0, 1, 1, 2};
  expect_gradient([](ag::Var v) { return ag::sum(v); }, x, "sum");
  expect_gradient([](ag::Var v) { return ag::mean(v); }, x, "mean");
  expect_gradient([](ag::Var v) { return ag::row_sum(v); }, x, "row_sum");
  expect_gradient([](ag::Var v) { return ag::row_norm(v); }, x, "row_norm");
  expect_gradient([](ag::Var v) { return ag::slice_cols(v, 1, 2); }, x, "slice_cols");
  expect_gradient([](ag::Var v) { return ag::slice_rows(v, 2, 3); }, x, "slice_rows");
  expect_gradient([&](ag::Var v) { return ag::select_rows(v, rows); }, x, "select_rows");
  expect_gradient([](ag::Var v) { return ag::concat_rows(v, ag::scale(v, 2.0)); }, x, "concat_rows");
  expect_gradient([&](ag::Var v) { return ag::gather_cols(v, cols); }, x, "gather_cols");
  expect_gradient([](ag::Var v) { return ag::row_normalize(v); }, x, "row_normalize");
  expect_gradient([](ag::Var v) { return ag::col_standardize(v, 1e-5); }, x, "col_standardize");
  Mat mask = Mat::Ones(5, 4);
  mask(0, 1) = 0;
  mask(3, 0) = 0;
  mask.row(2).setZero();
  expect_gradient([&](ag::Var v) { return ag::masked_logsumexp_rows(v, mask); }, x, "masked_logsumexp_rows");
}

TEST(Autograd, ConvolutionHelperGradients) {
  // batch 2, 4x4, 3 channels
  const Mat x = oracle::random_matrix(2 * 16, 3, 5);
  expect_gradient([](ag::Var v) { return ag::im2col3x3(v, 2, 4, 4); }, x, "im2col3x3");
  expect_gradient([](ag::Var v) { return ag::avgpool2(v, 2, 4, 4); }, x, "avgpool2");
  expect_gradient([](ag::Var v) { return ag::global_avgpool(v, 2, 16); }, x, "global_avgpool");
}

TEST(Autograd, Im2colMatchesDirectConvolution) {
  const int b = 1, h = 3, w = 3, c = 2;
  const Mat x = oracle::random_matrix(b * h * w, c, 6);
  ag::Tape t;
  const Mat cols = ag::im2col3x3(t.constant(x), b, h, w).value();
  // centre pixel sees the whole image; kernel offset (dy, dx) in row-major
  // tap order, channels innermost
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int tap = (dy + 1) * 3 + (dx + 1);
      for (int ch = 0; ch < c; ++ch) {
        EXPECT_DOUBLE_EQ(cols(4, tap * c + ch), x((1 + dy) * w + (1 + dx), ch));
      }
    }
  }
  // corner pixel has zero padding outside the image
  EXPECT_DOUBLE_EQ(cols(0, 0), 0.0);
}

TEST(Autograd, MaskedLogsumexpEmptyRowIsZero) {
  ag::Tape t;
  ag::Var in = t.input(Mat::Constant(2, 3, 4.0));
  Mat mask = Mat::Zero(2, 3);
  mask(1, 2) = 1;
  ag::Var out = ag::masked_logsumexp_rows(in, mask);
  EXPECT_EQ(out.value()(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.value()(1, 0), 4.0);
  t.backward(ag::sum(out));
  EXPECT_EQ(in.grad().row(0).squaredNorm(), 0.0);
  EXPECT_DOUBLE_EQ(in.grad()(1, 2), 1.0);
}

TEST(Autograd, ParameterGradientsAccumulateAndDetachBlocks) {
  Parameter p("w", Mat::Constant(2, 2, 1.5));
  ag::Tape t;
  ag::Var w = t.param(p);
  ag::Var y = ag::add(ag::sum(ag::square(w)), ag::sum(ag::detach(ag::square(w))));
  t.backward(y);
  EXPECT_TRUE(p.grad.isApprox(Mat::Constant(2, 2, 3.0)));
  ag::Tape t2;
  t2.backward(ag::sum(t2.param(p)));
  EXPECT_TRUE(p.grad.isApprox(Mat::Constant(2, 2, 4.0)));
}
