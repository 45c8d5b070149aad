#include "ddmlab/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ddmlab::ag {

const Mat& Var::value() const { return tape_->value(id_); }
const Mat& Var::grad() const { return tape_->grad(id_); }
double Var::item() const {
  const Mat& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw std::logic_error("item() on non-scalar node");
  return v(0, 0);
}

Var Tape::push(Mat value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Mat value) { return push(std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, true, nullptr);
  nodes_[v.id()].param = &p;
  return v;
}

void Tape::accumulate(int id, const Mat& g) { accumulate_expr(id, g); }

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::logic_error("backward() on a foreign node");
  const Mat& rv = nodes_[root.id()].value;
  if (rv.rows() != 1 || rv.cols() != 1) throw std::logic_error("backward() needs a scalar root");
  nodes_[root.id()].grad = Mat::Ones(1, 1);
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      // Closures only accumulate into earlier nodes; the node vector never grows here.
      n.backward(*this, id);
    } else if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

namespace {

Tape& tape_of(Var a) { return *a.tape(); }

void check_same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::logic_error("operands recorded on different tapes");
}

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate_expr(ib, -t.grad(self));
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  check_same_shape(a.value(), b.value(), "mul");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape& t, int self) {
                  const Mat& g = t.grad(self);
                  if (t.needs_grad(ia)) t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
                  if (t.needs_grad(ib)) t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
                });
}

Var mul_const(Var a, const Mat& m) {
  Tape& t = tape_of(a);
  check_same_shape(a.value(), m, "mul_const");
  const int ia = a.id();
  return t.push(a.value().cwiseProduct(m), t.needs_grad(ia),
                [ia, m](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self).cwiseProduct(m)); });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value() * s, t.needs_grad(ia),
                [ia, s](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self) * s); });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value().array() + s, t.needs_grad(ia),
                [ia](Tape& t, int self) { t.accumulate(ia, t.grad(self)); });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row);
  Tape& t = tape_of(a);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  const int ia = a.id(), ir = row.id();
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ir), [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) t.accumulate_expr(ir, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  check_same_tape(a, row);
  Tape& t = tape_of(a);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: shape mismatch");
  const int ia = a.id(), ir = row.id();
  Mat out = a.value().array().rowwise() * row.value().row(0).array();
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ir), [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Mat ga = g.array().rowwise() * t.value(ir).row(0).array();
      t.accumulate(ia, ga);
    }
    if (t.needs_grad(ir)) t.accumulate_expr(ir, g.cwiseProduct(t.value(ia)).colwise().sum());
  });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  Mat out = a.value() * b.value();
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  Mat out = a.value() * b.value().transpose();
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate_expr(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate_expr(ib, g.transpose() * t.value(ia));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value().transpose(), t.needs_grad(ia),
                [ia](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self).transpose()); });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return t.push(std::move(out), t.needs_grad(ia), [ia, slope](Tape& t, int self) {
    Mat g = t.grad(self);
    const Mat& x = t.value(ia);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (!(x.data()[i] > 0.0)) g.data()[i] *= slope;
    }
    t.accumulate(ia, g);
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out = a.value().array().exp();
  return t.push(std::move(out), t.needs_grad(ia),
                [ia](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self).cwiseProduct(t.value(self))); });
}

Var log(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out = a.value().array().log();
  return t.push(std::move(out), t.needs_grad(ia),
                [ia](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self).cwiseQuotient(t.value(ia))); });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out = a.value().array().square();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& t, int self) {
    t.accumulate_expr(ia, 2.0 * t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& t, int self) {
    const Mat& x = t.value(ia);
    t.accumulate_expr(ia, Mat::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out = a.value().rowwise().sum();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const Mat& x = t.value(ia);
    Mat gx = g.col(0).replicate(1, x.cols());
    t.accumulate(ia, gx);
  });
}

Var row_norm(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Mat out = a.value().rowwise().norm();
  return t.push(std::move(out), t.needs_grad(ia), [ia](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const Mat& x = t.value(ia);
    const Mat& n = t.value(self);
    Mat gx = Mat::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (n(i, 0) > 0.0) gx.row(i) = x.row(i) * (g(i, 0) / n(i, 0));
    }
    t.accumulate(ia, gx);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  const int ia = a.id();
  Mat out = a.value().middleCols(start, count);
  return t.push(std::move(out), t.needs_grad(ia), [ia, start, count](Tape& t, int self) {
    const Mat& x = t.value(ia);
    Mat gx = Mat::Zero(x.rows(), x.cols());
    gx.middleCols(start, count) = t.grad(self);
    t.accumulate(ia, gx);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  const int ia = a.id();
  Mat out = a.value().middleRows(start, count);
  return t.push(std::move(out), t.needs_grad(ia), [ia, start, count](Tape& t, int self) {
    const Mat& x = t.value(ia);
    Mat gx = Mat::Zero(x.rows(), x.cols());
    gx.middleRows(start, count) = t.grad(self);
    t.accumulate(ia, gx);
  });
}

Var select_rows(Var a, std::span<const int> rows) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  std::vector<int> idx(rows.begin(), rows.end());
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows()) throw std::out_of_range("select_rows");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  return t.push(std::move(out), t.needs_grad(ia), [ia, idx](Tape& t, int self) {
    const Mat& x = t.value(ia);
    const Mat& g = t.grad(self);
    Mat gx = Mat::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(ia, gx);
  });
}

Var concat_rows(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  if (a.cols() != b.cols()) throw std::invalid_argument("concat_rows: column mismatch");
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ra = a.rows();
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  return t.push(std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib, ra](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate_expr(ia, g.topRows(ra));
    if (t.needs_grad(ib)) t.accumulate_expr(ib, g.bottomRows(g.rows() - ra));
  });
}

Var gather_cols(Var a, std::span<const int> cols) {
  Tape& t = tape_of(a);
  if (static_cast<Eigen::Index>(cols.size()) != a.rows()) throw std::invalid_argument("gather_cols: size mismatch");
  const int ia = a.id();
  std::vector<int> idx(cols.begin(), cols.end());
  Mat out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.cols()) throw std::out_of_range("gather_cols: column index");
    out(i, 0) = a.value()(i, idx[i]);
  }
  return t.push(std::move(out), t.needs_grad(ia), [ia, idx](Tape& t, int self) {
    const Mat& x = t.value(ia);
    const Mat& g = t.grad(self);
    Mat gx = Mat::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) gx(i, idx[i]) = g(i, 0);
    t.accumulate(ia, gx);
  });
}

Var row_normalize(Var a, double eps) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  const Mat& x = a.value();
  Vec norms = x.rowwise().norm();
  Vec denom = norms.cwiseMax(eps);
  Mat out = x.array().colwise() / denom.array();
  return t.push(std::move(out), t.needs_grad(ia), [ia, norms, denom, eps](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const Mat& y = t.value(self);
    Mat gx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (norms(i) > eps) {
        const double proj = y.row(i).dot(g.row(i));
        gx.row(i) = (g.row(i) - proj * y.row(i)) / denom(i);
      } else {
        gx.row(i) = g.row(i) / eps;
      }
    }
    t.accumulate(ia, gx);
  });
}

Var col_standardize(Var a, double eps) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  const Mat& x = a.value();
  const double n = static_cast<double>(x.rows());
  if (x.rows() < 1) throw std::invalid_argument("col_standardize: empty batch");
  Eigen::RowVectorXd mu = x.colwise().mean();
  Mat centered = x.rowwise() - mu;
  Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
  Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Mat out = centered.array().rowwise() * inv_std.array();
  return t.push(std::move(out), t.needs_grad(ia), [ia, inv_std, n](Tape& t, int self) {
    // dx = inv_std * (g - mean(g) - y * mean(g * y))
    const Mat& g = t.grad(self);
    const Mat& y = t.value(self);
    Eigen::RowVectorXd g_mean = g.colwise().mean();
    Eigen::RowVectorXd gy_mean = g.cwiseProduct(y).colwise().sum() / n;
    Mat gx = g.rowwise() - g_mean;
    gx -= (y.array().rowwise() * gy_mean.array()).matrix();
    gx = gx.array().rowwise() * inv_std.array();
    t.accumulate(ia, gx);
  });
}

Var masked_logsumexp_rows(Var a, const Mat& mask) {
  Tape& t = tape_of(a);
  check_same_shape(a.value(), mask, "masked_logsumexp_rows");
  const int ia = a.id();
  const Mat& x = a.value();
  Mat out = Mat::Zero(x.rows(), 1);
  Mat weights = Mat::Zero(x.rows(), x.cols());  // softmax over the masked entries
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (mask(i, j) != 0.0) mx = std::max(mx, x(i, j));
    }
    if (!std::isfinite(mx)) continue;
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (mask(i, j) != 0.0) {
        weights(i, j) = std::exp(x(i, j) - mx);
        s += weights(i, j);
      }
    }
    weights.row(i) /= s;
    out(i, 0) = mx + std::log(s);
  }
  return t.push(std::move(out), t.needs_grad(ia), [ia, weights](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat gx = weights.array().colwise() * g.col(0).array();
    t.accumulate(ia, gx);
  });
}

Var im2col3x3(Var x, int batch, int height, int width) {
  Tape& t = tape_of(x);
  const Eigen::Index channels = x.cols();
  const Eigen::Index rows = static_cast<Eigen::Index>(batch) * height * width;
  if (x.rows() != rows) throw std::invalid_argument("im2col3x3: row count does not match batch*height*width");
  const int ix = x.id();
  const Mat& in = x.value();
  Mat out = Mat::Zero(rows, 9 * channels);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        const Eigen::Index r = (static_cast<Eigen::Index>(b) * height + y) * width + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= width) continue;
            const Eigen::Index src = (static_cast<Eigen::Index>(b) * height + sy) * width + sx;
            out.block(r, (ky * 3 + kx) * channels, 1, channels) = in.row(src);
          }
        }
      }
    }
  }
  return t.push(std::move(out), t.needs_grad(ix), [ix, batch, height, width, channels](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat gx = Mat::Zero(g.rows(), channels);
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) {
          const Eigen::Index r = (static_cast<Eigen::Index>(b) * height + y) * width + xx;
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = xx + kx - 1;
              if (sx < 0 || sx >= width) continue;
              const Eigen::Index src = (static_cast<Eigen::Index>(b) * height + sy) * width + sx;
              gx.row(src) += g.block(r, (ky * 3 + kx) * channels, 1, channels);
            }
          }
        }
      }
    }
    t.accumulate(ix, gx);
  });
}

Var avgpool2(Var x, int batch, int height, int width) {
  Tape& t = tape_of(x);
  if (height % 2 != 0 || width % 2 != 0) throw std::invalid_argument("avgpool2: odd spatial size");
  if (x.rows() != static_cast<Eigen::Index>(batch) * height * width) throw std::invalid_argument("avgpool2: rows");
  const int ix = x.id();
  const int oh = height / 2, ow = width / 2;
  const Mat& in = x.value();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(batch) * oh * ow, in.cols());
  auto src_row = [=](int b, int y, int xx) { return (static_cast<Eigen::Index>(b) * height + y) * width + xx; };
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        const Eigen::Index r = (static_cast<Eigen::Index>(b) * oh + y) * ow + xx;
        out.row(r) = 0.25 * (in.row(src_row(b, 2 * y, 2 * xx)) + in.row(src_row(b, 2 * y, 2 * xx + 1)) +
                             in.row(src_row(b, 2 * y + 1, 2 * xx)) + in.row(src_row(b, 2 * y + 1, 2 * xx + 1)));
      }
    }
  }
  return t.push(std::move(out), t.needs_grad(ix), [ix, batch, oh, ow, src_row](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat gx = Mat::Zero(static_cast<Eigen::Index>(batch) * oh * ow * 4, g.cols());
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          const Eigen::Index r = (static_cast<Eigen::Index>(b) * oh + y) * ow + xx;
          const Eigen::RowVectorXd q = 0.25 * g.row(r);
          gx.row(src_row(b, 2 * y, 2 * xx)) += q;
          gx.row(src_row(b, 2 * y, 2 * xx + 1)) += q;
          gx.row(src_row(b, 2 * y + 1, 2 * xx)) += q;
          gx.row(src_row(b, 2 * y + 1, 2 * xx + 1)) += q;
        }
      }
    }
    t.accumulate(ix, gx);
  });
}

Var global_avgpool(Var x, int batch, int spatial) {
  Tape& t = tape_of(x);
  if (x.rows() != static_cast<Eigen::Index>(batch) * spatial) throw std::invalid_argument("global_avgpool: rows");
  const int ix = x.id();
  const Mat& in = x.value();
  Mat out(batch, in.cols());
  for (int b = 0; b < batch; ++b) {
    out.row(b) = in.middleRows(static_cast<Eigen::Index>(b) * spatial, spatial).colwise().mean();
  }
  return t.push(std::move(out), t.needs_grad(ix), [ix, batch, spatial](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat gx(static_cast<Eigen::Index>(batch) * spatial, g.cols());
    for (int b = 0; b < batch; ++b) {
      gx.middleRows(static_cast<Eigen::Index>(b) * spatial, spatial) =
          (g.row(b) / static_cast<double>(spatial)).replicate(spatial, 1);
    }
    t.accumulate(ix, gx);
  });
}

}  // namespace ddmlab::ag
