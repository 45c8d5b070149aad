#include "ddmlab/ssl_losses.hpp"

#include "ddmlab/errors.hpp"

namespace ddmlab::ssl {

Baseline parse_baseline(const std::string& name) {
  if (name == "simclr") return Baseline::kSimClr;
  if (name == "simsiam") return Baseline::kSimSiam;
  if (name == "barlow_twins") return Baseline::kBarlowTwins;
  throw ConfigError("unknown baseline '" + name + "' (expected simclr, simsiam or barlow_twins)");
}

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::kSimClr:
      return "simclr";
    case Baseline::kSimSiam:
      return "simsiam";
    case Baseline::kBarlowTwins:
      return "barlow_twins";
  }
  return "?";
}

ag::Var nt_xent(ag::Var z_a, ag::Var z_b, double tau) {
  if (tau <= 0) throw ConfigError("nt_xent: temperature must be positive");
  if (z_a.rows() != z_b.rows() || z_a.cols() != z_b.cols()) throw InputError("nt_xent: view shapes differ");
  const Eigen::Index n = z_a.rows();
  if (n < 2) throw ConfigError("nt_xent: need at least 2 samples for negatives");
  ag::Var z = ag::row_normalize(ag::concat_rows(z_a, z_b), kNormEps);
  ag::Var s = ag::scale(ag::matmul_nt(z, z), 1.0 / tau);
  Mat others = Mat::Ones(2 * n, 2 * n);
  others.diagonal().setZero();
  std::vector<int> positive(static_cast<std::size_t>(2 * n));
  for (Eigen::Index i = 0; i < 2 * n; ++i) positive[static_cast<std::size_t>(i)] = static_cast<int>(i < n ? i + n : i - n);
  ag::Var per_anchor = ag::sub(ag::masked_logsumexp_rows(s, others), ag::gather_cols(s, positive));
  return ag::mean(per_anchor);
}

ag::Var negative_cosine(ag::Var p, ag::Var z) {
  if (p.rows() != z.rows() || p.cols() != z.cols()) throw InputError("negative_cosine: shapes differ");
  ag::Var pn = ag::row_normalize(p, kNormEps);
  ag::Var zn = ag::row_normalize(ag::detach(z), kNormEps);
  return ag::scale(ag::mean(ag::row_sum(ag::mul(pn, zn))), -1.0);
}

ag::Var simsiam_loss(ag::Var p_a, ag::Var z_b, ag::Var p_b, ag::Var z_a) {
  return ag::scale(ag::add(negative_cosine(p_a, z_b), negative_cosine(p_b, z_a)), 0.5);
}

ag::Var barlow_twins_loss(ag::Var z_a, ag::Var z_b, double lambda_off, double eps) {
  if (z_a.rows() != z_b.rows() || z_a.cols() != z_b.cols()) throw InputError("barlow_twins_loss: view shapes differ");
  const Eigen::Index n = z_a.rows();
  if (n < 2) throw ConfigError("barlow_twins_loss: need at least 2 samples for batch statistics");
  const Eigen::Index d = z_a.cols();
  ag::Var a = ag::col_standardize(z_a, eps);
  ag::Var b = ag::col_standardize(z_b, eps);
  ag::Var c = ag::scale(ag::matmul(ag::transpose(a), b), 1.0 / static_cast<double>(n));
  Mat weights = Mat::Constant(d, d, lambda_off);
  weights.diagonal().setOnes();
  Mat identity = Mat::Identity(d, d);
  ag::Tape& tape = *c.tape();
  ag::Var diff = ag::sub(c, tape.constant(identity));
  return ag::sum(ag::mul_const(ag::square(diff), weights));
}

SslHead::SslHead(Baseline baseline, int in_dim, const HeadOptions& opts, Rng& rng)
    : baseline_(baseline), in_dim_(in_dim), opts_(opts) {
  int out = baseline == Baseline::kBarlowTwins ? opts.proj_hidden : opts.proj_dim;
  proj1_ = nn::Linear("head.proj1", in_dim, opts.proj_hidden, rng);
  proj_bn_ = nn::BatchNorm("head.proj_bn", opts.proj_hidden);
  proj2_ = nn::Linear("head.proj2", opts.proj_hidden, out, rng, 1.0);
  if (baseline == Baseline::kSimSiam) {
    pred1_ = nn::Linear("head.pred1", out, opts.pred_hidden, rng);
    pred_bn_ = nn::BatchNorm("head.pred_bn", opts.pred_hidden);
    pred2_ = nn::Linear("head.pred2", opts.pred_hidden, out, rng, 1.0);
  }
}

ag::Var SslHead::project(ag::Tape& tape, ag::Var h) {
  ag::Var x = ag::relu(proj_bn_.forward(tape, proj1_.forward(tape, h)));
  x = proj2_.forward(tape, x);
  // SimSiam's projector ends in a non-affine batch standardization.
  if (baseline_ == Baseline::kSimSiam) x = ag::col_standardize(x, 1e-5);
  return x;
}

ag::Var SslHead::predict(ag::Tape& tape, ag::Var z) {
  ag::Var x = ag::relu(pred_bn_.forward(tape, pred1_.forward(tape, z)));
  return pred2_.forward(tape, x);
}

ag::Var SslHead::loss(ag::Tape& tape, ag::Var h_a, ag::Var h_b) {
  if (h_a.cols() != in_dim_ || h_b.cols() != in_dim_) throw InputError("ssl head: feature width mismatch");
  ag::Var z_a = project(tape, h_a);
  ag::Var z_b = project(tape, h_b);
  switch (baseline_) {
    case Baseline::kSimClr:
      return nt_xent(z_a, z_b, opts_.tau);
    case Baseline::kSimSiam:
      return simsiam_loss(predict(tape, z_a), z_b, predict(tape, z_b), z_a);
    case Baseline::kBarlowTwins:
      return barlow_twins_loss(z_a, z_b, opts_.barlow_lambda);
  }
  throw std::logic_error("unreachable");
}

std::vector<Parameter*> SslHead::parameters() {
  std::vector<Parameter*> out;
  proj1_.collect(out);
  proj_bn_.collect(out);
  proj2_.collect(out);
  if (baseline_ == Baseline::kSimSiam) {
    pred1_.collect(out);
    pred_bn_.collect(out);
    pred2_.collect(out);
  }
  return out;
}

}  // namespace ddmlab::ssl
