#include "ddmlab/ddm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ddmlab/errors.hpp"

namespace ddmlab::ddm {

double sim(std::span<const double> a, std::span<const double> b, double tau) {
  if (a.size() != b.size()) throw InputError("sim: vectors differ in length");
  if (tau <= 0) throw ConfigError("sim: temperature must be positive");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), kNormEps) * std::max(std::sqrt(nb), kNormEps);
  return std::exp(dot / denom / tau);
}

DomainVariantLoss loss_domain_variant(ag::Var prefixes, std::span<const int> labels, double tau) {
  if (tau <= 0) throw ConfigError("loss_domain_variant: temperature must be positive");
  const Eigen::Index v = prefixes.rows();
  if (static_cast<Eigen::Index>(labels.size()) != v) throw InputError("loss_domain_variant: label count mismatch");

  Mat same = Mat::Zero(v, v);
  Mat cross = Mat::Zero(v, v);
  Mat anchor = Mat::Zero(v, 1);
  DomainVariantLoss out;
  for (Eigen::Index i = 0; i < v; ++i) {
    bool has_same = false, has_cross = false;
    for (Eigen::Index j = 0; j < v; ++j) {
      if (labels[i] == labels[j]) {
        if (i != j) {
          same(i, j) = 1.0;
          has_same = true;
        }
      } else {
        cross(i, j) = 1.0;
        has_cross = true;
      }
    }
    if (has_same && has_cross) {
      anchor(i, 0) = 1.0;
      ++out.anchors_used;
    } else {
      ++out.anchors_skipped;
    }
  }

  ag::Var p = ag::row_normalize(prefixes, kNormEps);
  ag::Var s = ag::scale(ag::matmul_nt(p, p), 1.0 / tau);
  ag::Var log_ratio = ag::sub(ag::masked_logsumexp_rows(s, same), ag::masked_logsumexp_rows(s, cross));
  out.value = ag::sum(ag::mul_const(log_ratio, anchor));
  return out;
}

Critic::Critic(int in_dim, int hidden, int num_domains, Rng& rng, double slope) : slope_(slope) {
  if (num_domains < 1) throw ConfigError("critic: need at least one domain head");
  l1_ = nn::Linear("critic.l1", in_dim, hidden, rng);
  l2_ = nn::Linear("critic.l2", hidden, hidden, rng);
  l3_ = nn::Linear("critic.l3", hidden, num_domains, rng, 1.0);
}

ag::Var Critic::forward(ag::Tape& tape, ag::Var h) {
  if (h.cols() != in_dim()) throw InputError("critic: input width mismatch");
  ag::Var x = ag::leaky_relu(l1_.forward(tape, h), slope_);
  x = ag::leaky_relu(l2_.forward(tape, x), slope_);
  return l3_.forward(tape, x);
}

ag::Var Critic::input_gradient(ag::Tape& tape, const Mat& h, std::span<const int> labels) {
  if (h.cols() != in_dim()) throw InputError("critic: input width mismatch");
  if (static_cast<Eigen::Index>(labels.size()) != h.rows()) throw InputError("critic: label count mismatch");
  auto slopes = [this](const Mat& z) {
    return Mat(z.unaryExpr([this](double x) { return x > 0.0 ? 1.0 : slope_; }));
  };
  Mat z1 = (h * l1_.weight.value).rowwise() + l1_.bias.value.row(0);
  Mat s1 = slopes(z1);
  Mat a1 = z1.cwiseProduct(s1);
  Mat z2 = (a1 * l2_.weight.value).rowwise() + l2_.bias.value.row(0);
  Mat s2 = slopes(z2);

  Mat onehot = Mat::Zero(h.rows(), num_domains());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_domains()) throw InputError("critic: domain label out of range");
    onehot(i, labels[i]) = 1.0;
  }
  ag::Var g = ag::matmul_nt(tape.constant(std::move(onehot)), tape.param(l3_.weight));
  g = ag::mul_const(g, s2);
  g = ag::mul_const(ag::matmul_nt(g, tape.param(l2_.weight)), s1);
  return ag::matmul_nt(g, tape.param(l1_.weight));
}

std::vector<Parameter*> Critic::parameters() {
  std::vector<Parameter*> out;
  l1_.collect(out);
  l2_.collect(out);
  l3_.collect(out);
  return out;
}

void Critic::set_weights(const Mat& w1, const Mat& b1, const Mat& w2, const Mat& b2, const Mat& w3, const Mat& b3) {
  l1_.weight = Parameter("critic.l1.weight", w1);
  l1_.bias = Parameter("critic.l1.bias", b1);
  l2_.weight = Parameter("critic.l2.weight", w2);
  l2_.bias = Parameter("critic.l2.bias", b2);
  l3_.weight = Parameter("critic.l3.weight", w3);
  l3_.bias = Parameter("critic.l3.bias", b3);
}

ag::Var critic_score(Critic& critic, ag::Tape& tape, ag::Var h, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != h.rows()) throw InputError("critic_score: label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= critic.num_domains()) throw InputError("critic_score: domain label out of range");
  }
  return ag::gather_cols(critic.forward(tape, h), labels);
}

LabelPrior::LabelPrior(std::vector<double> weights) : weights_(std::move(weights)) {
  double total = 0;
  for (double w : weights_) {
    if (w < 0 || !std::isfinite(w)) throw ConfigError("label prior: weights must be finite and non-negative");
    total += w;
  }
  if (weights_.empty() || total <= 0) throw ConfigError("label prior: needs positive total weight");
}

LabelPrior LabelPrior::from_labels(std::span<const int> labels, int num_domains) {
  std::vector<double> counts(static_cast<std::size_t>(num_domains), 0.0);
  for (int y : labels) {
    if (y >= num_domains) throw InputError("label prior: label out of range");
    if (y >= 0) counts[static_cast<std::size_t>(y)] += 1.0;
  }
  return LabelPrior(std::move(counts));
}

int LabelPrior::sample(Rng& rng) const {
  std::discrete_distribution<int> dist(weights_.begin(), weights_.end());
  return dist(rng);
}

ag::Var loss_domain_invariant(Critic& critic, ag::Tape& tape, ag::Var h, std::span<const int> labels,
                              std::span<const int> y_rand) {
  if (labels.size() != y_rand.size()) throw InputError("loss_domain_invariant: label count mismatch");
  if (labels.empty()) throw InputError("loss_domain_invariant: empty batch");
  ag::Var scores = critic.forward(tape, h);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= critic.num_domains() || y_rand[i] < 0 || y_rand[i] >= critic.num_domains()) {
      throw InputError("loss_domain_invariant: domain label out of range");
    }
  }
  return ag::mean(ag::sub(ag::gather_cols(scores, labels), ag::gather_cols(scores, y_rand)));
}

DomainInvariantLoss loss_domain_invariant(Critic& critic, ag::Tape& tape, ag::Var h, std::span<const int> labels,
                                          const LabelPrior& prior, Rng& rng) {
  DomainInvariantLoss out;
  out.y_rand.resize(labels.size());
  for (int& y : out.y_rand) y = prior.sample(rng);
  out.value = loss_domain_invariant(critic, tape, h, labels, out.y_rand);
  return out;
}

ag::Var gradient_penalty_at(Critic& critic, ag::Tape& tape, const Mat& points, std::span<const int> labels) {
  if (points.rows() == 0) throw InputError("gradient_penalty: empty batch");
  ag::Var grad = critic.input_gradient(tape, points, labels);
  return ag::mean(ag::square(ag::add_scalar(ag::row_norm(grad), -1.0)));
}

GradientPenalty gradient_penalty(Critic& critic, ag::Tape& tape, const Mat& h, std::span<const int> labels, Rng& rng) {
  if (h.rows() == 0) throw InputError("gradient_penalty: empty batch");
  GradientPenalty out;
  const Eigen::Index b = h.rows();
  out.interpolated.resize(b, h.cols());
  out.partner.resize(static_cast<std::size_t>(b));
  out.mix.resize(static_cast<std::size_t>(b));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(b) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int j = pick(rng);
    const double u = unit(rng);
    out.partner[static_cast<std::size_t>(i)] = j;
    out.mix[static_cast<std::size_t>(i)] = u;
    out.interpolated.row(i) = u * h.row(i) + (1.0 - u) * h.row(j);
  }
  out.value = gradient_penalty_at(critic, tape, out.interpolated, labels);
  return out;
}

double combined_encoder_objective(double l_ssl, double l_d_var, double l_d_invar, const DdmConfig& cfg) {
  return l_ssl - cfg.lambda_var * l_d_var + cfg.lambda_invar * l_d_invar;
}

ag::Var combined_encoder_objective(ag::Var l_ssl, ag::Var l_d_var, ag::Var l_d_invar, const DdmConfig& cfg) {
  return ag::add(ag::sub(l_ssl, ag::scale(l_d_var, cfg.lambda_var)), ag::scale(l_d_invar, cfg.lambda_invar));
}

double critic_objective(double l_d_invar, double gp, const DdmConfig& cfg) { return l_d_invar - cfg.gp_weight * gp; }

}  // namespace ddmlab::ddm
