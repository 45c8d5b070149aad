#pragma once

// Domain disentanglement losses.
//
//  * Domain-variant prefix loss: for each anchor i over the 2N views,
//      log( sum_{j != i, y_j = y_i} sim(h_i^d, h_j^d) / sum_{y_j != y_i} sim(h_i^d, h_j^d) )
//    with sim(a, b) = exp(cos(a, b) / tau). Larger is better for the encoder.
//  * Domain-invariance loss: Wasserstein dual estimate
//      D(h^p, y) - D(h^p, y_rand),  y_rand ~ empirical domain-label prior,
//    from an M-headed critic D. The critic ascends it (minus a gradient
//    penalty), the encoder descends it.
//  * Encoder objective: l_ssl - lambda1 * l_d_var + lambda2 * l_d_invar.

#include <cstdint>
#include <span>
#include <vector>

#include "ddmlab/autograd.hpp"
#include "ddmlab/nn.hpp"
#include "ddmlab/rng.hpp"

namespace ddmlab::ddm {

inline constexpr double kNormEps = 1e-12;

struct DdmConfig {
  double lambda_var = 0.5;    // lambda1
  double lambda_invar = 0.5;  // lambda2
  double tau = 0.5;           // prefix similarity temperature
  double gp_weight = 10.0;
  int critic_steps = 1;
};

/// exp(cos(a, b) / tau) with epsilon-guarded norms.
double sim(std::span<const double> a, std::span<const double> b, double tau);

struct DomainVariantLoss {
  ag::Var value;            // sum over contributing anchors
  int anchors_used = 0;
  int anchors_skipped = 0;  // anchors lacking a same- or cross-domain partner
};

/// prefixes: V x k, labels: V domain ids (both views of a sample share one).
/// Anchors with an empty same- or cross-domain set are skipped and counted.
DomainVariantLoss loss_domain_variant(ag::Var prefixes, std::span<const int> labels, double tau);

/// MLP critic on the remainder with one output per domain:
/// Linear -> LeakyReLU -> Linear -> LeakyReLU -> Linear(M).
class Critic {
 public:
  Critic() = default;
  Critic(int in_dim, int hidden, int num_domains, Rng& rng, double slope = 0.2);

  /// B x M scores.
  ag::Var forward(ag::Tape& tape, ag::Var h);
  /// d score(h_i, y_i) / d h_i as a graph that is differentiable with respect
  /// to the critic weights (LeakyReLU slopes are piecewise constant).
  ag::Var input_gradient(ag::Tape& tape, const Mat& h, std::span<const int> labels);

  int in_dim() const { return static_cast<int>(l1_.weight.value.rows()); }
  int num_domains() const { return static_cast<int>(l3_.weight.value.cols()); }
  double slope() const { return slope_; }
  std::vector<Parameter*> parameters();

  /// Overwrites all parameters; used by fixtures.
  void set_weights(const Mat& w1, const Mat& b1, const Mat& w2, const Mat& b2, const Mat& w3, const Mat& b3);

 private:
  nn::Linear l1_, l2_, l3_;
  double slope_ = 0.2;
};

/// B x 1 column of D(h_i, y_i). Out-of-range labels are an InputError.
ag::Var critic_score(Critic& critic, ag::Tape& tape, ag::Var h, std::span<const int> labels);

/// Categorical sampler over the empirical domain-label distribution.
class LabelPrior {
 public:
  LabelPrior() = default;
  explicit LabelPrior(std::vector<double> weights);
  /// Counts of each label in [0, M); negative labels (outliers) are ignored.
  static LabelPrior from_labels(std::span<const int> labels, int num_domains);

  int sample(Rng& rng) const;
  const std::vector<double>& weights() const { return weights_; }
  int num_domains() const { return static_cast<int>(weights_.size()); }

 private:
  std::vector<double> weights_;
};

struct DomainInvariantLoss {
  ag::Var value;            // mean_i D(h_i, y_i) - D(h_i, y_rand_i)
  std::vector<int> y_rand;
};

DomainInvariantLoss loss_domain_invariant(Critic& critic, ag::Tape& tape, ag::Var h, std::span<const int> labels,
                                          const LabelPrior& prior, Rng& rng);
/// Same loss with caller-provided random labels.
ag::Var loss_domain_invariant(Critic& critic, ag::Tape& tape, ag::Var h, std::span<const int> labels,
                              std::span<const int> y_rand);

struct GradientPenalty {
  ag::Var value;           // mean_i (||grad_h D(h~_i, y_i)|| - 1)^2
  Mat interpolated;        // h~
  std::vector<int> partner;
  std::vector<double> mix;
};

/// h~_i = u_i h_i + (1 - u_i) h_{j_i} with u_i ~ U(0, 1) and j_i a uniformly
/// drawn batch partner; evaluated at label y_i.
GradientPenalty gradient_penalty(Critic& critic, ag::Tape& tape, const Mat& h, std::span<const int> labels, Rng& rng);
/// Penalty at explicitly given points.
ag::Var gradient_penalty_at(Critic& critic, ag::Tape& tape, const Mat& points, std::span<const int> labels);

/// l_ssl - lambda1 * l_d_var + lambda2 * l_d_invar.
double combined_encoder_objective(double l_ssl, double l_d_var, double l_d_invar, const DdmConfig& cfg);
ag::Var combined_encoder_objective(ag::Var l_ssl, ag::Var l_d_var, ag::Var l_d_invar, const DdmConfig& cfg);

/// l_d_invar - gp_weight * gp; the critic maximizes this.
double critic_objective(double l_d_invar, double gp, const DdmConfig& cfg);

}  // namespace ddmlab::ddm
