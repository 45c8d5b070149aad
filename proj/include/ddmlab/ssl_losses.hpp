#pragma once

// Joint-embedding self-supervised objectives and the per-baseline
// projection / prediction heads that feed them.

#include <string>
#include <vector>

#include "ddmlab/autograd.hpp"
#include "ddmlab/nn.hpp"

namespace ddmlab::ssl {

enum class Baseline { kSimClr, kSimSiam, kBarlowTwins };

/// "simclr" | "simsiam" | "barlow_twins"; anything else is a ConfigError.
Baseline parse_baseline(const std::string& name);
std::string to_string(Baseline b);

inline constexpr double kNormEps = 1e-12;

/// NT-Xent over 2N views: rows i of z_a and z_b are the positive pair, the
/// other 2N - 2 views are negatives. Mean over the 2N anchors.
ag::Var nt_xent(ag::Var z_a, ag::Var z_b, double tau);

/// -mean_i cos(p_i, z_i), with z treated as a constant.
ag::Var negative_cosine(ag::Var p, ag::Var z);

/// Symmetrized SimSiam objective; the projections z_a, z_b are detached.
ag::Var simsiam_loss(ag::Var p_a, ag::Var z_b, ag::Var p_b, ag::Var z_a);

/// sum_i (1 - C_ii)^2 + lambda_off * sum_{i != j} C_ij^2 where C is the
/// cross-correlation of the batch-standardized embeddings.
ag::Var barlow_twins_loss(ag::Var z_a, ag::Var z_b, double lambda_off, double eps = 1e-5);

struct HeadOptions {
  double tau = 0.5;              // NT-Xent temperature
  double barlow_lambda = 5e-3;   // off-diagonal weight
  int proj_hidden = 128;
  int proj_dim = 64;
  int pred_hidden = 32;
};

/// Baseline-specific heads plus the matching loss.
class SslHead {
 public:
  SslHead() = default;
  SslHead(Baseline baseline, int in_dim, const HeadOptions& opts, Rng& rng);

  /// L_ssl for two index-aligned batches of encoder features.
  ag::Var loss(ag::Tape& tape, ag::Var h_a, ag::Var h_b);

  Baseline baseline() const { return baseline_; }
  int in_dim() const { return in_dim_; }
  std::vector<Parameter*> parameters();

 private:
  ag::Var project(ag::Tape& tape, ag::Var h);
  ag::Var predict(ag::Tape& tape, ag::Var z);

  Baseline baseline_ = Baseline::kSimClr;
  int in_dim_ = 0;
  HeadOptions opts_;
  nn::Linear proj1_, proj2_, pred1_, pred2_;
  nn::BatchNorm proj_bn_, pred_bn_;
};

}  // namespace ddmlab::ssl
