#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ddmlab/autograd.hpp"

namespace ddmlab::optim {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 added to the gradient
};

/// Adam over a fixed, ordered parameter list. Moment buffers follow the
/// parameter order so they can be checkpointed by position.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, const AdamOptions& opts);

  /// Applies one update at learning rate `lr` using the stored gradients.
  void step(double lr);
  void step() { step(opts_.lr); }
  void zero_grad();

  const AdamOptions& options() const { return opts_; }
  std::int64_t steps() const { return t_; }
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }
  const std::vector<Mat>& first_moments() const { return m_; }
  const std::vector<Mat>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }
  std::span<Parameter* const> parameters() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions opts_;
  std::vector<Mat> m_, v_;
  std::int64_t t_ = 0;
};

/// lr_max * 0.5 * (1 + cos(pi * step / total)); clamps at total.
double cosine_lr(double lr_max, std::int64_t step, std::int64_t total);

}  // namespace ddmlab::optim
