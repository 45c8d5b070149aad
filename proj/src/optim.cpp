#include "ddmlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ddmlab::optim {

Adam::Adam(std::vector<Parameter*> params, const AdamOptions& opts) : params_(std::move(params)), opts_(opts) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Mat g = p.grad;
    if (opts_.weight_decay != 0.0) g += opts_.weight_decay * p.value;
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
    v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseProduct(g);
    const double eps = opts_.eps;
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double cosine_lr(double lr_max, std::int64_t step, std::int64_t total) {
  if (total <= 0) return lr_max;
  const double t = static_cast<double>(std::clamp<std::int64_t>(step, 0, total)) / static_cast<double>(total);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace ddmlab::optim
