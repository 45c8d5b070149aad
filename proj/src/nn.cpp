#include "ddmlab/nn.hpp"

#include <cmath>
#include <random>

namespace ddmlab::nn {

void normal_fill(Mat& m, double std, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, std);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng, double gain) {
  Mat w(in, out);
  normal_fill(w, gain / std::sqrt(static_cast<double>(in)), rng);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Mat::Zero(1, out));
}

ag::Var Linear::forward(ag::Tape& tape, ag::Var x) {
  return ag::add_row(ag::matmul(x, tape.param(weight)), tape.param(bias));
}

BatchNorm::BatchNorm(const std::string& name, int features)
    : gamma(name + ".gamma", Mat::Ones(1, features)), beta(name + ".beta", Mat::Zero(1, features)) {}

ag::Var BatchNorm::forward(ag::Tape& tape, ag::Var x) {
  ag::Var z = ag::col_standardize(x, eps);
  return ag::add_row(ag::mul_row(z, tape.param(gamma)), tape.param(beta));
}

}  // namespace ddmlab::nn
