#pragma once

// Small layer building blocks on top of the autograd tape.

#include <string>
#include <vector>

#include "ddmlab/autograd.hpp"
#include "ddmlab/rng.hpp"

namespace ddmlab::nn {

/// y = x W + b with W stored (in x out).
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  /// He-normal weights (std = gain * sqrt(1 / fan_in)), zero bias.
  Linear(const std::string& name, int in, int out, Rng& rng, double gain = 1.4142135623730951);

  ag::Var forward(ag::Tape& tape, ag::Var x);
  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// Batch standardization with a learned per-feature affine. Always uses the
/// statistics of the current batch; these layers only live in training heads.
struct BatchNorm {
  Parameter gamma;
  Parameter beta;
  double eps = 1e-5;

  BatchNorm() = default;
  BatchNorm(const std::string& name, int features);
  ag::Var forward(ag::Tape& tape, ag::Var x);
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

/// Fills `m` with N(0, std^2) draws in row-major order.
void normal_fill(Mat& m, double std, Rng& rng);

}  // namespace ddmlab::nn
