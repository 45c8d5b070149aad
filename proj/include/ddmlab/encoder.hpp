#pragma once

// Trainable image encoder f(x) = h in R^r and the positional prefix split
// h = [h^d | h^p]: the first k features form the domain prefix, the
// remaining r - k the domain-invariant remainder.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddmlab/autograd.hpp"
#include "ddmlab/datagen.hpp"
#include "ddmlab/nn.hpp"

namespace ddmlab {

struct EncoderSpec {
  /// "conv4": four 3x3 conv blocks, global average pooling, 2-layer MLP.
  /// "linear": a single affine map of the flattened image.
  std::string architecture = "conv4";
  int rep_dim = 128;     // r
  int prefix_dim = 8;    // k
  std::vector<int> channels{8, 16, 32, 64};
  int hidden_dim = 128;  // MLP width after pooling
  data::ImageShape input{3, 16, 16};
  std::uint64_t seed = 0;

  int remainder_dim() const { return rep_dim - prefix_dim; }
};

/// Throws ConfigError when k, r or the architecture are inconsistent.
void validate_spec(const EncoderSpec& spec);

/// Views of one representation row.
struct RepresentationSplit {
  std::span<const double> prefix;
  std::span<const double> remainder;
};

/// Positional split of a single representation; requires 0 < k < size.
RepresentationSplit split(std::span<const double> h, int prefix_dim);

/// Column split of a batch of representations.
std::pair<Mat, Mat> split_batch(const Mat& h, int prefix_dim);

class Encoder {
 public:
  Encoder() = default;
  /// Parameters are initialized from `rng`, which the caller derives from
  /// the run seed.
  Encoder(const EncoderSpec& spec, Rng& rng);

  /// images: B x (C*H*W) in CHW order. Returns the B x r representation node.
  ag::Var forward(ag::Tape& tape, const Mat& images);
  /// Gradient-free forward pass in chunks of `batch` rows.
  Mat encode(const Mat& images, int batch = 256);

  const EncoderSpec& spec() const { return spec_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  EncoderSpec spec_;
  std::vector<nn::Linear> convs_;  // weight is (9*C_in) x C_out
  nn::Linear fc1_;
  nn::Linear fc2_;
  nn::Linear linear_;
};

/// Copies `images` rows for the given indices into a batch matrix.
Mat gather_images(const data::MultiDomainDataset& ds, std::span<const int> indices);
/// Entire dataset as a N x (C*H*W) matrix.
Mat dataset_matrix(const data::MultiDomainDataset& ds);

/// FNV-1a checksum over parameter values, in declaration order.
std::uint64_t parameter_checksum(std::span<const Parameter* const> params);

}  // namespace ddmlab
