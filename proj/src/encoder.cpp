#include "ddmlab/encoder.hpp"

#include <string_view>

#include "ddmlab/errors.hpp"

namespace ddmlab {

void validate_spec(const EncoderSpec& spec) {
  if (spec.prefix_dim <= 0 || spec.prefix_dim >= spec.rep_dim) {
    throw ConfigError("encoder: prefix width k must satisfy 0 < k < r");
  }
  if (spec.architecture == "conv4") {
    if (spec.channels.size() != 4) throw ConfigError("encoder: conv4 needs exactly 4 channel widths");
    if (spec.input.height % 8 != 0 || spec.input.width % 8 != 0) {
      throw ConfigError("encoder: conv4 input height and width must be multiples of 8");
    }
    for (int c : spec.channels) {
      if (c <= 0) throw ConfigError("encoder: channel widths must be positive");
    }
    if (spec.hidden_dim <= 0) throw ConfigError("encoder: hidden_dim must be positive");
  } else if (spec.architecture != "linear") {
    throw ConfigError("encoder: unknown architecture '" + spec.architecture + "'");
  }
}

RepresentationSplit split(std::span<const double> h, int prefix_dim) {
  if (prefix_dim <= 0 || static_cast<std::size_t>(prefix_dim) >= h.size()) {
    throw InputError("split: prefix width must satisfy 0 < k < r");
  }
  return {h.first(static_cast<std::size_t>(prefix_dim)), h.subspan(static_cast<std::size_t>(prefix_dim))};
}

std::pair<Mat, Mat> split_batch(const Mat& h, int prefix_dim) {
  if (prefix_dim <= 0 || prefix_dim >= h.cols()) throw InputError("split_batch: prefix width must satisfy 0 < k < r");
  return {h.leftCols(prefix_dim), h.rightCols(h.cols() - prefix_dim)};
}

Encoder::Encoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
  validate_spec(spec);
  if (spec.architecture == "conv4") {
    int in = spec.input.channels;
    for (std::size_t i = 0; i < spec.channels.size(); ++i) {
      convs_.emplace_back("encoder.conv" + std::to_string(i), 9 * in, spec.channels[i], rng);
      in = spec.channels[i];
    }
    fc1_ = nn::Linear("encoder.fc1", in, spec.hidden_dim, rng);
    fc2_ = nn::Linear("encoder.fc2", spec.hidden_dim, spec.rep_dim, rng, 1.0);
  } else {
    linear_ = nn::Linear("encoder.linear", static_cast<int>(spec.input.size()), spec.rep_dim, rng, 1.0);
  }
}

ag::Var Encoder::forward(ag::Tape& tape, const Mat& images) {
  const auto& in = spec_.input;
  if (images.cols() != static_cast<Eigen::Index>(in.size())) {
    throw InputError("encode: image width " + std::to_string(images.cols()) + " does not match input shape (" +
                     std::to_string(in.size()) + ")");
  }
  const int batch = static_cast<int>(images.rows());
  if (spec_.architecture == "linear") return linear_.forward(tape, tape.constant(images));

  // CHW rows -> NHWC feature map
  const int plane = in.height * in.width;
  Mat nhwc(static_cast<Eigen::Index>(batch) * plane, in.channels);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < in.channels; ++c) {
      for (int p = 0; p < plane; ++p) nhwc(static_cast<Eigen::Index>(b) * plane + p, c) = images(b, c * plane + p);
    }
  }
  ag::Var x = tape.constant(std::move(nhwc));
  int h = in.height, w = in.width;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = ag::relu(convs_[i].forward(tape, ag::im2col3x3(x, batch, h, w)));
    if (i + 1 < convs_.size()) {
      x = ag::avgpool2(x, batch, h, w);
      h /= 2;
      w /= 2;
    }
  }
  x = ag::global_avgpool(x, batch, h * w);
  x = ag::relu(fc1_.forward(tape, x));
  return fc2_.forward(tape, x);
}

Mat Encoder::encode(const Mat& images, int batch) {
  Mat out(images.rows(), spec_.rep_dim);
  for (Eigen::Index start = 0; start < images.rows(); start += batch) {
    const Eigen::Index n = std::min<Eigen::Index>(batch, images.rows() - start);
    ag::Tape tape;
    ag::Var h = forward(tape, images.middleRows(start, n));
    out.middleRows(start, n) = h.value();
  }
  return out;
}

std::vector<Parameter*> Encoder::parameters() {
  std::vector<Parameter*> out;
  if (spec_.architecture == "linear") {
    linear_.collect(out);
    return out;
  }
  for (auto& c : convs_) c.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
  return out;
}

std::vector<const Parameter*> Encoder::parameters() const {
  auto params = const_cast<Encoder*>(this)->parameters();
  return {params.begin(), params.end()};
}

Mat gather_images(const data::MultiDomainDataset& ds, std::span<const int> indices) {
  Mat out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(ds.shape.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto img = ds.image(static_cast<std::size_t>(indices[i]));
    for (std::size_t j = 0; j < img.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img[j];
  }
  return out;
}

Mat dataset_matrix(const data::MultiDomainDataset& ds) {
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return gather_images(ds, idx);
}

std::uint64_t parameter_checksum(std::span<const Parameter* const> params) {
  std::uint64_t h = fnv1a("");
  for (const Parameter* p : params) {
    h = fnv1a(p->name, h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(double)), h);
  }
  return h;
}

}  // namespace ddmlab
