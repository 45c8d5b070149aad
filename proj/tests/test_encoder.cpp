#include <gtest/gtest.h>

#include "ddmlab/encoder.hpp"
#include "ddmlab/errors.hpp"
#include "oracles.hpp"

using namespace ddmlab;

namespace {

EncoderSpec tiny_conv() {
  EncoderSpec s;
  s.rep_dim = 6;
  s.prefix_dim = 2;
  s.channels = {2, 2, 3, 3};
  s.hidden_dim = 5;
  s.input = {3, 8, 8};
  return s;
}

Mat random_images(int n, const data::ImageShape& shape, std::uint64_t seed) {
  return (oracle::random_matrix(n, static_cast<Eigen::Index>(shape.size()), seed).array() * 0.5 + 0.5).matrix();
}

}  // namespace

TEST(Encoder, ForwardShapeAndChunkedEncodeAgree) {
  Rng rng(1);
  Encoder enc(tiny_conv(), rng);
  const Mat x = random_images(7, tiny_conv().input, 2);
  ag::Tape t;
  const Mat h = enc.forward(t, x).value();
  EXPECT_EQ(h.rows(), 7);
  EXPECT_EQ(h.cols(), 6);
  EXPECT_EQ(enc.encode(x, 3), h);
}

TEST(Encoder, RowsAreIndependentOfBatchComposition) {
  Rng rng(1);
  Encoder enc(tiny_conv(), rng);
  const Mat x = random_images(5, tiny_conv().input, 3);
  const Mat all = enc.encode(x);
  EXPECT_LT((enc.encode(x.middleRows(2, 1)) - all.middleRows(2, 1)).norm(), 1e-12);
}

TEST(Encoder, InitializationIsSeeded) {
  Rng a(5), b(5), c(6);
  Encoder ea(tiny_conv(), a), eb(tiny_conv(), b), ec(tiny_conv(), c);
  auto sum = [](Encoder& e) {
    std::vector<const Parameter*> ps;
    for (Parameter* p : e.parameters()) ps.push_back(p);
    return parameter_checksum(ps);
  };
  EXPECT_EQ(sum(ea), sum(eb));
  EXPECT_NE(sum(ea), sum(ec));
}

TEST(Encoder, ParameterGradientsMatchFiniteDifferences) {
  for (const std::string arch : {"conv4", "linear"}) {
    EncoderSpec spec = tiny_conv();
    spec.architecture = arch;
    Rng rng(3);
    Encoder enc(spec, rng);
    const Mat x = random_images(3, spec.input, 4);
    const Mat w = oracle::random_matrix(3, spec.rep_dim, 5);
    auto value = [&]() { return (enc.encode(x).array() * w.array()).sum(); };
    for (Parameter* p : enc.parameters()) p->zero_grad();
    ag::Tape t;
    t.backward(ag::sum(ag::mul(enc.forward(t, x), t.constant(w))));
    for (Parameter* p : enc.parameters()) {
      const Mat saved = p->value;
      const Mat num = oracle::numeric_gradient(
          [&](const Mat& v) {
            p->value = v;
            const double r = value();
            p->value = saved;
            return r;
          },
          saved);
      EXPECT_LE(oracle::gradient_mismatch(p->grad, num, 1e-3, 1e-6), 1.0) << arch << " " << p->name;
    }
  }
}

TEST(Encoder, SpecValidation) {
  EncoderSpec s = tiny_conv();
  s.prefix_dim = s.rep_dim;
  EXPECT_THROW(validate_spec(s), ConfigError);
  s = tiny_conv();
  s.prefix_dim = 0;
  EXPECT_THROW(validate_spec(s), ConfigError);
  s = tiny_conv();
  s.architecture = "vit";
  EXPECT_THROW(validate_spec(s), ConfigError);
  s = tiny_conv();
  s.channels = {2, 2};
  EXPECT_THROW(validate_spec(s), ConfigError);
  s = tiny_conv();
  s.input = {3, 12, 12};
  EXPECT_THROW(validate_spec(s), ConfigError);
  EXPECT_NO_THROW(validate_spec(tiny_conv()));
}

TEST(Encoder, RejectsWrongImageWidth) {
  Rng rng(1);
  Encoder enc(tiny_conv(), rng);
  EXPECT_THROW(enc.encode(Mat::Zero(2, 10)), InputError);
}

TEST(Split, PrefixAndRemainderArePositional) {
  const std::vector<double> h{1, 2, 3, 4, 5};
  const auto s = split(h, 2);
  EXPECT_EQ(std::vector<double>(s.prefix.begin(), s.prefix.end()), (std::vector<double>{1, 2}));
  EXPECT_EQ(std::vector<double>(s.remainder.begin(), s.remainder.end()), (std::vector<double>{3, 4, 5}));
  EXPECT_THROW(split(h, 5), InputError);
  EXPECT_THROW(split(h, 0), InputError);
  const Mat m = oracle::random_matrix(3, 5, 1);
  const auto [pre, rest] = split_batch(m, 1);
  EXPECT_EQ(pre.cols(), 1);
  EXPECT_EQ(rest.cols(), 4);
  EXPECT_EQ(rest, m.rightCols(4));
}
