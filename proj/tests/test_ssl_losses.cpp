#include <gtest/gtest.h>

#include "ddmlab/errors.hpp"
#include "ddmlab/rng.hpp"
#include "ddmlab/ssl_losses.hpp"
#include "oracles.hpp"

using namespace ddmlab;

namespace {

double nt_xent_value(const Mat& a, const Mat& b, double tau) {
  ag::Tape t;
  return ssl::nt_xent(t.constant(a), t.constant(b), tau).item();
}

double barlow_value(const Mat& a, const Mat& b, double lambda) {
  ag::Tape t;
  return ssl::barlow_twins_loss(t.constant(a), t.constant(b), lambda).item();
}

}  // namespace

TEST(NtXent, MatchesBruteForce) {
  for (int n : {2, 3, 4}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Mat a = oracle::random_matrix(n, 5, seed);
      const Mat b = oracle::random_matrix(n, 5, seed + 100);
      for (double tau : {0.1, 0.5, 1.0}) {
        EXPECT_TRUE(oracle::rel_close(nt_xent_value(a, b, tau), oracle::nt_xent(a, b, tau), 1e-6));
      }
    }
  }
}

TEST(NtXent, IdenticalOrthogonalViewsGiveKnownValue) {
  // positives identical, every negative orthogonal: -log(e^{1/t} / (e^{1/t} + 2n-2))
  const Mat a = Mat::Identity(3, 3);
  const double tau = 0.5;
  const double expect = -std::log(std::exp(1 / tau) / (std::exp(1 / tau) + 4.0));
  EXPECT_NEAR(nt_xent_value(a, a, tau), expect, 1e-12);
}

TEST(NtXent, RejectsDegenerateInput) {
  ag::Tape t;
  EXPECT_THROW(ssl::nt_xent(t.constant(Mat::Ones(1, 3)), t.constant(Mat::Ones(1, 3)), 0.5), ConfigError);
  EXPECT_THROW(ssl::nt_xent(t.constant(Mat::Ones(2, 3)), t.constant(Mat::Ones(2, 3)), 0.0), ConfigError);
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  const Mat a = oracle::random_matrix(4, 3, 7);
  const Mat b = oracle::random_matrix(4, 3, 8);
  ag::Tape t;
  ag::Var va = t.input(a), vb = t.input(b);
  t.backward(ssl::nt_xent(va, vb, 0.5));
  const Mat na = oracle::numeric_gradient([&](const Mat& m) { return nt_xent_value(m, b, 0.5); }, a);
  const Mat nb = oracle::numeric_gradient([&](const Mat& m) { return nt_xent_value(a, m, 0.5); }, b);
  EXPECT_LE(oracle::gradient_mismatch(va.grad(), na, 1e-3, 1e-7), 1.0);
  EXPECT_LE(oracle::gradient_mismatch(vb.grad(), nb, 1e-3, 1e-7), 1.0);
}

TEST(BarlowTwins, MatchesBruteForce) {
  for (int n : {3, 5, 8}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Mat a = oracle::random_matrix(n, 4, seed);
      const Mat b = oracle::random_matrix(n, 4, seed + 50);
      EXPECT_TRUE(oracle::rel_close(barlow_value(a, b, 5e-3), oracle::barlow(a, b, 5e-3), 1e-6));
      EXPECT_TRUE(oracle::rel_close(barlow_value(a, b, 0.5), oracle::barlow(a, b, 0.5), 1e-6));
    }
  }
}

TEST(BarlowTwins, PerfectlyCorrelatedDecorrelatedViewsNearZero) {
  // orthogonal centred columns, identical views: C = I up to the variance eps
  Mat z(4, 2);
  z << 1, 1, -1, 1, 1, -1, -1, -1;
  EXPECT_LT(barlow_value(z, z, 5e-3), 1e-8);
}

TEST(BarlowTwins, GradientMatchesFiniteDifferences) {
  const Mat a = oracle::random_matrix(6, 3, 11);
  const Mat b = oracle::random_matrix(6, 3, 12);
  ag::Tape t;
  ag::Var va = t.input(a), vb = t.input(b);
  t.backward(ssl::barlow_twins_loss(va, vb, 5e-3));
  const Mat na = oracle::numeric_gradient([&](const Mat& m) { return barlow_value(m, b, 5e-3); }, a);
  const Mat nb = oracle::numeric_gradient([&](const Mat& m) { return barlow_value(a, m, 5e-3); }, b);
  EXPECT_LE(oracle::gradient_mismatch(va.grad(), na, 1e-3, 1e-7), 1.0);
  EXPECT_LE(oracle::gradient_mismatch(vb.grad(), nb, 1e-3, 1e-7), 1.0);
}

TEST(SimSiam, StopGradientBlocksTargetBranch) {
  const Mat p = oracle::random_matrix(4, 3, 21);
  const Mat z = oracle::random_matrix(4, 3, 22);
  ag::Tape t;
  ag::Var vp = t.input(p), vz = t.input(z);
  ag::Var loss = ssl::negative_cosine(vp, vz);
  double expect = 0;
  for (int i = 0; i < 4; ++i) expect -= oracle::cosine(p, i, z, i);
  EXPECT_NEAR(loss.item(), expect / 4, 1e-12);
  t.backward(loss);
  EXPECT_EQ(vz.grad().squaredNorm(), 0.0);
  const Mat np = oracle::numeric_gradient(
      [&](const Mat& m) {
        ag::Tape tt;
        return ssl::negative_cosine(tt.constant(m), tt.constant(z)).item();
      },
      p);
  EXPECT_LE(oracle::gradient_mismatch(vp.grad(), np, 1e-3, 1e-7), 1.0);
}

TEST(SimSiam, SymmetrizedLossIsMeanOfBothDirections) {
  const Mat pa = oracle::random_matrix(3, 4, 1), pb = oracle::random_matrix(3, 4, 2);
  const Mat za = oracle::random_matrix(3, 4, 3), zb = oracle::random_matrix(3, 4, 4);
  ag::Tape t;
  const double v = ssl::simsiam_loss(t.constant(pa), t.constant(zb), t.constant(pb), t.constant(za)).item();
  double expect = 0;
  for (int i = 0; i < 3; ++i) expect -= 0.5 * (oracle::cosine(pa, i, zb, i) + oracle::cosine(pb, i, za, i)) / 3;
  EXPECT_NEAR(v, expect, 1e-12);
}

TEST(SslHead, EveryBaselineProducesFiniteLossAndGradients) {
  for (auto b : {ssl::Baseline::kSimClr, ssl::Baseline::kSimSiam, ssl::Baseline::kBarlowTwins}) {
    Rng rng(3);
    ssl::HeadOptions opts;
    opts.proj_hidden = 16;
    opts.proj_dim = 8;
    opts.pred_hidden = 4;
    ssl::SslHead head(b, 6, opts, rng);
    ag::Tape t;
    ag::Var ha = t.input(oracle::random_matrix(8, 6, 1));
    ag::Var hb = t.input(oracle::random_matrix(8, 6, 2));
    ag::Var loss = head.loss(t, ha, hb);
    ASSERT_TRUE(std::isfinite(loss.item())) << ssl::to_string(b);
    t.backward(loss);
    EXPECT_GT(ha.grad().squaredNorm(), 0.0) << ssl::to_string(b);
    for (Parameter* p : head.parameters()) EXPECT_TRUE(p->grad.allFinite()) << p->name;
  }
}

// SimSiam's stop-gradient makes its update differ from the value's
// derivative on purpose; it is covered by the negative-cosine tests.
TEST(SslHead, HeadGradientMatchesFiniteDifferences) {
  for (auto b : {ssl::Baseline::kSimClr, ssl::Baseline::kBarlowTwins}) {
    Rng rng(5);
    ssl::HeadOptions opts;
    opts.proj_hidden = 6;
    opts.proj_dim = 4;
    opts.pred_hidden = 3;
    ssl::SslHead head(b, 3, opts, rng);
    const Mat a = oracle::random_matrix(5, 3, 8), c = oracle::random_matrix(5, 3, 9);
    auto value = [&](const Mat& m) {
      ag::Tape t;
      return head.loss(t, t.constant(m), t.constant(c)).item();
    };
    ag::Tape t;
    ag::Var va = t.input(a);
    t.backward(head.loss(t, va, t.constant(c)));
    EXPECT_LE(oracle::gradient_mismatch(va.grad(), oracle::numeric_gradient(value, a), 1e-3, 1e-7), 1.0)
        << ssl::to_string(b);
  }
}

TEST(Baselines, ParseRoundTrip) {
  for (auto b : {ssl::Baseline::kSimClr, ssl::Baseline::kSimSiam, ssl::Baseline::kBarlowTwins}) {
    EXPECT_EQ(ssl::parse_baseline(ssl::to_string(b)), b);
  }
  EXPECT_THROW(ssl::parse_baseline("byol"), ConfigError);
}
