#pragma once

// Library objects wired to the dense oracle equivalents.

#include "ddmlab/ddm.hpp"
#include "oracles.hpp"

namespace fixture {

struct CriticPair {
  oracle::MlpCritic dense;
  ddmlab::ddm::Critic critic;

  void sync() { critic.set_weights(dense.w1, dense.b1, dense.w2, dense.b2, dense.w3, dense.b3); }
};

inline CriticPair make_critic(int in, int hidden, int m, std::uint64_t seed, double scale = 0.7) {
  CriticPair f;
  f.dense.w1 = oracle::random_matrix(in, hidden, seed, scale);
  f.dense.b1 = oracle::random_matrix(1, hidden, seed + 1, 0.3);
  f.dense.w2 = oracle::random_matrix(hidden, hidden, seed + 2, scale);
  f.dense.b2 = oracle::random_matrix(1, hidden, seed + 3, 0.3);
  f.dense.w3 = oracle::random_matrix(hidden, m, seed + 4, scale);
  f.dense.b3 = oracle::random_matrix(1, m, seed + 5, 0.3);
  ddmlab::Rng rng(0);
  f.critic = ddmlab::ddm::Critic(in, hidden, m, rng, f.dense.slope);
  f.sync();
  return f;
}

}  // namespace fixture
