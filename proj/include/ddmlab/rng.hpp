#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>

namespace ddmlab {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Deterministic engine for a (root seed, stream name, index...) key.
Rng make_rng(std::uint64_t seed, std::string_view stream, std::uint64_t a = 0, std::uint64_t b = 0);

/// Named, independently seeded streams derived from one root seed. Each
/// consumer draws only from its own stream, so enabling or disabling one
/// component never shifts the random numbers seen by another.
class RngStreams {
 public:
  static constexpr const char* kData = "data";
  static constexpr const char* kInit = "init";
  static constexpr const char* kCriticInit = "critic_init";
  static constexpr const char* kYRand = "y_rand";
  static constexpr const char* kGp = "gp";
  static constexpr const char* kProbe = "probe";
  static constexpr const char* kCluster = "cluster";

  RngStreams() = default;
  explicit RngStreams(std::uint64_t root_seed);

  Rng& get(const std::string& name);
  std::uint64_t root_seed() const { return root_; }

  /// Textual engine states, used by checkpoints.
  std::map<std::string, std::string> save() const;
  void restore(const std::map<std::string, std::string>& states);

 private:
  std::uint64_t root_ = 0;
  std::map<std::string, Rng> streams_;
};

}  // namespace ddmlab
