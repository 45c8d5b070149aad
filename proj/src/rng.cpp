#include "ddmlab/rng.hpp"

#include <iostream>
#include <sstream>

#include "ddmlab/errors.hpp"

namespace ddmlab {

void log_warning(const std::string& message) { std::clog << "[ddmlab] warning: " << message << '\n'; }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng make_rng(std::uint64_t seed, std::string_view stream, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t tag = fnv1a(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

RngStreams::RngStreams(std::uint64_t root_seed) : root_(root_seed) {}

Rng& RngStreams::get(const std::string& name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) it = streams_.emplace(name, make_rng(root_, name)).first;
  return it->second;
}

std::map<std::string, std::string> RngStreams::save() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, eng] : streams_) {
    std::ostringstream os;
    os << eng;
    out[name] = os.str();
  }
  return out;
}

void RngStreams::restore(const std::map<std::string, std::string>& states) {
  streams_.clear();
  for (const auto& [name, state] : states) {
    Rng eng;
    std::istringstream is(state);
    is >> eng;
    if (!is) throw FormatError("corrupt rng state for stream '" + name + "'");
    streams_.emplace(name, eng);
  }
}

}  // namespace ddmlab
