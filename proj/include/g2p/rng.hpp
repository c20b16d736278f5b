#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace g2p {

// Seeded random stream. Distributions are computed here rather than through
// <random> distribution objects, whose output is implementation-defined, so a
// given seed yields the same values on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

// Deterministic child seed from a parent seed and a tuple of stream indices.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);
std::uint64_t seed_from_name(const std::string& name);

}  // namespace g2p
