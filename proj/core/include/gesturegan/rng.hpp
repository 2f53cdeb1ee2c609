#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace gesturegan {

// Portable random source. std::mt19937_64's output sequence is fixed by the
// standard; the distribution helpers below are written out by hand because the
// std:: distributions are implementation-defined and would break cross-platform
// reproducibility of splits, flips and weight initialisation.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller (no cached second value, so the state is
  // fully captured by the engine).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  std::string save_state() const;
  void load_state(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
  std::mt19937_64 engine_;
};

// Derives an independent child seed from a parent seed and a stream label.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace gesturegan
