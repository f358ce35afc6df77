#ifndef POPSYNTH_RNG_H_
#define POPSYNTH_RNG_H_

#include <cstdint>
#include <random>
#include <string>

namespace popsynth {

// Seeded pseudo-random source used everywhere randomness is needed.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The conversions to uniform/normal/index variates are written out
// here instead of using <random> distributions so that values are identical
// across standard library implementations. No variate is cached between
// calls; the full state is the engine state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller (one variate per call).
  double normal();

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Serialized engine state, round-trips through set_state().
  std::string state() const;
  void set_state(const std::string& state);

  // Seed for an independent stream, derived from a base seed and a stream
  // index with a splitmix64 mix.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace popsynth

#endif  // POPSYNTH_RNG_H_
