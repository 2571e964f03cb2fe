#pragma once

#include <cstdint>
#include <random>

namespace movilab {

// Seed derivation and raw draws.
//
// Every random quantity in this project comes from an mt19937_64 stream seeded
// with a value derived from the experiment master seed via mix_seed().  The
// mt19937_64 output sequence and the helpers below are part of the on-disk
// format: the same seed must reproduce the same CSV bytes on every platform,
// so distribution sampling is done by hand instead of via <random>'s
// distribution objects (whose streams are implementation-defined).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter scheme for derived seeds: mix_seed(base, n) gives the n-th child
// stream of `base`.  Chained calls give nested streams.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ (0x9E3779B97F4A7C15ull * (salt + 0x632BE59BD9B4E019ull)));
}

// Fixed per-replicate stream indices; see run_experiment() for how replicate
// base seeds are derived from the master seed.
enum class Stream : std::uint64_t {
  garnet_gen = 0,
  avi = 1,
  movi = 2,
  sql = 3,
  dpp = 4,
  assumption = 5,
};

inline std::uint64_t stream_seed(std::uint64_t replicate_base, Stream s) {
  return mix_seed(replicate_base, static_cast<std::uint64_t>(s));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in the open interval (0, 1).
  double next_open_unit() {
    double u;
    do {
      u = next_unit();
    } while (u == 0.0);
    return u;
  }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = eng_();
      if (x >= threshold) return x % n;
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace movilab
