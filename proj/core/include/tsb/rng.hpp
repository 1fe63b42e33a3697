#pragma once

#include <cmath>
#include <cstdint>

namespace tsb {

// SplitMix64 counter generator. The state advances by a fixed odd increment
// and every output is a bijective hash of the state, so the k-th draw is a
// pure function of (seed, k). Sub-streams are derived by hashing, which keeps
// every stochastic routine bit-reproducible across platforms (no reliance on
// implementation-defined std:: distributions).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit mantissa.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; pairs are generated together and the
  // spare is cached, so draws stay a deterministic function of the stream.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // Deterministic sub-seed for stream `stream` of a master seed (per-iteration
  // batches, per-chunk workers, ...).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL));
    g.next_u64();
    return g.next_u64();
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tsb
