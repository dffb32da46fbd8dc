#ifndef PROBEKIT_RNG_HPP
#define PROBEKIT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace probekit {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic, hand-rolled generator. Standard-library distributions are
// implementation-defined, so uniform/normal draws are produced here directly
// to keep outputs byte-identical for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, 1]; never exactly 0 (safe to pass through log).
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; the paired draw is cached in the generator state.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Independent stream derived from the construction seed, not the current
  // position; forks with distinct tags never overlap.
  Rng fork(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }
  Rng fork(std::string_view tag) const { return Rng(mix_seed(seed_, fnv1a(tag))); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace probekit

#endif  // PROBEKIT_RNG_HPP
