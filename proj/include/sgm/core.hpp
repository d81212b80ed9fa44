#pragma once

// Basic observation/action types, deterministic RNG helpers and small
// utilities shared by every other header.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace sgm {

struct Observation {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Observation& o) const { return x == o.x && y == o.y; }
};

struct Action {
  double dx = 0.0;
  double dy = 0.0;

  double norm() const { return std::sqrt(dx * dx + dy * dy); }
};

inline double euclid(const Observation& a, const Observation& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- deterministic hashing / RNG -----------------------------------------

// splitmix64; used both as a stream-derivation hash and as the PRNG core for
// value-keyed noise.  Fully pinned, no library distributions involved.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t bits_of(double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof(u));
  return u;
}

// Derives an independent child seed for a named substream.
inline std::uint64_t substream(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = mix64(seed);
  for (unsigned char c : name) h = hash_combine(h, c);
  return h;
}

// Minimal deterministic generator (xorshift-star family via splitmix64
// counter).  Identical output on every platform/toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  Rng stream(const std::string& name) const { return Rng(substream(state_, name)); }

 private:
  std::uint64_t state_;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace sgm
