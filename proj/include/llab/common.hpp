#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace llab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a training run produces a non-finite loss.
struct DivergedError : Error {
  using Error::Error;
};

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent seed stream from a base seed and a stream tag.
// Used to keep init RNG, per-epoch data-order RNG and probe RNG isolated.
inline uint64_t derive_seed(uint64_t base, uint64_t tag) {
  uint64_t s = base ^ (tag * 0xd1342543de82ef95ULL);
  splitmix64(s);
  return splitmix64(s);
}

// Deterministic RNG with explicit value mappings (no std::*_distribution,
// whose output is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n).
  size_t uniform_index(size_t n) {
    return static_cast<size_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // +1 or -1 with equal probability.
  double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng.uniform_index(i);
    std::swap(v[i - 1], v[j]);
  }
}

// FNV-1a over raw bytes, used for dataset content hashes.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace llab
