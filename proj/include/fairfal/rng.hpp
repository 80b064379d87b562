#pragma once

// Deterministic random streams. Every randomized routine in the library
// draws from a stream whose seed is a stable hash of (master seed, purpose
// string, integer ids). Adding a new consumer of randomness therefore never
// perturbs existing streams, and parallel schedules produce the same values
// as serial ones.
//
// The engine is std::mt19937_64 (bit-exact by the standard); the
// distributions are hand-rolled below because the standard does not pin
// down std::*_distribution output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace fairfal {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Stable stream seed from a master seed, a purpose tag and any number of ids.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = detail::fnv1a_bytes(h, &master, sizeof(master));
  h = detail::fnv1a_bytes(h, purpose.data(), purpose.size());
  for (std::uint64_t id : ids) h = detail::fnv1a_bytes(h, &id, sizeof(id));
  return detail::splitmix64(h);
}

// A seeded engine plus the distribution primitives the library needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng(std::uint64_t master, std::string_view purpose,
      std::initializer_list<std::uint64_t> ids = {})
      : engine_(stream_seed(master, purpose, ids)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1). 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; draws two uniforms per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang, with the standard alpha<1 boost.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      double u = uniform();
      while (u <= 0.0) u = uniform();
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Dirichlet(alpha * 1_k) proportions.
  std::vector<double> dirichlet(double alpha, std::size_t k) {
    std::vector<double> p(k);
    double sum = 0.0;
    for (auto& v : p) {
      v = gamma(alpha);
      sum += v;
    }
    if (sum <= 0.0) {
      // All gamma draws underflowed to zero (tiny alpha); fall back to a
      // single winner so the proportions still sum to one.
      p.assign(k, 0.0);
      p[uniform_index(k)] = 1.0;
      return p;
    }
    for (auto& v : p) v /= sum;
    return p;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), uniformly, returned sorted.
  std::vector<int> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<int> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<int>(i);
    // Partial Fisher-Yates: the first k entries are the sample.
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_index(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fairfal
