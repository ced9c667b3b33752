#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace attnrc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Configuration / usage problems. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failures (divergence, rank deficiency, undefined metrics).
/// The CLI maps these to exit code 1.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Seeded generator with a platform-independent uniform mapping.
/// std::uniform_real_distribution is not pinned by the standard, so the
/// [0,1) mapping is done by hand to keep datasets bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// FNV-1a over a byte range; used for config and state-matrix hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

/// Deterministic per-role seed derivation, so one experiment seed can fan
/// out to dataset / mask / reservoir / readout streams independently.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& role) {
  std::uint64_t h = fnv1a64(role) ^ (base + 0x9e3779b97f4a7c15ull);
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace attnrc
