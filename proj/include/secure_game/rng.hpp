#pragma once

#include "secure_game/linalg.hpp"

#include <array>
#include <cmath>
#include <cstdint>

namespace secure_game {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Small self-contained xoshiro256++ generator with splitmix64 seeding.
/// Streams are derived from (master, a, b, c) so parallel trials can draw
/// from independent, schedule-independent sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { seed_from(mix64(seed)); }

  static Rng stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    std::uint64_t x = mix64(master);
    x = mix64(x ^ (a + 0xD1B54A32D192ED03ull));
    x = mix64(x ^ (b + 0x8CB92BA72F3D8DD7ull));
    x = mix64(x ^ (c + 0xA24BAED4963EE407ull));
    Rng r(0);
    r.seed_from(x);
    return r;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi_u2 = 2.0 * M_PI * u2;
    spare_ = r * std::sin(two_pi_u2);
    have_spare_ = true;
    return r * std::cos(two_pi_u2);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  /// Draws N(mean, L L^T) given a lower Cholesky factor L.
  Vector gaussian(const Vector& mean, const Matrix& chol_lower) {
    return mean + chol_lower * normal_vector(chol_lower.cols());
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  void seed_from(std::uint64_t x) {
    for (auto& w : s_) {
      x += 0x9E3779B97F4A7C15ull;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      w = z ^ (z >> 31);
    }
    if (s_[0] == 0 && s_[1] == 0 && s_[2] == 0 && s_[3] == 0) s_[0] = 1;
  }

  std::array<std::uint64_t, 4> s_{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace secure_game
