#pragma once
// Counter-based random streams (Philox4x32-10).
//
// Every (base_seed, replica, purpose) triple names an independent stream whose
// draws are a pure function of the stream key and a running counter.  Replicas
// can therefore run on any worker in any order and still produce bitwise
// identical output.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace shelab {

namespace detail {
inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c,
                         const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * c[2];
  const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}
}  // namespace detail

// One 4x32 block of the 10-round Philox bijection.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += detail::kWeyl0;
      key[1] += detail::kWeyl1;
    }
    detail::philox_round(ctr, key);
  }
  return ctr;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : s) {
    h ^= std::uint8_t(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  RandomStream(std::uint64_t base_seed, std::uint64_t replica, std::string_view purpose) {
    const std::uint64_t ph = fnv1a64(purpose);
    const std::uint64_t k = splitmix64(base_seed ^ splitmix64(replica ^ splitmix64(ph)));
    const std::uint64_t salt = splitmix64(k ^ 0xA5A5A5A5DEADBEEFull);
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
    salt_ = {std::uint32_t(salt), std::uint32_t(salt >> 32)};
    id_ = k ^ (salt << 1);
  }

  std::uint64_t raw64() {
    if (lane_ >= 2) refill();
    const std::uint64_t lo = buf_[2 * lane_];
    const std::uint64_t hi = buf_[2 * lane_ + 1];
    ++lane_;
    return lo | (hi << 32);
  }

  // Uniform on (0,1); never returns 0 or 1, so log() is safe.
  double uniform() { return double(raw64() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  // Standard normal via Box-Muller; the second member of each pair is cached.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Stable identifier of the stream (for reports/seed audit).
  std::uint64_t stream_id() const { return id_; }

 private:
  void refill() {
    buf_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32), salt_[0], salt_[1]},
                      key_);
    ++block_;
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 2> salt_{};
  std::array<std::uint32_t, 4> buf_{};
  std::uint64_t block_ = 0;
  std::uint64_t id_ = 0;
  int lane_ = 2;
  bool have_cached_ = false;
  double cached_ = 0;
};

// Deterministic stream factory used by the campaign runner.
inline RandomStream seed_stream(std::uint64_t base_seed, std::uint64_t replica,
                                std::string_view purpose) {
  return RandomStream(base_seed, replica, purpose);
}

}  // namespace shelab
