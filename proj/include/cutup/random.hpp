#pragma once

// Deterministic, counter-based randomness.
//
// Every random decision in the toolkit is drawn from a Stream identified by a
// 64-bit key. Keys are derived from the master seed and a list of string or
// integer labels (video_id, clip_id, sample index, purpose tag) with
// derive_key(), so a value depends only on its labels and never on the order
// in which other videos or clips were processed.
//
//   key  = mix64(master_seed), then for every label:
//          key = mix64(key ^ fnv1a64(label))        (strings)
//          key = mix64(key ^ mix64(label + GOLDEN))  (integers)
//   draw = mix64(key + (counter + 1) * GOLDEN)
//
// mix64 is the SplitMix64 finalizer, so draw(i) is the i-th output of a
// SplitMix64 generator seeded with `key`, computable at any counter position.
//
// Normal variates use the inverse-CDF transform of Wichura's AS 241 (PPND16)
// applied to the open-interval uniform u = (bits53 + 0.5) / 2^53. It uses only
// +, -, *, /, sqrt and log.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace cutup {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace detail {
constexpr std::uint64_t absorb(std::uint64_t key, std::string_view label) noexcept {
  return mix64(key ^ fnv1a64(label));
}
constexpr std::uint64_t absorb(std::uint64_t key, std::uint64_t label) noexcept {
  return mix64(key ^ mix64(label + kGolden));
}
constexpr std::uint64_t absorb(std::uint64_t key, int label) noexcept {
  return absorb(key, static_cast<std::uint64_t>(label));
}
}  // namespace detail

template <typename... Labels>
constexpr std::uint64_t derive_key(std::uint64_t master_seed, const Labels&... labels) noexcept {
  std::uint64_t key = mix64(master_seed);
  ((key = detail::absorb(key, labels)), ...);
  return key;
}

/// Inverse of the standard normal CDF for p in (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -value : value;
}

/// Random-access stream of 64-bit values for one derived key.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

  constexpr std::uint64_t at(std::uint64_t index) const noexcept {
    return mix64(key_ + (index + 1) * kGolden);
  }

  std::uint64_t next_u64() noexcept { return at(counter_++); }

  /// Uniform in the open interval (0, 1); never returns 0 or 1.
  double next_open_unit() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t bits;
    do {
      bits = next_u64();
    } while (bits >= limit);
    return bits % bound;
  }

  bool next_bernoulli_half() noexcept { return (next_u64() >> 63) != 0; }

  double next_normal(double mean, double stddev) { return mean + stddev * normal_quantile(next_open_unit()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cutup
