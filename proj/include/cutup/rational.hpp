#pragma once

// Exact rational arithmetic for time values.
//
// All timestamps, durations and frame rates are carried as reduced fractions
// of 64-bit integers so that interval partitions and overlaps can be checked
// with zero tolerance. Intermediate products use 128-bit integers; a result
// that does not fit back into 64 bits throws std::overflow_error.

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cutup {

class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value), den_(1) {}  // NOLINT(implicit)
  Rational(std::int64_t num, std::int64_t den) { assign(num, den); }

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }

  double to_double() const noexcept {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  /// Largest integer not greater than the value.
  std::int64_t floor() const noexcept {
    std::int64_t q = num_ / den_;
    if ((num_ % den_ != 0) && (num_ < 0)) --q;
    return q;
  }

  std::int64_t ceil() const noexcept {
    std::int64_t q = num_ / den_;
    if ((num_ % den_ != 0) && (num_ > 0)) ++q;
    return q;
  }

  /// Nearest integer, halves rounded away from zero.
  std::int64_t round() const noexcept {
    if (num_ >= 0) return (*this + Rational(1, 2)).floor();
    return -((-*this).round());
  }

  Rational operator-() const { return from_wide(-static_cast<__int128>(num_), den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                     static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) noexcept {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept {
    const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  /// Parses "12", "-3.25", "0.040" or "30000/1001".
  static Rational parse(std::string_view text);

  /// Snaps a double onto the grid 1/den (nearest, halves away from zero).
  static Rational quantize(double value, std::int64_t den) {
    if (!std::isfinite(value)) throw std::domain_error("cannot quantize a non-finite value");
    return Rational(static_cast<std::int64_t>(std::llround(value * static_cast<double>(den))), den);
  }

  /// Exact decimal when the denominator is 2^a 5^b, otherwise "p/q".
  std::string to_string() const;

 private:
  void assign(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    *this = from_wide(num, den);
  }

  static Rational from_wide(__int128 num, __int128 den) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    __int128 a = num < 0 ? -num : num;
    __int128 b = den;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    const __int128 g = a == 0 ? 1 : a;
    num /= g;
    den /= g;
    constexpr __int128 lo = INT64_MIN;
    constexpr __int128 hi = INT64_MAX;
    if (num < lo || num > hi || den > hi) throw std::overflow_error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rational min(const Rational& a, const Rational& b) { return b < a ? b : a; }
inline Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

inline Rational Rational::parse(std::string_view text) {
  auto fail = [&]() -> Rational {
    throw std::invalid_argument("not a decimal or fraction: '" + std::string(text) + "'");
  };
  auto parse_int = [&](std::string_view s) -> std::int64_t {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) fail();
    return v;
  };

  if (text.empty()) return fail();
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    const std::int64_t d = parse_int(text.substr(slash + 1));
    if (d == 0) return fail();
    return Rational(parse_int(text.substr(0, slash)), d);
  }

  bool negative = false;
  std::string_view body = text;
  if (body.front() == '-' || body.front() == '+') {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  const auto dot = body.find('.');
  std::string_view whole = body.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : body.substr(dot + 1);
  if (whole.empty() && frac.empty()) return fail();
  for (char c : whole)
    if (c < '0' || c > '9') return fail();
  for (char c : frac)
    if (c < '0' || c > '9') return fail();
  while (!frac.empty() && frac.back() == '0') frac.remove_suffix(1);
  // 36 digits keep 10^n inside __int128; from_wide reduces before narrowing.
  if (frac.size() > 36) return fail();

  Rational value = whole.empty() ? Rational(0) : Rational(parse_int(whole));
  if (!frac.empty()) {
    __int128 digits = 0;
    __int128 scale = 1;
    for (char c : frac) {
      digits = digits * 10 + (c - '0');
      scale *= 10;
    }
    value += from_wide(digits, scale);
  }
  return negative ? -value : value;
}

inline std::string Rational::to_string() const {
  std::int64_t d = den_;
  int twos = 0;
  int fives = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++twos;
  }
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d != 1) return std::to_string(num_) + "/" + std::to_string(den_);

  const int digits = std::max(twos, fives);
  std::string out = num_ < 0 ? "-" : "";
  // |num| * 10^digits / den is an integer by construction.
  unsigned __int128 scaled = static_cast<unsigned __int128>(num_ < 0 ? -static_cast<__int128>(num_) : num_);
  for (int i = 0; i < digits; ++i) scaled *= 10;
  scaled /= static_cast<unsigned __int128>(den_);

  std::string all;
  if (scaled == 0) all = "0";
  while (scaled > 0) {
    all.insert(all.begin(), static_cast<char>('0' + static_cast<int>(scaled % 10)));
    scaled /= 10;
  }
  if (digits == 0) return out + all;
  if (static_cast<int>(all.size()) <= digits) all.insert(0, static_cast<std::size_t>(digits) - all.size() + 1, '0');
  out += all.substr(0, all.size() - static_cast<std::size_t>(digits));
  out += '.';
  out += all.substr(all.size() - static_cast<std::size_t>(digits));
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

}  // namespace cutup
