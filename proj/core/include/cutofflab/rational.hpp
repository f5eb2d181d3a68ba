#pragma once

// Minimal exact rational type for increment probabilities.  Walk constructors
// produce uniform probabilities 1/|S|; custom walk files may carry arbitrary
// num/den pairs.  Arithmetic is overflow-checked through __int128 so that the
// sum-to-one validation is exact, never a floating-point comparison.

#include <cstdint>
#include <numeric>
#include <string>

#include "cutofflab/errors.hpp"

namespace cutofflab {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  friend bool operator==(const Rational&, const Rational&) = default;
};

namespace detail {
inline std::int64_t narrow_checked(__int128 v, const char* ctx) {
  if (v > INT64_MAX || v < INT64_MIN) {
    throw validation_error(std::string("rational overflow in ") + ctx);
  }
  return static_cast<std::int64_t>(v);
}

inline __int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 r = a % b;
    a = b;
    b = r;
  }
  return a;
}
}  // namespace detail

inline Rational make_rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw validation_error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

inline Rational add(const Rational& a, const Rational& b) {
  __int128 num = static_cast<__int128>(a.num) * b.den +
                 static_cast<__int128>(b.num) * a.den;
  __int128 den = static_cast<__int128>(a.den) * b.den;
  if (num == 0) return Rational{0, 1};
  const __int128 g = detail::gcd128(num, den);
  num /= g;
  den /= g;
  return make_rational(detail::narrow_checked(num, "rational add"),
                       detail::narrow_checked(den, "rational add"));
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.num) / static_cast<double>(r.den);
}

inline std::string format_rational(const Rational& r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

inline Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      return make_rational(std::stoll(text), 1);
    }
    return make_rational(std::stoll(text.substr(0, slash)),
                         std::stoll(text.substr(slash + 1)));
  } catch (const std::logic_error&) {
    throw validation_error("malformed rational: '" + text + "'");
  }
}

}  // namespace cutofflab
