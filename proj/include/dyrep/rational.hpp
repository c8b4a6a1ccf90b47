#pragma once

#include <cstdint>
#include <numeric>

#include "dyrep/errors.hpp"

namespace dyrep {

// Exact nonnegative rational; used for goodness probabilities, where numerator
// and denominator stay far below 2^62.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (den == 0) throw domain_error("Rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }

  bool is_zero() const { return num == 0; }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  Rational inverse() const {
    if (num == 0) throw domain_error("Rational: inverse of zero");
    return Rational(den, num);
  }
  Rational operator*(const Rational& o) const {
    Rational a(num, o.den), b(o.num, den);  // cross-reduce before multiplying
    return Rational(a.num * b.num, a.den * b.den);
  }
};

}  // namespace dyrep
