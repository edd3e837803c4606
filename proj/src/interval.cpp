#include "thermospec/interval.hpp"

#include <numeric>

namespace thermospec {

std::optional<Rat> Rat::from_double(double x) {
  if (!std::isfinite(x)) return std::nullopt;
  int e = 0;
  double m = std::frexp(x, &e);  // x = m * 2^e, |m| in [0.5, 1)
  // Scale mantissa to an integer (53 bits).
  std::int64_t num = static_cast<std::int64_t>(std::ldexp(m, 53));
  e -= 53;
  while (num != 0 && (num & 1) == 0) {
    num >>= 1;
    ++e;
  }
  if (e >= 0) {
    if (e > 9) return std::nullopt;  // integer too large to be useful here
    return Rat{num << e, 1};
  }
  if (e < -62) return std::nullopt;
  return Rat{num, static_cast<std::int64_t>(1) << (-e)};
}

Interval Rat::enclosure() const {
  const double v = to_double();
  // One ulp outward covers the single rounding of the division.
  return {down(v), up(v)};
}

void Rat::reduce() {
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

std::string to_string(const Rat& r) {
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

}  // namespace thermospec
