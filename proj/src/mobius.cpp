#include "thermospec/mobius.hpp"

#include <cmath>

namespace thermospec {

namespace {

constexpr __int128 kAbsLimit = static_cast<__int128>(1) << 96;

bool mul_ok(__int128 x, __int128 y, __int128& out) {
  // Entries are kept below 2^96 so the product of two in-range values cannot
  // wrap __int128; we only need to check the result against the limit.
  out = x * y;
  const __int128 mag = out < 0 ? -out : out;
  return mag < kAbsLimit;
}

}  // namespace

MobiusZ MobiusZ::compose(const MobiusZ& r) const {
  MobiusZ m;
  m.ok = ok && r.ok;
  if (!m.ok) return m;
  __int128 t1, t2;
  m.ok = mul_ok(a, r.a, t1) && mul_ok(b, r.c, t2);
  m.a = t1 + t2;
  m.ok = m.ok && mul_ok(a, r.b, t1) && mul_ok(b, r.d, t2);
  m.b = t1 + t2;
  m.ok = m.ok && mul_ok(c, r.a, t1) && mul_ok(d, r.c, t2);
  m.c = t1 + t2;
  m.ok = m.ok && mul_ok(c, r.b, t1) && mul_ok(d, r.d, t2);
  m.d = t1 + t2;
  return m;
}

std::optional<Rat> MobiusZ::apply(const Rat& y) const {
  if (!ok) return std::nullopt;
  const __int128 p = y.num, q = y.den;
  const __int128 num = a * p + b * q;
  const __int128 den = c * p + d * q;
  if (den == 0) return std::nullopt;
  constexpr __int128 lim = static_cast<__int128>(1) << 62;
  __int128 n = num, m = den;
  if (m < 0) {
    n = -n;
    m = -m;
  }
  if (n >= lim || n <= -lim || m >= lim) return std::nullopt;
  Rat r{static_cast<std::int64_t>(n), static_cast<std::int64_t>(m)};
  r.reduce();
  return r;
}

Interval MobiusZ::apply(const Interval& y) const {
  const double ad = static_cast<double>(a), bd = static_cast<double>(b);
  const double cd = static_cast<double>(c), dd = static_cast<double>(d);
  const Interval num = Interval(ad) * y + Interval(bd);
  const Interval den = Interval(cd) * y + Interval(dd);
  return num / den;
}

Interval MobiusZ::abs_derivative(const Interval& y) const {
  const double cd = static_cast<double>(c), dd = static_cast<double>(d);
  const Interval den = Interval(cd) * y + Interval(dd);
  const Interval den2 = den * den;
  const double adet = std::abs(det());
  return Interval(adet) / den2;
}

double MobiusZ::abs_derivative(double y) const {
  const double den = static_cast<double>(c) * y + static_cast<double>(d);
  return std::abs(det()) / (den * den);
}

std::optional<double> mobius_fixed_point(const MobiusZ& m, const Interval& domain) {
  const double a = static_cast<double>(m.a), b = static_cast<double>(m.b);
  const double c = static_cast<double>(m.c), d = static_cast<double>(m.d);
  if (std::abs(c) < 1e-300) {
    if (std::abs(a - d) < 1e-300) return std::nullopt;
    const double y = b / (d - a);
    return domain.contains(y) ? std::optional<double>(y) : std::nullopt;
  }
  const double B = d - a, C = -b;
  const double disc = B * B - 4.0 * c * C;
  if (disc < 0) return std::nullopt;
  const double s = std::sqrt(disc);
  for (const double y : {(-B + s) / (2 * c), (-B - s) / (2 * c)}) {
    if (domain.contains(y)) return y;
  }
  return std::nullopt;
}

}  // namespace thermospec
