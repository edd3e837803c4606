#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

namespace thermospec {

// Closed interval [lo, hi] with outward rounding after every operation.
// This is deliberately lightweight: one ulp of widening per endpoint per
// operation, which over-covers the true rounding error of a single
// correctly-rounded double operation. Brackets produced this way are
// best-effort rigorous; every consumer reports its bracket width.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double x) : lo(x), hi(x) {}
  Interval(double l, double h) : lo(l), hi(h) {}

  static Interval point(double x) { return {x, x}; }
  static Interval hull(double a, double b) { return {std::min(a, b), std::max(a, b)}; }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool intersects(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }

  Interval intersect(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
};

inline double down(double x) {
  return std::nextafter(x, -std::numeric_limits<double>::infinity());
}
inline double up(double x) {
  return std::nextafter(x, std::numeric_limits<double>::infinity());
}

inline Interval widen(Interval v) { return {down(v.lo), up(v.hi)}; }

inline Interval operator+(const Interval& a, const Interval& b) {
  return widen({a.lo + b.lo, a.hi + b.hi});
}
inline Interval operator-(const Interval& a, const Interval& b) {
  return widen({a.lo - b.hi, a.hi - b.lo});
}
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return widen({std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})});
}

// Division requires 0 not in b.
inline Interval operator/(const Interval& a, const Interval& b) {
  const double p1 = a.lo / b.lo, p2 = a.lo / b.hi, p3 = a.hi / b.lo, p4 = a.hi / b.hi;
  return widen({std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})});
}

inline Interval operator*(double s, const Interval& a) { return Interval(s) * a; }

inline Interval ilog(const Interval& a) {  // requires a.lo > 0
  return widen({std::log(a.lo), std::log(a.hi)});
}
inline Interval iexp(const Interval& a) {
  return widen({std::exp(a.lo), std::exp(a.hi)});
}
inline Interval iabs(const Interval& a) {
  if (a.lo >= 0) return a;
  if (a.hi <= 0) return -a;
  return {0.0, std::max(-a.lo, a.hi)};
}

// Exact rational p/q with q > 0, reduced lazily.  Used for endpoint-exact
// cylinder arithmetic on the modular-group built-in maps; every double in
// [0,1) is representable.  Operations report failure on int64 overflow and
// callers fall back to the interval path.
struct Rat {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static std::optional<Rat> from_double(double x);
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  Interval enclosure() const;
  void reduce();
  bool operator==(const Rat& o) const {
    return static_cast<__int128>(num) * o.den == static_cast<__int128>(o.num) * den;
  }
  bool operator<(const Rat& o) const {
    return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
  }
};

std::string to_string(const Rat& r);

}  // namespace thermospec
