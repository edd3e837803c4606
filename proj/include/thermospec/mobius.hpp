#pragma once

#include <cstdint>
#include <optional>

#include "thermospec/interval.hpp"

namespace thermospec {

// Integer 2x2 Mobius transformation y -> (a*y + b)/(c*y + d), det = +-1.
// Entries live in __int128 so that compositions along words of length ~40
// on the modular-group maps stay exact; `ok` drops to false on overflow and
// callers switch to the rounded Interval path.
struct MobiusZ {
  __int128 a = 1, b = 0, c = 0, d = 1;
  bool ok = true;

  static MobiusZ identity() { return {}; }

  MobiusZ compose(const MobiusZ& rhs) const;  // this ∘ rhs (matrix product)

  std::optional<Rat> apply(const Rat& y) const;
  Interval apply(const Interval& y) const;

  // |g'(y)| = |det| / (c*y + d)^2
  Interval abs_derivative(const Interval& y) const;
  double abs_derivative(double y) const;

  double det() const { return static_cast<double>(a) * static_cast<double>(d) -
                              static_cast<double>(b) * static_cast<double>(c); }
};

// Fixed point of y -> (a y + b)/(c y + d) in a given interval, via the
// quadratic c y^2 + (d - a) y - b = 0.  Returns the root inside `domain`.
std::optional<double> mobius_fixed_point(const MobiusZ& m, const Interval& domain);

}  // namespace thermospec
