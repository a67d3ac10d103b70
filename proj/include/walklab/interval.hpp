#pragma once

#include <algorithm>
#include <cmath>

#include "walklab/common.hpp"

namespace walklab {

// Closed-interval arithmetic on [lo,hi]; partition atoms are open intervals
// sharing endpoints, so all overlap tests go through interior predicates.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double a, double b) : lo(a), hi(b) {
    if (!(lo < hi)) throw construction_error("interval requires lo < hi");
  }

  double length() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }

  bool contains_interior(double x) const { return lo < x && x < hi; }
  bool contains_closed(double x, double tol = 0.0) const {
    return lo - tol <= x && x <= hi + tol;
  }

  // [other] sits inside [this] up to tol.
  bool covers(const Interval& other, double tol) const {
    return other.lo >= lo - tol && other.hi <= hi + tol;
  }

  bool overlaps_interior(const Interval& other) const {
    return std::max(lo, other.lo) < std::min(hi, other.hi);
  }

  double overlap_length(const Interval& other) const {
    return std::max(0.0, std::min(hi, other.hi) - std::max(lo, other.lo));
  }
};

inline Interval intersect(const Interval& a, const Interval& b) {
  return Interval(std::max(a.lo, b.lo), std::min(a.hi, b.hi));
}

}  // namespace walklab
