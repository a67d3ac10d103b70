#pragma once

#include <cmath>

#include "walklab/rng.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// Long-ensemble stepper.  Differences from RandomWalk::step:
//  - points within `nudge` of an atom boundary are moved midpoint-ward by
//    `nudge` (counted, measure-zero set);
//  - a sub-ulp dither (~1e-16, from the orbit's counter RNG) is added after
//    each step.  Exactly-dyadic branches (slope 2 with dyadic offsets) are
//    otherwise closed on the binary lattice, so a double-precision orbit
//    collapses onto a fixed tail after ~53 steps; the dither restores the
//    statistics of a typical orbit and keeps runs deterministic per seed.
class OrbitSimulator {
public:
  OrbitSimulator(const RandomWalk& walk, CounterRng rng, bool dither = true,
                 double nudge = 1e-12)
      : walk_(&walk), rng_(rng), dither_(dither), nudge_(nudge) {}

  // uniform start point in the given state
  WalkPoint start_uniform(int state) {
    const Interval& s = walk_->map_at(state).partition().stateInterval;
    return {s.lo + rng_.next_double() * s.length(), state};
  }

  WalkPoint step(WalkPoint p) {
    const MarkovMap& m = walk_->map_at(p.n);
    double x = snap_interior(m, p.x);
    const MapEval e = m.eval(x);
    double y = e.y;
    if (dither_) y += (rng_.next_double() - 0.5) * 4.4e-16;
    const Interval& s = walk_->map_at(p.n + walk_->drift_at(p.n, e.branch)).partition()
                            .stateInterval;
    y = std::min(std::max(y, s.lo + nudge_), s.hi - nudge_);
    return {y, p.n + walk_->drift_at(p.n, e.branch)};
  }

  long boundary_nudges() const { return nudges_; }

private:
  double snap_interior(const MarkovMap& m, double x) {
    const auto& part = m.partition();
    auto idx = part.locate(x);
    if (idx) {
      const Interval& a = part.atoms[*idx];
      if (x - a.lo < nudge_ || a.hi - x < nudge_) {
        ++nudges_;
        return x < a.mid() ? x + nudge_ : x - nudge_;
      }
      return x;
    }
    // boundary point or gap: move toward the nearest atom interior
    ++nudges_;
    for (const auto& a : part.atoms) {
      if (std::abs(x - a.lo) <= 2.0 * nudge_) return a.lo + nudge_;
      if (std::abs(x - a.hi) <= 2.0 * nudge_) return a.hi - nudge_;
    }
    // inside a truncated tail gap: push to the adjacent atom
    for (const auto& t : part.tailGaps) {
      if (t.gap.contains_closed(x))
        return t.accumulationPoint == t.gap.lo ? t.gap.hi + nudge_ : t.gap.lo - nudge_;
    }
    throw boundary_error("orbit point left the partition support");
  }

  const RandomWalk* walk_;
  CounterRng rng_;
  bool dither_;
  double nudge_;
  long nudges_ = 0;
};

}  // namespace walklab
