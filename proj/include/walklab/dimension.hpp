#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// Unique beta with sum |C|^beta = 1 over the family.  The map is strictly
// decreasing in beta since every length is < 1; bisection to 1e-12 after
// doubling the upper end until the sign changes.
inline double vhd(const CylinderFamily& family) {
  if (family.cylinders.empty()) throw construction_error("vhd of an empty family");
  for (const auto& c : family.cylinders)
    if (!(c.interval.length() > 0.0 && c.interval.length() < 1.0))
      throw construction_error("vhd requires cylinder lengths in (0,1)");
  auto value = [&](double beta) {
    double s = 0.0;
    for (const auto& c : family.cylinders) s += std::pow(c.interval.length(), beta);
    return s - 1.0;
  };
  double lo = 0.0;
  double flo = value(lo);
  if (flo <= 0.0) return 0.0;  // already <= 1 cylinder mass at beta = 0
  double hi = 1.0;
  while (value(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw numeric_error("vhd upper bound search failed");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (value(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct HdBounds {
  double lower = 0.0;
  double upper = 1.0;
  double halfWidth = 0.0;
  bool vacuous = false;
};

// |HD - VHD| <= d / (log lambda - d) with lambda = 1/theta the expansion of
// the induced map and d its distortion sup.  Vacuous (full [0,1]) when
// log lambda <= d.
inline HdBounds hd_bounds(double beta, double theta, double d) {
  if (d < 0.0 || !(theta > 0.0 && theta < 1.0))
    throw construction_error("hd_bounds requires d >= 0 and theta in (0,1)");
  HdBounds b;
  const double logLambda = std::log(1.0 / theta);
  if (logLambda <= d) {
    b.vacuous = true;
    b.lower = 0.0;
    b.upper = 1.0;
    b.halfWidth = std::numeric_limits<double>::infinity();
    return b;
  }
  b.halfWidth = d / (logLambda - d);
  b.lower = std::max(0.0, beta - b.halfWidth);
  b.upper = std::min(1.0, beta + b.halfWidth);
  return b;
}

inline HdBounds hd_bounds(const CylinderFamily& family, double theta, double d) {
  return hd_bounds(vhd(family), theta, d);
}

struct SurvivorFamily {
  CylinderFamily family;
  int startState = 0;
  int floorState = 0;
  std::optional<double> betaSlope;
  double totalLength = 0.0;
};

// All depth-`depth` cylinders from (.,k) whose state path stays >= floorState,
// by pruned depth-first enumeration.
inline SurvivorFamily survivor_family(const RandomWalk& walk, int k, int depth, int floorState,
                                      std::size_t cap = 1u << 22) {
  SurvivorFamily out;
  out.startState = k;
  out.floorState = floorState;
  if (k < floorState) {
    out.family.sourceDepth = depth;
    return out;  // the start state itself already violates the floor
  }
  out.family = refine_partition_pruned(
      walk, k, depth, cap,
      [&](std::span<const int> states) { return states.back() >= floorState; });
  out.totalLength = out.family.total_length();
  return out;
}

// Survivors whose terminal height additionally reaches betaSlope * depth, the
// finite-depth surrogate for liminf pi_2(F^n)/n >= beta.
inline SurvivorFamily beta_survivor_family(const RandomWalk& walk, int k, int depth,
                                           double betaSlope, std::size_t cap = 1u << 22) {
  if (!(betaSlope > 0.0)) throw construction_error("beta_survivor_family requires betaSlope > 0");
  SurvivorFamily out;
  out.startState = k;
  out.floorState = 0;
  out.betaSlope = betaSlope;
  if (k < 0) {
    out.family.sourceDepth = depth;
    return out;
  }
  out.family = refine_partition_pruned(
      walk, k, depth, cap, [&](std::span<const int> states) {
        if (states.back() < 0) return false;
        if (states.size() == std::size_t(depth) + 1 &&
            double(states.back() - k) < betaSlope * double(depth))
          return false;
        return true;
      });
  out.totalLength = out.family.total_length();
  return out;
}

// --- dd-intervals -------------------------------------------------------------

struct DDInterval {
  std::vector<Cylinder> cylinders;  // contiguous, same level, sorted by position
  std::size_t rootIndex = 0;
  Interval hull{0.0, 1.0};
  bool tailAbsorbed = false;  // hull closes over a truncated geometric tail

  double sum_alpha(double alpha) const {
    double s = 0.0;
    for (const auto& c : cylinders) s += std::pow(c.interval.length(), alpha);
    return s;
  }
};

struct DDCover {
  std::vector<DDInterval> parts;
  double absorbedTailLength = 0.0;
  // diagnostic: (alpha, sum_i |W_i|^alpha / |J|^alpha)
  std::vector<std::pair<double, double>> ratioGrid;
};

namespace detail {

// Level-`level` cylinders from `state` whose interval meets J, pruned by
// interval overlap so only the relevant subtree is walked.
inline std::vector<Cylinder> cells_over(const RandomWalk& walk, int state, const Interval& J,
                                        int level) {
  std::vector<Cylinder> cells;
  std::vector<int> path;
  std::vector<int> states{state};  // states[i] = state at time i
  std::function<void()> rec = [&]() {
    const int curState = states.back();
    const MarkovPartition& part = walk.map_at(curState).partition();
    const Interval* img = nullptr;
    if (!path.empty())
      img = &walk.map_at(states[states.size() - 2]).branch(std::size_t(path.back())).image();
    for (std::size_t j = 0; j < part.size(); ++j) {
      if (img && !img->covers(part.atoms[j], 1e-9)) continue;
      path.push_back(int(j));
      Cylinder c;
      try {
        c = cylinder(walk, state, path);
      } catch (const numeric_error&) {
        path.pop_back();
        continue;  // collapses below double resolution
      }
      if (c.interval.hi > J.lo && c.interval.lo < J.hi) {
        if (int(path.size()) == level) {
          cells.push_back(std::move(c));
        } else {
          states.push_back(curState + walk.drift_at(curState, j));
          rec();
          states.pop_back();
        }
      }
      path.pop_back();
    }
  };
  rec();
  std::sort(cells.begin(), cells.end(),
            [](const Cylinder& a, const Cylinder& b) { return a.interval.lo < b.interval.lo; });
  return cells;
}

}  // namespace detail

// Cover of J by same-level dd-intervals: contiguous runs of level cells,
// split at the separators d_i of the state's partition, hulls closed over
// truncated geometric tails (the omitted stub length is reported).
inline DDCover dd_cover(const RandomWalk& walk, int state, const Interval& J, int level,
                        std::span<const double> alphaGrid = {}) {
  const auto& part = walk.map_at(state).partition();
  if (!part.stateInterval.covers(J, 1e-12))
    throw construction_error("dd_cover: J outside the state interval");
  std::vector<Cylinder> cells = detail::cells_over(walk, state, J, level);
  if (cells.empty())
    throw tail_error("dd_cover: no level-" + std::to_string(level) +
                     " cylinders meet J (truncated tail region)");

  const double absorbLimit = std::max(4.0 * part.truncatedTailLength, 1e-9);

  DDCover cover;
  DDInterval cur;
  auto flush = [&]() {
    if (cur.cylinders.empty()) return;
    // root cylinder: the end adjacent to the closed (non-accumulating) side;
    // lengths decay toward accumulation, so take the longer end, ties toward
    // the longer cylinder overall order (first on equality).
    const double lenFirst = cur.cylinders.front().interval.length();
    const double lenLast = cur.cylinders.back().interval.length();
    cur.rootIndex = lenFirst >= lenLast ? 0 : cur.cylinders.size() - 1;
    cover.parts.push_back(std::move(cur));
    cur = DDInterval{};
  };

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cur.cylinders.empty()) {
      cur.hull = cells[i].interval;
      cur.cylinders.push_back(cells[i]);
      continue;
    }
    const double gap = cells[i].interval.lo - cur.hull.hi;
    bool separatorHere = false;
    for (double d : part.separators)
      if (std::abs(cells[i].interval.lo - d) <= 1e-12 || (cur.hull.hi < d && d < cells[i].interval.lo))
        separatorHere = true;
    if (separatorHere) {
      flush();
      cur.hull = cells[i].interval;
      cur.cylinders.push_back(cells[i]);
      continue;
    }
    if (gap > 1e-12) {
      if (gap > absorbLimit)
        throw tail_error("dd_cover: level too deep for the truncated partition (gap " +
                         std::to_string(gap) + ")");
      cover.absorbedTailLength += gap;
      cur.tailAbsorbed = true;
    }
    cur.hull.hi = cells[i].interval.hi;
    cur.cylinders.push_back(cells[i]);
  }
  flush();

  for (double a : alphaGrid) {
    double s = 0.0;
    for (const auto& w : cover.parts) s += std::pow(w.hull.length(), a);
    cover.ratioGrid.emplace_back(a, s / std::pow(J.length(), a));
  }
  return cover;
}

// (|W|^alpha / sum_i |C_i|^alpha , |C_root|^alpha / sum_i |C_i|^alpha)
inline std::pair<double, double> root_cylinder_ratio(const DDInterval& dd, double alpha) {
  const double s = dd.sum_alpha(alpha);
  return {std::pow(dd.hull.length(), alpha) / s,
          std::pow(dd.cylinders[dd.rootIndex].interval.length(), alpha) / s};
}

// --- moment sums ---------------------------------------------------------------

struct MomentSumResult {
  std::vector<double> sums;  // sums[n-1] = sum over P^n of |P|^{1-eps}
  double growthFactor = 0.0; // fitted per-step factor
  double maxStepRatio = 0.0; // max s_{n+1}/s_n, a (1+alpha) bound witness
  LinearFit fit;
  bool partial = false;
};

inline MomentSumResult partition_moment_sum(const RandomWalk& walk, int state, int nMax,
                                            double eps, std::size_t cap = 1u << 22) {
  if (nMax < 1 || eps < 0.0 || eps >= 1.0)
    throw construction_error("partition_moment_sum requires nMax >= 1, eps in [0,1)");
  MomentSumResult out;
  for (int n = 1; n <= nMax; ++n) {
    CylinderFamily fam = refine_partition(walk, state, n, cap);
    out.partial = out.partial || fam.capExceeded;
    double s = 0.0;
    for (const auto& c : fam.cylinders) s += std::pow(c.interval.length(), 1.0 - eps);
    out.sums.push_back(s);
  }
  std::vector<double> xs, ys;
  for (int n = 1; n <= nMax; ++n) {
    xs.push_back(double(n));
    ys.push_back(std::log(out.sums[std::size_t(n - 1)]));
  }
  out.fit = fit_line(xs, ys);
  out.growthFactor = std::exp(out.fit.slope);
  for (std::size_t i = 0; i + 1 < out.sums.size(); ++i)
    out.maxStepRatio = std::max(out.maxStepRatio, out.sums[i + 1] / out.sums[i]);
  return out;
}

// --- dimension estimates ---------------------------------------------------------

struct DimensionEstimate {
  double beta = 0.0;               // VHD of the survivor family (outer bound)
  double betaPositiveDrift = 0.0;  // VHD of the positive-terminal-drift subfamily
  double hdLower = 0.0;
  double hdUpper = 1.0;
  int depth = 0;
  std::size_t familySize = 0;
  bool converged = false;
  bool partial = false;
  bool empty = false;
};

// Per-depth VHD of the survivor family with distortion bounds for the induced
// map F^depth.  The outer family gives an upper-bound flavor; the subfamily of
// cylinders with terminal state above the start gives the induced-positive-
// drift lower device.  Both are reported.
inline std::vector<DimensionEstimate> dimension_estimate(const RandomWalk& walk, int k,
                                                         int floorState,
                                                         std::span<const int> depthSchedule,
                                                         std::size_t cap = 1u << 22) {
  std::vector<DimensionEstimate> out;
  double prevBeta = -1.0;
  for (int depth : depthSchedule) {
    SurvivorFamily fam = survivor_family(walk, k, depth, floorState, cap);
    DimensionEstimate e;
    e.depth = depth;
    e.familySize = fam.family.cylinders.size();
    e.partial = fam.family.capExceeded;
    if (fam.family.cylinders.empty()) {
      e.empty = true;
      out.push_back(e);
      prevBeta = -1.0;
      continue;
    }
    e.beta = vhd(fam.family);
    // induced-map constants over `depth` steps
    double worstTheta = 0.0, dSum = 0.0;
    for (int s : fam.family.cylinders.front().statePath) {
      const auto& m = walk.map_at(s);
      worstTheta = std::max(worstTheta, m.expansion_bound());
      dSum += m.distortion_bound();
    }
    const double thetaInduced = std::pow(worstTheta, depth);
    HdBounds hb = hd_bounds(e.beta, thetaInduced, dSum);
    e.hdLower = hb.lower;
    e.hdUpper = hb.upper;

    CylinderFamily positive;
    positive.sourceDepth = depth;
    for (const auto& c : fam.family.cylinders)
      if (c.statePath.back() + walk.drift_at(c.statePath.back(), std::size_t(c.path.back())) > k)
        positive.cylinders.push_back(c);
    e.betaPositiveDrift = positive.cylinders.empty() ? 0.0 : vhd(positive);

    e.converged = prevBeta >= 0.0 && std::abs(e.beta - prevBeta) < 1e-3;
    prevBeta = e.beta;
    out.push_back(e);
  }
  return out;
}

}  // namespace walklab
