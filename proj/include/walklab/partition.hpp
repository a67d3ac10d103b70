#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/interval.hpp"

namespace walklab {

// Part of the state interval omitted when a geometric tail is truncated.
// Kept as metadata so downstream measure computations can report bounds
// "up to tail mass" and dd-covers can close up to the accumulation point.
struct TailGap {
  Interval gap;
  double accumulationPoint;  // one of gap.lo / gap.hi
};

struct MarkovPartition {
  Interval stateInterval{0.0, 1.0};
  std::vector<Interval> atoms;               // sorted by lo, disjoint interiors
  std::vector<double> accumulationPoints;    // the c_i of Ra
  std::vector<double> separators;            // the d_i of Rb
  std::vector<TailGap> tailGaps;
  double tailRatio = 0.0;                    // worst geometric decay ratio (lambda of Rb)
  int truncationIndex = 0;                   // max atoms emitted for one geometric tail
  double truncatedTailLength = 0.0;          // total omitted length

  std::size_t size() const { return atoms.size(); }

  // Atom whose interior contains x.  Nullopt for boundary points, tail gaps
  // and points outside the state interval.
  std::optional<std::size_t> locate(double x) const {
    auto it = std::upper_bound(atoms.begin(), atoms.end(), x,
                               [](double v, const Interval& a) { return v < a.hi; });
    if (it == atoms.end()) return std::nullopt;
    if (it->contains_interior(x)) return std::size_t(it - atoms.begin());
    return std::nullopt;
  }

  bool in_tail_gap(double x) const {
    for (const auto& t : tailGaps)
      if (t.gap.contains_closed(x) && !(x == t.gap.lo && t.accumulationPoint != t.gap.lo) &&
          !(x == t.gap.hi && t.accumulationPoint != t.gap.hi))
        return true;
    return false;
  }

  double total_atom_length() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.length();
    return s;
  }

  // Largest ratio between adjacent atoms (the C of Ra, >= 1).
  double adjacent_ratio_bound() const {
    double c = 1.0;
    for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
      if (std::abs(atoms[i].hi - atoms[i + 1].lo) > 1e-12) continue;  // not adjacent
      const double r = atoms[i + 1].length() / atoms[i].length();
      c = std::max(c, std::max(r, 1.0 / r));
    }
    return c;
  }
};

// --- partition specifications -----------------------------------------------

struct ExplicitSegment {
  std::vector<Interval> atoms;
};

// Atoms filling [span.lo, span.hi], lengths decaying geometrically toward the
// accumulation end; truncated once the remaining tail is below tolerance.
struct GeometricSegment {
  Interval span{0.0, 1.0};
  double ratio = 0.5;          // in (0,1)
  bool accumulateAtLo = true;  // else accumulate at span.hi
};

struct PartitionSpec {
  Interval stateInterval{0.0, 1.0};
  std::vector<std::variant<ExplicitSegment, GeometricSegment>> segments;
  double truncationTol = 1e-6;
  int indexCap = 4096;  // refuse geometric tails that need more atoms than this
};

inline PartitionSpec explicit_partition(std::vector<Interval> atoms) {
  PartitionSpec s;
  ExplicitSegment seg;
  seg.atoms = std::move(atoms);
  s.segments.emplace_back(std::move(seg));
  return s;
}

inline MarkovPartition build_partition(const PartitionSpec& spec) {
  MarkovPartition p;
  p.stateInterval = spec.stateInterval;

  struct SegMeta {
    Interval span;
    bool geometric = false;
    bool accumulateAtLo = true;
  };
  std::vector<SegMeta> metas;

  for (const auto& segv : spec.segments) {
    if (std::holds_alternative<ExplicitSegment>(segv)) {
      const auto& seg = std::get<ExplicitSegment>(segv);
      if (seg.atoms.empty()) throw construction_error("empty explicit segment");
      double lo = seg.atoms.front().lo, hi = seg.atoms.front().hi;
      for (const auto& a : seg.atoms) {
        if (a.length() <= 0.0) throw construction_error("atom with non-positive length");
        lo = std::min(lo, a.lo);
        hi = std::max(hi, a.hi);
        p.atoms.push_back(a);
      }
      metas.push_back({Interval(lo, hi), false, true});
    } else {
      const auto& seg = std::get<GeometricSegment>(segv);
      if (!(seg.ratio > 0.0 && seg.ratio < 1.0))
        throw construction_error("geometric ratio must lie in (0,1)");
      const double s = seg.span.length();
      int k = 0;
      double tail = s;
      while (tail > spec.truncationTol) {
        if (k >= spec.indexCap)
          throw construction_error("geometric tail does not reach tolerance within index cap");
        const double nextTail = tail * seg.ratio;
        // atom of length tail - nextTail at the far end of the remaining span
        if (seg.accumulateAtLo)
          p.atoms.emplace_back(seg.span.lo + nextTail, seg.span.lo + tail);
        else
          p.atoms.emplace_back(seg.span.hi - tail, seg.span.hi - nextTail);
        tail = nextTail;
        ++k;
      }
      p.truncationIndex = std::max(p.truncationIndex, k);
      p.truncatedTailLength += tail;
      p.tailRatio = std::max(p.tailRatio, seg.ratio);
      const double c = seg.accumulateAtLo ? seg.span.lo : seg.span.hi;
      p.accumulationPoints.push_back(c);
      if (seg.accumulateAtLo)
        p.tailGaps.push_back({Interval(seg.span.lo, seg.span.lo + tail), c});
      else
        p.tailGaps.push_back({Interval(seg.span.hi - tail, seg.span.hi), c});
      metas.push_back({seg.span, true, seg.accumulateAtLo});
    }
  }

  if (p.atoms.empty()) throw construction_error("partition has no atoms");
  std::sort(p.atoms.begin(), p.atoms.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i + 1 < p.atoms.size(); ++i)
    if (p.atoms[i].hi > p.atoms[i + 1].lo + 1e-12)
      throw construction_error("overlapping atoms at index " + std::to_string(i));
  for (const auto& a : p.atoms)
    if (a.lo < spec.stateInterval.lo - 1e-12 || a.hi > spec.stateInterval.hi + 1e-12)
      throw construction_error("atom outside the state interval");

  // A segment boundary where geometric tails decay away on both sides is a
  // separator point: it belongs to no atom at any refinement level.
  std::sort(metas.begin(), metas.end(),
            [](const SegMeta& a, const SegMeta& b) { return a.span.lo < b.span.lo; });
  for (std::size_t i = 0; i + 1 < metas.size(); ++i) {
    if (std::abs(metas[i].span.hi - metas[i + 1].span.lo) > 1e-12) continue;
    if (metas[i].geometric && metas[i + 1].geometric && metas[i].accumulateAtLo &&
        !metas[i + 1].accumulateAtLo)
      p.separators.push_back(metas[i].span.hi);
  }
  std::sort(p.accumulationPoints.begin(), p.accumulationPoints.end());
  p.accumulationPoints.erase(
      std::unique(p.accumulationPoints.begin(), p.accumulationPoints.end(),
                  [](double a, double b) { return std::abs(a - b) < 1e-12; }),
      p.accumulationPoints.end());
  std::sort(p.separators.begin(), p.separators.end());
  return p;
}

}  // namespace walklab
