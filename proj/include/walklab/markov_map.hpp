#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "walklab/branch.hpp"
#include "walklab/common.hpp"
#include "walklab/partition.hpp"

namespace walklab {

struct MapEval {
  double y;
  double dy;
  std::size_t branch;
};

// Piecewise expanding map of the state interval: one monotone branch per atom.
class MarkovMap {
public:
  MarkovMap(MarkovPartition partition, std::vector<Branch> branches)
      : partition_(std::move(partition)), branches_(std::move(branches)) {
    if (partition_.size() != branches_.size())
      throw construction_error("need exactly one branch per atom");
    double theta = 0.0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      const auto& a = partition_.atoms[i];
      const auto& d = branches_[i].domain();
      if (std::abs(a.lo - d.lo) > 1e-12 || std::abs(a.hi - d.hi) > 1e-12)
        throw construction_error("branch domain does not match atom " + std::to_string(i));
      theta = std::max(theta, 1.0 / branches_[i].min_abs_deriv());
      distortionBound_ = std::max(distortionBound_, branches_[i].distortion_sup());
    }
    if (theta >= 1.0) throw construction_error("map not uniformly expanding");
    expansionBound_ = theta;
  }

  const MarkovPartition& partition() const { return partition_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const Branch& branch(std::size_t i) const { return branches_[i]; }
  double expansion_bound() const { return expansionBound_; }
  double distortion_bound() const { return distortionBound_; }

  MapEval eval(double x) const {
    const auto idx = partition_.locate(x);
    if (!idx) {
      if (partition_.in_tail_gap(x))
        throw tail_error("eval_map: point in truncated tail at x=" + std::to_string(x));
      throw boundary_error("eval_map: point on an atom boundary at x=" + std::to_string(x));
    }
    const Branch& b = branches_[*idx];
    return {b.eval(x), b.deriv(x), *idx};
  }

  double inverse_branch(std::size_t branchIndex, double y) const {
    return branches_.at(branchIndex).inverse(y);
  }

private:
  MarkovPartition partition_;
  std::vector<Branch> branches_;
  double expansionBound_ = 0.0;
  double distortionBound_ = 0.0;
};

// Convenience builder: full-shift map with affine branches of the given
// relative lengths, every branch onto the state interval.
inline MarkovMap full_shift_affine(const std::vector<double>& lengths,
                                   const Interval& state = Interval(0.0, 1.0)) {
  double total = 0.0;
  for (double l : lengths) total += l;
  std::vector<Interval> atoms;
  double lo = state.lo;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double hi = i + 1 == lengths.size() ? state.hi : lo + lengths[i] / total * state.length();
    atoms.emplace_back(lo, hi);
    lo = hi;
  }
  PartitionSpec spec = explicit_partition(atoms);
  spec.stateInterval = state;
  MarkovPartition part = build_partition(spec);
  std::vector<Branch> branches;
  branches.reserve(atoms.size());
  for (const auto& a : part.atoms) branches.push_back(Branch::affine(a, state));
  return MarkovMap(std::move(part), std::move(branches));
}

struct PropertyCheck {
  bool verdict = false;
  double constant = 0.0;
  std::string note;
};

struct PropertyReport {
  PropertyCheck mk;   // branch images are connected unions of atoms
  PropertyCheck li;   // constant = delta, min image length
  PropertyCheck onto; // every image equals the state interval
  PropertyCheck ex;   // constant = theta
  PropertyCheck bd;   // constant = sup |D^2 tau/(D tau)^2|
  PropertyCheck sbd;  // constant = sup over branches of distortion/|J|
  PropertyCheck ra;   // constant = adjacent ratio bound; accumulationN below
  PropertyCheck rb;   // constant = measured tail ratio lambda
  PropertyCheck ao;   // image-overlap graph connected
  int accumulationN = 0;
  double accumulationGap = 0.0;
  double excludedTailLength = 0.0;
};

// Does [image] decompose as a connected union of atoms (plus truncated tail
// stubs) of [target]?  Endpoints must align with atom boundaries and the
// covered length must account for the whole image.
inline bool image_is_atom_union(const Interval& image, const MarkovPartition& target,
                                double tol = 1e-9) {
  bool loAligned = std::abs(image.lo - target.stateInterval.lo) <= tol;
  bool hiAligned = std::abs(image.hi - target.stateInterval.hi) <= tol;
  double covered = 0.0;
  for (const auto& a : target.atoms) {
    if (a.lo >= image.lo - tol && a.hi <= image.hi + tol) covered += a.length();
    if (std::abs(a.lo - image.lo) <= tol) loAligned = true;
    if (std::abs(a.hi - image.hi) <= tol) hiAligned = true;
  }
  for (const auto& t : target.tailGaps) {
    if (t.gap.lo >= image.lo - tol && t.gap.hi <= image.hi + tol) covered += t.gap.length();
    if (std::abs(t.gap.lo - image.lo) <= tol) loAligned = true;
    if (std::abs(t.gap.hi - image.hi) <= tol) hiAligned = true;
  }
  return loAligned && hiAligned && std::abs(covered - image.length()) <= tol;
}

// Structural property report for a single map, read as a self-map of its
// state interval.  Affine branches get exact constants; PerturbedAffine goes
// through the grid sup in Branch::distortion_sup.
inline PropertyReport check_properties(const MarkovMap& map) {
  PropertyReport r;
  const auto& part = map.partition();
  r.excludedTailLength = part.truncatedTailLength;

  // Mk
  r.mk.verdict = true;
  for (std::size_t i = 0; i < map.branches().size(); ++i) {
    if (!image_is_atom_union(map.branch(i).image(), part)) {
      r.mk.verdict = false;
      r.mk.note = "branch " + std::to_string(i) + " image is not a union of atoms";
      break;
    }
  }

  // LI / On
  double delta = std::numeric_limits<double>::infinity();
  bool onto = true;
  for (const auto& b : map.branches()) {
    delta = std::min(delta, b.image().length());
    onto = onto && std::abs(b.image().lo - part.stateInterval.lo) <= 1e-12 &&
           std::abs(b.image().hi - part.stateInterval.hi) <= 1e-12;
  }
  r.li = {delta > 0.0, delta, ""};
  r.onto = {onto, 0.0, ""};

  // Ex (derivative form)
  r.ex = {map.expansion_bound() < 1.0, map.expansion_bound(), ""};

  // BD / sBD
  double bd = 0.0, sbd = 0.0;
  for (std::size_t i = 0; i < map.branches().size(); ++i) {
    const double d = map.branch(i).distortion_sup();
    bd = std::max(bd, d);
    sbd = std::max(sbd, d / part.atoms[i].length());
  }
  r.bd = {true, bd, ""};
  r.sbd = {true, sbd, ""};

  // Ra: accumulation points interior (or at the lower state boundary),
  // pairwise gaps, adjacent ratio bound.
  r.accumulationN = int(part.accumulationPoints.size());
  r.ra.verdict = true;
  r.ra.constant = part.adjacent_ratio_bound();
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < part.accumulationPoints.size(); ++i) {
    const double c = part.accumulationPoints[i];
    if (c > part.stateInterval.hi - 1e-12 ||
        (c < part.stateInterval.lo + 1e-12 && c != part.stateInterval.lo)) {
      r.ra.verdict = false;
      r.ra.note = "accumulation point at upper state boundary";
    }
    if (i + 1 < part.accumulationPoints.size())
      gap = std::min(gap, part.accumulationPoints[i + 1] - c);
  }
  r.accumulationGap = std::isfinite(gap) ? gap : 0.0;

  // Rb: measured decay ratio along each tail, walking outward from the
  // accumulation point through boundary-adjacent atoms.
  if (part.tailGaps.empty()) {
    r.rb = {true, 0.0, "finite partition"};
  } else {
    double lambda = 0.0;
    bool decay = true;
    for (const auto& t : part.tailGaps) {
      const bool accAtLo = t.accumulationPoint == t.gap.lo;
      double b = accAtLo ? t.gap.hi : t.gap.lo;
      std::vector<double> lens;
      for (int steps = 0; steps < 16; ++steps) {
        const Interval* found = nullptr;
        for (const auto& a : part.atoms) {
          if (accAtLo ? std::abs(a.lo - b) <= 1e-12 : std::abs(a.hi - b) <= 1e-12) {
            found = &a;
            break;
          }
        }
        if (!found) break;
        lens.push_back(found->length());
        b = accAtLo ? found->hi : found->lo;
      }
      for (std::size_t i = 0; i + 1 < lens.size(); ++i) {
        const double ratio = lens[i] / lens[i + 1];  // closer / farther
        if (ratio < 1.0 - 1e-9)
          lambda = std::max(lambda, ratio);
        else if (i + 2 < lens.size())  // growth may only break at the segment end
          decay = false;
      }
    }
    r.rb.constant = lambda > 0.0 ? lambda : part.tailRatio;
    r.rb.verdict = decay && r.rb.constant < 1.0;
  }

  // aO: connectivity of the image-overlap graph.
  {
    const std::size_t n = map.branches().size();
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      for (std::size_t j = 0; j < n; ++j) {
        if (seen[j]) continue;
        if (map.branch(i).image().overlaps_interior(map.branch(j).image())) {
          seen[j] = 1;
          ++reached;
          q.push(j);
        }
      }
    }
    r.ao = {reached == n, double(reached), ""};
  }
  return r;
}

}  // namespace walklab
