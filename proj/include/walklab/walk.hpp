#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/markov_map.hpp"

namespace walklab {

// Integer drift, constant on each atom of the base partition.  Per-state
// overrides are allowed but every walk shipped here keeps one table (a
// state-preserving conjugacy forces the symbolic drift to match anyway).
struct DriftFunction {
  std::vector<int> values;                  // per-atom
  std::map<int, std::vector<int>> perState; // optional per-state tables
  // truncated table of a drift that is unbounded above (geometric tails with
  // growing jumps); gates condition iv in perturbation schedules
  bool unboundedAbove = false;

  int at(int state, std::size_t atom) const {
    auto it = perState.find(state);
    const auto& v = it == perState.end() ? values : it->second;
    return v.at(atom);
  }

  int lower_bound() const {
    int lb = values.empty() ? 0 : *std::min_element(values.begin(), values.end());
    for (const auto& [s, v] : perState)
      lb = std::min(lb, *std::min_element(v.begin(), v.end()));
    return lb;
  }

  int upper_bound() const {
    int ub = values.empty() ? 0 : *std::max_element(values.begin(), values.end());
    for (const auto& [s, v] : perState)
      ub = std::max(ub, *std::max_element(v.begin(), v.end()));
    return ub;
  }
};

struct WalkPoint {
  double x = 0.0;
  int n = 0;
};

// Deterministic random walk F(x,n) = (f_n(x), n + psi(x,n)) on I x Z.
// Homogeneous walks store one base map; perturbed walks add per-state maps
// inside [windowLo, windowHi] and fall back to the base map elsewhere.
class RandomWalk {
public:
  RandomWalk(MarkovMap base, DriftFunction drift)
      : base_(std::move(base)), drift_(std::move(drift)) {
    if (drift_.values.size() != base_.partition().size())
      throw construction_error("drift table size does not match atom count");
    validate_cross_state();
  }

  RandomWalk(MarkovMap base, DriftFunction drift, int windowLo, std::vector<MarkovMap> overrides)
      : base_(std::move(base)),
        drift_(std::move(drift)),
        windowLo_(windowLo),
        overrides_(std::move(overrides)) {
    if (drift_.values.size() != base_.partition().size())
      throw construction_error("drift table size does not match atom count");
    for (const auto& m : overrides_)
      if (m.partition().size() != base_.partition().size())
        throw construction_error("override map must keep the symbolic structure of the base");
    validate_cross_state();
  }

  bool homogeneous() const { return overrides_.empty(); }
  int window_lo() const { return windowLo_; }
  int window_hi() const { return windowLo_ + int(overrides_.size()) - 1; }

  const MarkovMap& base_map() const { return base_; }
  const DriftFunction& drift() const { return drift_; }

  const MarkovMap& map_at(int state) const {
    if (!overrides_.empty() && state >= windowLo_ && state <= window_hi())
      return overrides_[std::size_t(state - windowLo_)];
    return base_;
  }

  int drift_at(int state, std::size_t atom) const { return drift_.at(state, atom); }

  WalkPoint step(const WalkPoint& p) const {
    const MapEval e = map_at(p.n).eval(p.x);
    return {e.y, p.n + drift_at(p.n, e.branch)};
  }

  // Identical symbolic transition structure: same atom count and the same
  // admissibility relation (needed before any conjugacy talk makes sense).
  bool same_symbolic_structure(const RandomWalk& other) const {
    if (base_.partition().size() != other.base_.partition().size()) return false;
    if (drift_.values != other.drift_.values) return false;
    auto statesToCheck = [](const RandomWalk& w) {
      std::vector<int> s{0};
      for (int n = w.windowLo_ - 1; n <= w.window_hi() + 1; ++n) s.push_back(n);
      return s;
    };
    auto states = statesToCheck(*this);
    auto o = statesToCheck(other);
    states.insert(states.end(), o.begin(), o.end());
    for (int n : states) {
      const auto& pa = map_at(n);
      const auto& pb = other.map_at(n);
      for (std::size_t j = 0; j < pa.branches().size(); ++j) {
        const int dest = drift_at(n, j) + n;
        const auto& ta = map_at(dest).partition();
        const auto& tb = other.map_at(dest).partition();
        for (std::size_t k = 0; k < ta.size(); ++k) {
          const bool ca = pa.branch(j).image().covers(ta.atoms[k], 1e-9);
          const bool cb = pb.branch(j).image().covers(tb.atoms[k], 1e-9);
          if (ca != cb) return false;
        }
      }
    }
    return true;
  }

private:
  // Markov across states: every branch image decomposes into atoms of the
  // destination state's partition.
  void validate_cross_state() const {
    const int spread = std::max(std::abs(drift_.lower_bound()), std::abs(drift_.upper_bound()));
    const int lo = windowLo_ - spread - 1;
    const int hi = window_hi() + spread + 1;
    for (int n = lo; n <= std::max(hi, lo); ++n) {
      const MarkovMap& m = map_at(n);
      for (std::size_t j = 0; j < m.branches().size(); ++j) {
        const int dest = n + drift_at(n, j);
        if (!image_is_atom_union(m.branch(j).image(), map_at(dest).partition()))
          throw construction_error("walk not Markov across states: state " + std::to_string(n) +
                                   " atom " + std::to_string(j));
      }
    }
  }

  MarkovMap base_;
  DriftFunction drift_;
  int windowLo_ = 0;
  std::vector<MarkovMap> overrides_;  // empty => homogeneous
};

inline RandomWalk homogeneous_walk(const std::vector<double>& lengths, std::vector<int> drift) {
  return RandomWalk(full_shift_affine(lengths), DriftFunction{std::move(drift), {}});
}

// --- orbits ------------------------------------------------------------------

struct OrbitStates {
  std::vector<int> states;    // length horizon+1 unless the orbit escaped
  bool tailEscape = false;
  int escapeTime = -1;
};

inline OrbitStates orbit_states(const RandomWalk& walk, WalkPoint p, int horizon) {
  OrbitStates out;
  out.states.reserve(std::size_t(horizon) + 1);
  out.states.push_back(p.n);
  for (int t = 0; t < horizon; ++t) {
    try {
      p = walk.step(p);
    } catch (const tail_error&) {
      out.tailEscape = true;
      out.escapeTime = t;
      return out;
    }
    out.states.push_back(p.n);
  }
  return out;
}

// --- cylinders ---------------------------------------------------------------

// C(j_0,...,j_m): points visiting atom j_i of state s_i at time i; its
// length ell(C) is m = path.size()-1.
struct Cylinder {
  std::vector<int> path;       // atom indices, times 0..m
  std::vector<int> statePath;  // states, times 0..m
  Interval interval{0.0, 1.0};

  std::size_t length() const { return path.empty() ? 0 : path.size() - 1; }
};

struct CylinderFamily {
  std::vector<Cylinder> cylinders;
  int sourceDepth = 0;         // symbols per path; -1 when mixed
  double omittedLength = 0.0;  // truncated-tail mass plus cap remainder bound
  bool capExceeded = false;

  double total_length() const {
    double s = 0.0;
    for (const auto& c : cylinders) s += c.interval.length();
    return s;
  }
};

namespace detail {

inline void check_admissible(const RandomWalk& walk, int state, int atomFrom, int atomTo) {
  const auto& branch = walk.map_at(state).branch(std::size_t(atomFrom));
  const int dest = state + walk.drift_at(state, std::size_t(atomFrom));
  const auto& atom = walk.map_at(dest).partition().atoms.at(std::size_t(atomTo));
  if (!branch.image().covers(atom, 1e-9))
    throw admissibility_error("path not admissible: state " + std::to_string(state) + " atom " +
                              std::to_string(atomFrom) + " does not cover next atom " +
                              std::to_string(atomTo));
}

}  // namespace detail

inline Cylinder cylinder(const RandomWalk& walk, int startState, std::span<const int> path) {
  if (path.empty()) throw admissibility_error("empty symbolic path");
  Cylinder c;
  c.path.assign(path.begin(), path.end());
  c.statePath.resize(path.size());
  c.statePath[0] = startState;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    detail::check_admissible(walk, c.statePath[i], path[i], path[i + 1]);
    c.statePath[i + 1] = c.statePath[i] + walk.drift_at(c.statePath[i], std::size_t(path[i]));
  }
  const auto& lastPart = walk.map_at(c.statePath.back()).partition();
  Interval iv = lastPart.atoms.at(std::size_t(path.back()));
  try {
    for (std::size_t i = path.size() - 1; i-- > 0;)
      iv = walk.map_at(c.statePath[i]).branch(std::size_t(path[i])).pull_back(iv);
  } catch (const construction_error&) {
    throw numeric_error("cylinder collapses below floating-point resolution");
  }
  c.interval = iv;
  return c;
}

// All admissible cylinders with `depth` symbols from startState, in
// lexicographic path order.  `prune` can cut subtrees (return false to skip);
// used by the survivor-set enumerations.
template <typename Prune>
inline CylinderFamily refine_partition_pruned(const RandomWalk& walk, int startState, int depth,
                                              std::size_t cap, Prune prune) {
  if (depth < 1) throw construction_error("refinement depth must be >= 1");
  CylinderFamily fam;
  fam.sourceDepth = depth;

  std::vector<int> path;
  std::vector<int> states{startState};
  double tailOmitted = 0.0;

  // pull a deep interval back through the current prefix
  auto pullBack = [&](Interval iv, std::size_t uptoSymbols) {
    for (std::size_t i = uptoSymbols; i-- > 0;)
      iv = walk.map_at(states[i]).branch(std::size_t(path[i])).pull_back(iv);
    return iv;
  };

  struct Frame {
    int atom = 0;
    bool entered = false;
  };

  std::function<bool(int)> dfs = [&](int level) -> bool {
    const int state = states.back();
    const auto& m = walk.map_at(state);
    const std::size_t nAtoms = m.partition().size();
    for (std::size_t j = 0; j < nAtoms; ++j) {
      if (!path.empty()) {
        const auto& prevBranch = walk.map_at(states[states.size() - 2])
                                     .branch(std::size_t(path.back()));
        if (!prevBranch.image().covers(m.partition().atoms[j], 1e-9)) continue;
      }
      path.push_back(int(j));
      const int nextState = state + walk.drift_at(state, j);
      states.push_back(nextState);
      const bool keep = prune(std::span<const int>(states.data(), states.size()));
      if (keep) {
        if (level + 1 == depth) {
          if (fam.cylinders.size() >= cap) {
            fam.capExceeded = true;
            path.pop_back();
            states.pop_back();
            return false;
          }
          try {
            fam.cylinders.push_back(cylinder(walk, startState, path));
          } catch (const numeric_error&) {
            // below double resolution; its mass is unrepresentable anyway
          }
        } else {
          // account for mass escaping into truncated tails at this step
          const auto& br = m.branch(j);
          for (const auto& t : walk.map_at(nextState).partition().tailGaps) {
            if (br.image().covers(t.gap, 1e-9)) {
              try {
                Interval stubUp = br.pull_back(t.gap);
                tailOmitted += pullBack(stubUp, path.size() - 1).length();
              } catch (const construction_error&) {
                // stub thinner than double resolution, mass ~ 0
              }
            }
          }
          if (!dfs(level + 1)) {
            path.pop_back();
            states.pop_back();
            return false;
          }
        }
      }
      path.pop_back();
      states.pop_back();
    }
    return true;
  };

  dfs(0);
  fam.omittedLength = tailOmitted;
  if (fam.capExceeded) {
    const double startLen =
        walk.map_at(startState).partition().stateInterval.length();
    fam.omittedLength = std::max(tailOmitted, startLen - fam.total_length());
  }
  return fam;
}

inline CylinderFamily refine_partition(const RandomWalk& walk, int startState, int depth,
                                       std::size_t cap = 1u << 22) {
  return refine_partition_pruned(walk, startState, depth, cap,
                                 [](std::span<const int>) { return true; });
}

// --- dist_n ------------------------------------------------------------------

// sup over the cylinder of |log DG^m(h(x)) / DF^m(x)| for symbolically
// identical walks; h is the cylinder-matching conjugacy.  Exact for all-affine
// pairs (a finite sum of log-slope differences), refined-midpoint sup
// otherwise.
inline double dist_n(const RandomWalk& walkF, const RandomWalk& walkG, const Cylinder& cyl,
                     int extraDepth = 4) {
  if (!walkF.same_symbolic_structure(walkG))
    throw admissibility_error("dist_n: walks are not symbolically identical");
  const std::size_t m = cyl.length();
  if (m == 0) return 0.0;

  bool affine = true;
  for (std::size_t i = 0; i < m; ++i) {
    affine = affine &&
             walkF.map_at(cyl.statePath[i]).branch(std::size_t(cyl.path[i])).kind() ==
                 BranchKind::Affine &&
             walkG.map_at(cyl.statePath[i]).branch(std::size_t(cyl.path[i])).kind() ==
                 BranchKind::Affine;
  }
  if (affine) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double aF =
          walkF.map_at(cyl.statePath[i]).branch(std::size_t(cyl.path[i])).affine_slope();
      const double aG =
          walkG.map_at(cyl.statePath[i]).branch(std::size_t(cyl.path[i])).affine_slope();
      s += std::log(std::abs(aG)) - std::log(std::abs(aF));
    }
    return std::abs(s);
  }

  // refine the cylinder a few more levels and compare midpoint derivative
  // products along matched sub-cylinders
  double sup = 0.0;
  std::vector<int> path(cyl.path.begin(), cyl.path.end());
  std::vector<int> states(cyl.statePath.begin(), cyl.statePath.end());
  std::function<void(int)> extend = [&](int remaining) {
    if (remaining == 0) {
      const Cylinder fc = cylinder(walkF, states[0], path);
      const Cylinder gc = cylinder(walkG, states[0], path);
      double xf = fc.interval.mid(), xg = gc.interval.mid();
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const MapEval ef = walkF.map_at(fc.statePath[i]).eval(xf);
        const MapEval eg = walkG.map_at(gc.statePath[i]).eval(xg);
        s += std::log(std::abs(eg.dy)) - std::log(std::abs(ef.dy));
        xf = ef.y;
        xg = eg.y;
      }
      sup = std::max(sup, std::abs(s));
      return;
    }
    const int prevState = states.back();
    const int prevAtom = path.back();
    const int dest = prevState + walkF.drift_at(prevState, std::size_t(prevAtom));
    const auto& img = walkF.map_at(prevState).branch(std::size_t(prevAtom)).image();
    const auto& destPart = walkF.map_at(dest).partition();
    for (std::size_t j = 0; j < destPart.size(); ++j) {
      if (!img.covers(destPart.atoms[j], 1e-9)) continue;
      path.push_back(int(j));
      states.push_back(dest);
      extend(remaining - 1);
      path.pop_back();
      states.pop_back();
    }
  };
  extend(extraDepth);
  return sup;
}

// --- good drift --------------------------------------------------------------

struct GoodDriftFit {
  bool ok = false;
  bool degenerate = false;  // bounded drift with too few tail points; gamma=0 convention
  double C = 0.0;
  double gamma = 0.0;
  double maxResidual = 0.0;
  std::vector<double> tailMeasure;  // tailMeasure[k-1] = m(psi >= k)
};

// m(psi >= k) per state as a sum of atom lengths, aggregated as the max over
// represented states; least-squares geometric fit in log scale.
inline GoodDriftFit check_good_drift(const RandomWalk& walk) {
  GoodDriftFit fit;
  const int kMax = walk.drift().upper_bound();
  if (kMax < 1) {
    fit.ok = true;
    fit.degenerate = true;
    return fit;
  }
  std::vector<int> states{0};
  for (int n = walk.window_lo(); n <= walk.window_hi(); ++n) states.push_back(n);
  for (int k = 1; k <= kMax; ++k) {
    double worst = 0.0;
    for (int n : states) {
      const auto& part = walk.map_at(n).partition();
      double s = 0.0;
      for (std::size_t j = 0; j < part.size(); ++j)
        if (walk.drift_at(n, j) >= k) s += part.atoms[j].length();
      worst = std::max(worst, s);
    }
    fit.tailMeasure.push_back(worst);
  }
  std::vector<double> ks, logs;
  for (int k = 1; k <= kMax; ++k) {
    if (fit.tailMeasure[std::size_t(k - 1)] > 0.0) {
      ks.push_back(double(k));
      logs.push_back(std::log(fit.tailMeasure[std::size_t(k - 1)]));
    }
  }
  if (ks.size() <= 3) {
    fit.degenerate = true;
    fit.ok = true;
    fit.gamma = 0.0;
    fit.C = fit.tailMeasure.empty() ? 0.0 : fit.tailMeasure[0];
    return fit;
  }
  const LinearFit lf = fit_line(ks, logs);
  fit.gamma = std::exp(lf.slope);
  fit.C = std::exp(lf.intercept);
  fit.maxResidual = lf.maxResidual;
  fit.ok = fit.gamma < 1.0 - 1e-9 && lf.maxResidual <= 0.2;
  return fit;
}

}  // namespace walklab
