#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/dimension.hpp"
#include "walklab/rng.hpp"
#include "walklab/simulate.hpp"
#include "walklab/spectral.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// Construction data for an asymptotically small perturbation: per-state edit
// magnitudes decay like C * lambda^|n| inside the window, states outside keep
// the base map exactly.
struct PerturbationSchedule {
  double C = 0.1;
  double lambda = 0.5;
  int windowLo = -8;
  int windowHi = 8;
  bool endpointShifts = true;        // move interior atom boundaries
  bool branchBumps = false;          // PerturbedAffine branch edits
  bool negativeStatesFrozen = false; // keep F = G on states < 0
  // unit edit = editScale * (smaller adjacent atom length); keeps the edits
  // well inside monotonicity/expansion margins while preserving the
  // geometric decay in |n|
  double editScale = 0.25;
  double bumpScale = 0.25;
};

namespace detail {

inline MarkovMap perturbed_state_map(const RandomWalk& base, const PerturbationSchedule& sched,
                                     int state, const MarkovPartition& myPart,
                                     const std::vector<MarkovPartition>& windowParts,
                                     int windowLo, std::uint64_t seed) {
  const MarkovMap& bm = base.base_map();
  auto destPart = [&](int dest) -> const MarkovPartition& {
    if (dest >= windowLo && dest < windowLo + int(windowParts.size()))
      return windowParts[std::size_t(dest - windowLo)];
    return bm.partition();
  };

  std::vector<Branch> branches;
  CounterRng rng(seed, 0x6261736ull ^ std::uint64_t(std::uint32_t(state * 2654435761u)));
  for (std::size_t j = 0; j < bm.branches().size(); ++j) {
    const Branch& bb = bm.branch(j);
    const int dest = state + base.drift_at(state, j);
    const MarkovPartition& dp = destPart(dest);
    // symbolic image: contiguous atom range covered by the base branch
    const MarkovPartition& baseDp = bm.partition();
    int kLo = -1, kHi = -1;
    for (std::size_t k = 0; k < baseDp.size(); ++k) {
      if (bb.image().covers(baseDp.atoms[k], 1e-9)) {
        if (kLo < 0) kLo = int(k);
        kHi = int(k);
      }
    }
    if (kLo < 0)
      throw construction_error("perturb: base branch image covers no atom");
    Interval image(dp.atoms[std::size_t(kLo)].lo, dp.atoms[std::size_t(kHi)].hi);
    const Interval& domain = myPart.atoms[j];
    double eps = 0.0;
    if (sched.branchBumps) {
      const double a = image.length() / domain.length();
      const double unit = sched.C * std::pow(sched.lambda, std::abs(double(state)));
      eps = unit * sched.bumpScale * a * domain.length() / bump::sup_d1(BumpShape::Quartic) *
            (rng.next_bit() ? 1.0 : -1.0);
    }
    try {
      branches.push_back(eps == 0.0
                             ? Branch::affine(domain, image, bb.orientation())
                             : Branch::perturbed_affine(domain, image, eps, BumpShape::Quartic,
                                                        bb.orientation()));
    } catch (const construction_error& e) {
      throw construction_error("perturb: state " + std::to_string(state) + " atom " +
                               std::to_string(j) + ": " + e.what());
    }
  }
  return MarkovMap(myPart, std::move(branches));
}

}  // namespace detail

// Build an asymptotically small perturbation of a homogeneous walk: inside
// the window, interior atom boundaries shift and/or branches pick up a C^2
// bump, all with magnitude C * lambda^|n|; outside the window the base map is
// reused exactly.
inline RandomWalk perturb(const RandomWalk& base, const PerturbationSchedule& sched,
                          std::uint64_t seed) {
  if (!base.homogeneous())
    throw construction_error("perturb expects a homogeneous base walk");
  {
    const PropertyReport rep = check_properties(base.base_map());
    if (!(rep.li.verdict && rep.ex.verdict && rep.ra.verdict && rep.rb.verdict))
      throw construction_error("perturb: base walk fails LI+Ex+Ra+Rb");
  }
  if (!(sched.C >= 0.0 && sched.lambda > 0.0 && sched.lambda < 1.0))
    throw construction_error("perturb: schedule requires C >= 0, lambda in (0,1)");
  if (base.drift().unboundedAbove && !sched.negativeStatesFrozen)
    throw construction_error(
        "perturb: drift unbounded above requires negativeStatesFrozen (condition iv)");
  int lo = sched.windowLo, hi = sched.windowHi;
  if (sched.negativeStatesFrozen) lo = std::max(lo, 0);
  if (lo > hi) throw construction_error("perturb: empty window");
  if (sched.endpointShifts && !base.base_map().partition().tailGaps.empty())
    throw construction_error(
        "perturb: endpoint shifts on truncated infinite partitions are not supported; "
        "use branch bumps");

  const MarkovPartition& bp = base.base_map().partition();

  // pass 1: shifted partitions per window state
  std::vector<MarkovPartition> parts;
  for (int n = lo; n <= hi; ++n) {
    if (!sched.endpointShifts) {
      parts.push_back(bp);
      continue;
    }
    CounterRng rng(seed, 0x70617274ull ^ std::uint64_t(std::uint32_t((n + 1024) * 40503u)));
    const double unit = sched.C * std::pow(sched.lambda, std::abs(double(n)));
    std::vector<Interval> atoms;
    std::vector<double> bounds;
    bounds.push_back(bp.atoms.front().lo);
    for (std::size_t j = 0; j + 1 < bp.size(); ++j) {
      const double minAdj = std::min(bp.atoms[j].length(), bp.atoms[j + 1].length());
      // fixed geometric magnitude, random sign: keeps the per-state envelope
      // log-linear in |n| for the asymp fit
      double shift = unit * sched.editScale * minAdj * (rng.next_bit() ? 1.0 : -1.0);
      shift = std::clamp(shift, -unit, unit);  // condition-iii magnitude cap
      bounds.push_back(bp.atoms[j].hi + shift);
    }
    bounds.push_back(bp.atoms.back().hi);
    for (std::size_t j = 0; j + 1 < bounds.size(); ++j)
      atoms.emplace_back(bounds[j], bounds[j + 1]);
    PartitionSpec spec = explicit_partition(atoms);
    spec.stateInterval = bp.stateInterval;
    parts.push_back(build_partition(spec));
  }

  // pass 2: branches against the shifted destination partitions
  std::vector<MarkovMap> overrides;
  for (int n = lo; n <= hi; ++n)
    overrides.push_back(detail::perturbed_state_map(base, sched, n,
                                                    parts[std::size_t(n - lo)], parts, lo, seed));
  return RandomWalk(base.base_map(), base.drift(), lo, std::move(overrides));
}

// --- conjugacy ---------------------------------------------------------------

// State-preserving cylinder-matching conjugacy between symbolically identical
// walks, evaluated lazily: nest matched cylinders around the point until the
// target cylinder is shorter than the tolerance, then interpolate.
class ConjugacyHandle {
public:
  ConjugacyHandle(const RandomWalk& from, const RandomWalk& to, double tol = 1e-10,
                  int maxDepth = 300)
      : from_(&from), to_(&to), tol_(tol), maxDepth_(maxDepth) {
    if (!from.same_symbolic_structure(to))
      throw admissibility_error("conjugacy undefined: different symbolic type");
  }

  const RandomWalk& from() const { return *from_; }
  const RandomWalk& to() const { return *to_; }
  double tolerance() const { return tol_; }

  WalkPoint eval(WalkPoint p, double tol) const {
    if (tol <= 0.0) throw construction_error("conjugacy_eval requires tol > 0");
    // atom boundaries match symbolically: depth-1 cylinder endpoints map to
    // endpoints, no nesting needed
    {
      const auto& fp = from_->map_at(p.n).partition();
      const auto& tp = to_->map_at(p.n).partition();
      for (std::size_t j = 0; j < fp.size(); ++j) {
        if (std::abs(p.x - fp.atoms[j].lo) < 1e-13) return {tp.atoms[j].lo, p.n};
        if (std::abs(p.x - fp.atoms[j].hi) < 1e-13) return {tp.atoms[j].hi, p.n};
      }
    }
    std::vector<int> path;
    WalkPoint q = p;
    Interval fromCyl = from_->map_at(p.n).partition().stateInterval;
    Interval toCyl = to_->map_at(p.n).partition().stateInterval;
    for (int d = 0; d < maxDepth_ && toCyl.length() > tol; ++d) {
      const MapEval e = from_->map_at(q.n).eval(q.x);
      path.push_back(int(e.branch));
      const Cylinder fc = cylinder(*from_, p.n, path);
      const Cylinder tc = cylinder(*to_, p.n, path);
      fromCyl = fc.interval;
      toCyl = tc.interval;
      q = {e.y, q.n + from_->drift_at(q.n, e.branch)};
    }
    const double rel = (p.x - fromCyl.lo) / fromCyl.length();
    return {toCyl.lo + rel * toCyl.length(), p.n};
  }

  WalkPoint operator()(WalkPoint p) const { return eval(p, tol_); }

private:
  const RandomWalk* from_;
  const RandomWalk* to_;
  double tol_;
  int maxDepth_;
};

inline WalkPoint conjugacy_eval(const ConjugacyHandle& h, WalkPoint p, double tol) {
  return h.eval(p, tol);
}

// --- classification ------------------------------------------------------------

enum class Verdict { transientPlus, transientMinus, recurrent, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::transientPlus: return "transientPlus";
    case Verdict::transientMinus: return "transientMinus";
    case Verdict::recurrent: return "recurrent";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ClassifyThresholds {
  double transientT = 0.0;   // 0 => horizon/10 drift units
  int burnIn = 0;            // 0 => horizon/10
  int recurrentReturns = 10;
  double supermajority = 0.90;
};

struct ClassificationResult {
  Verdict verdict = Verdict::inconclusive;
  double fracPlus = 0.0;
  double fracMinus = 0.0;
  double fracRecurrent = 0.0;
  double fracOther = 0.0;
  int ensemble = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  std::optional<double> strongTransienceMargin;
  long boundaryNudges = 0;
};

// Ensemble verdict: per-orbit labels (recurrent by return count, transient by
// terminal displacement plus a post-burn-in floor), supermajority vote.
// Deterministic given the seed and independent of the thread count.
inline ClassificationResult classify(const RandomWalk& walk, int ensemble, int horizon,
                                     std::uint64_t seed, ClassifyThresholds th = {},
                                     int threads = 0, int startState = 0,
                                     int marginDepth = 8) {
  if (ensemble < 1 || horizon < 1)
    throw construction_error("classify requires ensemble, horizon >= 1");
  const double T = th.transientT > 0.0 ? th.transientT : double(horizon) / 10.0;
  const int burn = th.burnIn > 0 ? th.burnIn : horizon / 10;

  enum Label { kPlus = 0, kMinus, kRecurrent, kOther };
  std::vector<unsigned char> labels(std::size_t(ensemble), kOther);
  std::vector<long> nudges(std::size_t(std::max(threads, 1)), 0);

  auto runRange = [&](int lo, int hi, std::size_t slot) {
    for (int o = lo; o < hi; ++o) {
      OrbitSimulator sim(walk, CounterRng(seed, std::uint64_t(o)));
      WalkPoint p = sim.start_uniform(startState);
      int returns = 0;
      int minAfterBurn = p.n, maxAfterBurn = p.n;
      bool anyAfterBurn = false;
      for (int t = 1; t <= horizon; ++t) {
        p = sim.step(p);
        if (p.n == startState) ++returns;
        if (t >= burn) {
          if (!anyAfterBurn) {
            minAfterBurn = maxAfterBurn = p.n;
            anyAfterBurn = true;
          } else {
            minAfterBurn = std::min(minAfterBurn, p.n);
            maxAfterBurn = std::max(maxAfterBurn, p.n);
          }
        }
      }
      Label l = kOther;
      if (double(p.n - startState) >= T && minAfterBurn >= startState)
        l = kPlus;
      else if (double(startState - p.n) >= T && maxAfterBurn <= startState)
        l = kMinus;
      else if (returns >= th.recurrentReturns)
        l = kRecurrent;
      labels[std::size_t(o)] = (unsigned char)l;
      nudges[slot] += sim.boundary_nudges();
    }
  };

  const int nThreads = threads > 0 ? threads : int(std::thread::hardware_concurrency());
  if (nThreads > 1 && ensemble > 64) {
    std::vector<std::thread> pool;
    nudges.assign(std::size_t(nThreads), 0);
    const int chunk = (ensemble + nThreads - 1) / nThreads;
    for (int t = 0; t < nThreads; ++t) {
      const int lo = t * chunk, hi = std::min(ensemble, (t + 1) * chunk);
      if (lo >= hi) break;
      pool.emplace_back(runRange, lo, hi, std::size_t(t));
    }
    for (auto& th2 : pool) th2.join();
  } else {
    runRange(0, ensemble, 0);
  }

  ClassificationResult r;
  r.ensemble = ensemble;
  r.horizon = horizon;
  r.seed = seed;
  long counts[4] = {0, 0, 0, 0};
  for (unsigned char l : labels) ++counts[l];
  for (long n : nudges) r.boundaryNudges += n;
  r.fracPlus = double(counts[kPlus]) / double(ensemble);
  r.fracMinus = double(counts[kMinus]) / double(ensemble);
  r.fracRecurrent = double(counts[kRecurrent]) / double(ensemble);
  r.fracOther = double(counts[kOther]) / double(ensemble);
  if (r.fracPlus >= th.supermajority)
    r.verdict = Verdict::transientPlus;
  else if (r.fracMinus >= th.supermajority)
    r.verdict = Verdict::transientMinus;
  else if (r.fracRecurrent >= th.supermajority)
    r.verdict = Verdict::recurrent;

  const MarginResult m = strong_transience_margin(walk, marginDepth);
  if (m.margin > 0.0) r.strongTransienceMargin = m.margin;
  return r;
}

// --- asymptotic smallness fit ----------------------------------------------------

struct AsympFit {
  double C = 0.0;
  double lambdaHat = 0.0;
  double maxResidual = 0.0;
  bool pass = false;
  bool degenerate = false;  // G == F (all ratios zero); reported as (0,0)
  std::vector<int> states;
  std::vector<double> perStateMax;  // max |log DF(H(p))/DG(p)| per state
};

// Fit of |log DF(H(p)) / DG(p)| <= C lambda^|n| over sampled points, H the
// cylinder-matching conjugacy from G to F.
inline AsympFit asymp_verify(const RandomWalk& F, const RandomWalk& G, int samples,
                             std::uint64_t seed, int stateMargin = 2) {
  if (!F.homogeneous()) throw construction_error("asymp_verify expects homogeneous base F");
  ConjugacyHandle h(G, F, 1e-11);
  AsympFit out;
  const int lo = G.window_lo() - stateMargin;
  const int hi = G.window_hi() + stateMargin;
  for (int n = lo; n <= hi; ++n) {
    CounterRng rng(seed, std::uint64_t(std::uint32_t(n + 4096)));
    double mx = 0.0;
    for (int k = 0; k < samples; ++k) {
      const Interval& s = G.map_at(n).partition().stateInterval;
      WalkPoint p{s.lo + rng.next_double() * s.length(), n};
      try {
        const WalkPoint q = h.eval(p, 1e-11);
        const double df = F.map_at(n).eval(q.x).dy;
        const double dg = G.map_at(n).eval(p.x).dy;
        mx = std::max(mx, std::abs(std::log(std::abs(df) / std::abs(dg))));
      } catch (const boundary_error&) {
        continue;  // measure-zero sample, skip
      }
    }
    out.states.push_back(n);
    out.perStateMax.push_back(mx);
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    if (out.perStateMax[i] > 1e-14) {
      xs.push_back(std::abs(double(out.states[i])));
      ys.push_back(std::log(out.perStateMax[i]));
    }
  }
  if (xs.size() < 2) {
    out.degenerate = true;
    out.pass = true;  // G coincides with F up to numerical zero
    return out;
  }
  const LinearFit lf = fit_line(xs, ys);
  out.lambdaHat = std::exp(lf.slope);
  out.C = std::exp(lf.intercept);
  out.maxResidual = lf.maxResidual;
  out.pass = out.lambdaHat < 1.0;
  return out;
}

// --- mSQS modulus -----------------------------------------------------------------

struct MsqsResult {
  double alpha = 0.0;  // fitted exponent, clamped to (0,1]
  double C = 1.0;      // envelope constant
  int basisDepth = 0;
  double maxResidual = 0.0;
  bool exploratory = false;  // hypotheses (strong transience / M>0 with psi>=0) not met
  std::size_t samplePoints = 0;
  double worstLogRatioForward = 0.0;  // sup of log m(h(B))/|h(J)| - log m(B)/|J|
  double worstLogRatioReverse = 0.0;  // same for h^{-1}
};

// Measure-ratio modulus of the cylinder conjugacy over the stochastic basis:
// J runs over cylinders up to basisDepth, B over dyadic spatial prefixes of
// J's descendants; both directions pooled into one log-log envelope fit.
// Cylinder measures are exact interval lengths on both sides.
inline MsqsResult msqs_test(const RandomWalk& F, const RandomWalk& G, int basisDepth,
                            int subsetGrid, std::uint64_t seed, int startState = 0,
                            std::size_t budget = 4000) {
  if (!F.same_symbolic_structure(G))
    throw admissibility_error("msqs_test: walks are not symbolically identical");
  MsqsResult out;
  out.basisDepth = basisDepth;
  {
    bool hyp = false;
    const MarginResult m = strong_transience_margin(F, 6);
    if (m.margin > 0.0) hyp = true;
    if (!hyp && F.homogeneous()) {
      const MeanDriftResult md = mean_drift(F, 256);
      hyp = md.M > 0.0 && F.drift().lower_bound() >= 0;
    }
    out.exploratory = !hyp;
  }

  CounterRng rng(seed, 0x6d737173ull);
  std::vector<double> xsF, ysF, xsG, ysG;  // forward: x from F, y from G

  const int g = std::max(1, std::min(subsetGrid, 5));
  for (int depth = 1; depth <= basisDepth; ++depth) {
    CylinderFamily fam = refine_partition(F, startState, depth, 1u << 18);
    for (const auto& J : fam.cylinders) {
      if (xsF.size() > budget) break;
      if (rng.next_double() > 2000.0 / double(std::max<std::size_t>(fam.cylinders.size(), 1)))
        continue;
      // descendants g levels below J, spatial order
      std::vector<Cylinder> kids;
      {
        std::vector<int> path(J.path.begin(), J.path.end());
        std::vector<int> states(J.statePath.begin(), J.statePath.end());
        std::function<void(int)> extend = [&](int remaining) {
          if (remaining == 0) {
            try {
              kids.push_back(cylinder(F, startState, path));
            } catch (const numeric_error&) {
            }
            return;
          }
          const int prevState = states.back();
          const int prevAtom = path.back();
          const int dest = prevState + F.drift_at(prevState, std::size_t(prevAtom));
          const auto& img = F.map_at(prevState).branch(std::size_t(prevAtom)).image();
          const auto& destPart = F.map_at(dest).partition();
          for (std::size_t j = 0; j < destPart.size(); ++j) {
            if (!img.covers(destPart.atoms[j], 1e-9)) continue;
            path.push_back(int(j));
            states.push_back(dest);
            extend(remaining - 1);
            path.pop_back();
            states.pop_back();
          }
        };
        extend(g);
      }
      if (kids.size() < 2) continue;
      std::sort(kids.begin(), kids.end(), [](const Cylinder& a, const Cylinder& b) {
        return a.interval.lo < b.interval.lo;
      });
      const Cylinder Jg = cylinder(G, startState, J.path);
      const double lenJF = J.interval.length(), lenJG = Jg.interval.length();
      for (std::size_t take = 1; take <= kids.size(); take = take * 2) {
        double mF = 0.0, mG = 0.0;
        for (std::size_t i = 0; i < take && i < kids.size(); ++i) {
          mF += kids[i].interval.length();
          mG += cylinder(G, startState, kids[i].path).interval.length();
        }
        xsF.push_back(std::log(mF / lenJF));
        ysF.push_back(std::log(mG / lenJG));
        xsG.push_back(std::log(mG / lenJG));
        ysG.push_back(std::log(mF / lenJF));
      }
    }
  }
  out.samplePoints = xsF.size() + xsG.size();
  if (xsF.size() < 2) {
    out.alpha = 1.0;
    out.C = 1.0;
    return out;
  }
  for (std::size_t i = 0; i < xsF.size(); ++i)
    out.worstLogRatioForward = std::max(out.worstLogRatioForward, ysF[i] - xsF[i]);
  for (std::size_t i = 0; i < xsG.size(); ++i)
    out.worstLogRatioReverse = std::max(out.worstLogRatioReverse, ysG[i] - xsG[i]);
  const LinearFit fwd = fit_line(xsF, ysF);
  const LinearFit rev = fit_line(xsG, ysG);
  const double alpha = std::min({fwd.slope, rev.slope, 1.0});
  out.alpha = std::max(alpha, 1e-9);
  double logC = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xsF.size(); ++i)
    logC = std::max(logC, ysF[i] - out.alpha * xsF[i]);
  for (std::size_t i = 0; i < xsG.size(); ++i)
    logC = std::max(logC, ysG[i] - out.alpha * xsG[i]);
  out.C = std::exp(logC);
  out.maxResidual = std::max(fwd.maxResidual, rev.maxResidual);
  return out;
}

}  // namespace walklab
