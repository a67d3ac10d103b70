#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/spectral.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// --- quotient walks -----------------------------------------------------------

// Quotient data of a renormalization fixed point: expanding Markov map q on
// the fundamental domain plus the level-jump drift.
struct QuotientData {
  MarkovMap q;
  std::vector<int> drift;
  double scaleLambda = 0.5;
};

inline RandomWalk homogeneous_from_quotient(const QuotientData& data) {
  RandomWalk walk(data.q, DriftFunction{data.drift, {}});
  const GoodDriftFit gd = check_good_drift(walk);
  if (!gd.ok)
    throw construction_error("quotient drift violates GD: tail is not summable-geometric");
  const PropertyReport rep = check_properties(data.q);
  if (!(rep.mk.verdict && rep.li.verdict && rep.ex.verdict))
    throw construction_error("quotient map fails Mk+LI+Ex");
  return walk;
}

// Homogeneous model of a Fibonacci-type quotient: full-shift affine branches
// with the level-jump drift table.  The shipped defaults are an illustrative
// model, not the genuine fixed point (computing that is its own project).
inline RandomWalk fibonacci_model(double scaleLambda,
                                  const std::vector<std::pair<double, int>>& branchSpec) {
  if (!(scaleLambda > 0.0 && scaleLambda < 1.0))
    throw construction_error("fibonacci_model: scale must be in (0,1)");
  if (branchSpec.size() < 2) throw construction_error("fibonacci_model: need >= 2 branches");
  std::vector<double> lengths;
  std::vector<int> drift;
  for (const auto& [len, d] : branchSpec) {
    lengths.push_back(len);
    drift.push_back(d);
  }
  QuotientData data{full_shift_affine(lengths), drift, scaleLambda};
  return homogeneous_from_quotient(data);
}

inline std::vector<std::pair<double, int>> default_fibonacci_spec(double scaleLambda) {
  // two-branch model with level jumps +1 / -2 (the S_{k+1}/S_{k+2} return
  // structure); mean drift 1 - 3*lambda changes sign at lambda = 1/3
  return {{1.0 - scaleLambda, +1}, {scaleLambda, -2}};
}

// --- wild attractor criterion ----------------------------------------------------

enum class WildAttractorVerdict {
  dimensionDeficit,             // M < 0
  nullFullDimension,            // M = 0
  positiveMeasureWildAttractor, // M > 0
  withheld                      // |M| within 3 error bars of zero
};

inline const char* to_string(WildAttractorVerdict v) {
  switch (v) {
    case WildAttractorVerdict::dimensionDeficit: return "dimensionDeficit";
    case WildAttractorVerdict::nullFullDimension: return "nullFullDimension";
    case WildAttractorVerdict::positiveMeasureWildAttractor:
      return "positiveMeasureWildAttractor";
    case WildAttractorVerdict::withheld: return "withheld";
  }
  return "?";
}

struct WildAttractorResult {
  WildAttractorVerdict verdict = WildAttractorVerdict::withheld;
  double M = 0.0;
  double errorBar = 0.0;
};

inline WildAttractorResult wild_attractor_criterion(const RandomWalk& walk, int bins = 1024) {
  const MeanDriftResult md = mean_drift(walk, bins);
  WildAttractorResult r;
  r.M = md.M;
  r.errorBar = md.errorEstimate;
  const double zeroTol = 1e-9;
  if (std::abs(md.M) <= zeroTol && md.errorEstimate <= zeroTol)
    r.verdict = WildAttractorVerdict::nullFullDimension;
  else if (std::abs(md.M) > 3.0 * md.errorEstimate && std::abs(md.M) > zeroTol)
    r.verdict = md.M > 0.0 ? WildAttractorVerdict::positiveMeasureWildAttractor
                           : WildAttractorVerdict::dimensionDeficit;
  else
    r.verdict = WildAttractorVerdict::withheld;
  return r;
}

// --- Feigenbaum induced-map builder ----------------------------------------------

namespace quad {

// x -> x^2 + c iterated n times; optionally tracks the largest intermediate
// derivative product magnitude.
inline double iterate(double c, double x, long n, double* maxDeriv = nullptr) {
  double d = 1.0, mx = 1.0;
  for (long i = 0; i < n; ++i) {
    d *= 2.0 * x;
    mx = std::max(mx, std::abs(d));
    x = x * x + c;
  }
  if (maxDeriv) *maxDeriv = mx;
  return x;
}

inline double deriv(double c, double x, long n) {
  double d = 1.0;
  for (long i = 0; i < n; ++i) {
    d *= 2.0 * x;
    x = x * x + c;
  }
  return d;
}

}  // namespace quad

struct FeigenbaumAccumulation {
  double cInf = 0.0;
  double uncertainty = 0.0;
  std::vector<double> superstable;  // c_k with f_c^{2^k}(0) = 0
  std::vector<double> feigenbaumDeltaEstimates;
};

// Superstable parameters of periods 2^k by bisection, then Aitken
// extrapolation to the period-doubling accumulation.
inline FeigenbaumAccumulation locate_feigenbaum_accumulation(int maxK = 14) {
  FeigenbaumAccumulation acc;
  acc.superstable.push_back(0.0);  // period 1: f_0(0) = 0
  double delta = 4.669;
  for (int k = 1; k <= maxK; ++k) {
    const long n = 1L << k;
    double lo, hi;
    if (k == 1) {
      lo = -1.2;
      hi = -0.8;
    } else {
      const double step = (acc.superstable[std::size_t(k - 1)] -
                           acc.superstable[std::size_t(k - 2)]) / delta;
      const double guess = acc.superstable.back() + step;
      double w = std::abs(step) * 0.8;
      lo = guess - w;
      hi = guess + w;
      // widen until a sign change appears
      for (int tries = 0; tries < 12; ++tries) {
        if (quad::iterate(lo, 0.0, n) * quad::iterate(hi, 0.0, n) <= 0.0) break;
        w *= 1.6;
        lo = guess - w;
        hi = guess + w;
      }
    }
    double glo = quad::iterate(lo, 0.0, n);
    if (glo * quad::iterate(hi, 0.0, n) > 0.0)
      throw numeric_error("superstable bracketing failed at period 2^" + std::to_string(k));
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double gm = quad::iterate(mid, 0.0, n);
      if (glo * gm <= 0.0) {
        hi = mid;
      } else {
        lo = mid;
        glo = gm;
      }
    }
    acc.superstable.push_back(0.5 * (lo + hi));
    if (k >= 2) {
      const auto& cs = acc.superstable;
      delta = (cs[cs.size() - 2] - cs[cs.size() - 3]) / (cs.back() - cs[cs.size() - 2]);
      acc.feigenbaumDeltaEstimates.push_back(delta);
    }
  }
  // Aitken on the last few triples
  auto aitken = [](double a, double b, double c) { return c - (c - b) * (c - b) / ((c - b) - (b - a)); };
  std::vector<double> extr;
  for (std::size_t i = 0; i + 2 < acc.superstable.size(); ++i)
    extr.push_back(aitken(acc.superstable[i], acc.superstable[i + 1], acc.superstable[i + 2]));
  acc.cInf = extr.back();
  acc.uncertainty = std::abs(extr.back() - extr[extr.size() - 2]);
  return acc;
}

struct FeigenbaumBranch {
  Interval piece;
  int returnMultiples = -1;  // n(x): I_k is covered by f^{n(x) * 2^(k-1)}(piece)
};

struct FeigenbaumLevel {
  int k = 0;
  double p = 0.0;            // orientation-reversing fixed point of f^{2^k}
  Interval interval{0.0, 1.0};  // I_k = [-|p|, |p|]
  double boundaryResidual = 0.0;
  double multiplier = 0.0;   // (f^{2^k})'(p)
  std::vector<FeigenbaumBranch> branches;  // pieces of I_{k-1} \ I_k (desk levels only)
};

struct InducedMapReport {
  double parameter = 0.0;
  std::vector<FeigenbaumLevel> levels;
  std::vector<double> rescalingRatios;      // |I_{k+1}| / |I_k|
  std::vector<double> ratioDiffs;
  double ratioDiffDecayRate = 0.0;          // fitted; < 1 when converging
  std::vector<double> rescaledSupDiffs;     // sup |g_{k+1} - g_k| on a grid
  double rescaledSupDecayRate = 0.0;
  bool truncated = false;
  std::string truncationReason;
};

// Renormalization levels of x -> x^2 + c: p_k is the orientation-reversing
// fixed point of the 2^k-th iterate (sign alternates with k), I_k the
// symmetric interval it bounds.  Stops when bracketing fails or the iterate's
// intermediate derivative exceeds 1e12.
inline InducedMapReport feigenbaum_induced(double c, int maxLevel, double rootTol,
                                           int branchLevels = 4) {
  InducedMapReport rep;
  rep.parameter = c;
  if (!(c < -0.75))
    throw construction_error("feigenbaum_induced: need c < -3/4 (first period doubling)");

  // level 0: orientation-reversing fixed point of f itself
  {
    FeigenbaumLevel l0;
    l0.k = 0;
    l0.p = (1.0 - std::sqrt(1.0 - 4.0 * c)) / 2.0;
    l0.multiplier = 2.0 * l0.p;
    l0.boundaryResidual = 0.0;
    l0.interval = Interval(-std::abs(l0.p), std::abs(l0.p));
    if (l0.multiplier >= -1.0)
      throw construction_error("feigenbaum_induced: fixed point not repelling");
    rep.levels.push_back(l0);
  }

  for (int k = 1; k <= maxLevel; ++k) {
    const long n = 1L << k;
    const double prevMag = std::abs(rep.levels.back().p);
    const double side = (k % 2 == 1) ? +1.0 : -1.0;
    const int grid = 600;
    const double loMag = 0.10 * prevMag, hiMag = 0.97 * prevMag;
    double rootA = 0.0, rootB = 0.0;
    bool found = false;
    double prevX = side * loMag;
    double prevG = quad::iterate(c, prevX, n) - prevX;
    for (int i = 1; i <= grid && !found; ++i) {
      const double mag = loMag + (hiMag - loMag) * double(i) / double(grid);
      const double x = side * mag;
      const double g = quad::iterate(c, x, n) - x;
      if (prevG * g <= 0.0) {
        // bisect, then keep only orientation-reversing roots
        double a = prevX, b = x, ga = prevG;
        for (int it = 0; it < 200 && std::abs(b - a) > 1e-16; ++it) {
          const double m = 0.5 * (a + b);
          const double gm = quad::iterate(c, m, n) - m;
          if (ga * gm <= 0.0) {
            b = m;
          } else {
            a = m;
            ga = gm;
          }
        }
        const double root = 0.5 * (a + b);
        if (quad::deriv(c, root, n) < 0.0) {
          rootA = a;
          rootB = b;
          found = true;
        }
      }
      prevX = x;
      prevG = g;
    }
    if (!found) {
      rep.truncated = true;
      rep.truncationReason = "renormalization depth exhausted at level " + std::to_string(k);
      break;
    }
    FeigenbaumLevel lvl;
    lvl.k = k;
    lvl.p = 0.5 * (rootA + rootB);
    double maxDeriv = 0.0;
    const double img = quad::iterate(c, lvl.p, n, &maxDeriv);
    lvl.boundaryResidual = std::abs(img - lvl.p);
    lvl.multiplier = quad::deriv(c, lvl.p, n);
    lvl.interval = Interval(-std::abs(lvl.p), std::abs(lvl.p));
    if (lvl.boundaryResidual > rootTol) {
      rep.truncated = true;
      rep.truncationReason = "root residual " + std::to_string(lvl.boundaryResidual) +
                             " above tolerance at level " + std::to_string(k);
      break;
    }
    if (maxDeriv > 1e12) {
      rep.levels.push_back(lvl);
      rep.truncated = true;
      rep.truncationReason = "derivative amplification floor reached at level " +
                             std::to_string(k);
      break;
    }
    rep.levels.push_back(lvl);
  }

  for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i)
    rep.rescalingRatios.push_back(std::abs(rep.levels[i + 1].p / rep.levels[i].p));
  for (std::size_t i = 0; i + 1 < rep.rescalingRatios.size(); ++i)
    rep.ratioDiffs.push_back(std::abs(rep.rescalingRatios[i + 1] - rep.rescalingRatios[i]));
  {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < rep.ratioDiffs.size(); ++i) {
      if (rep.ratioDiffs[i] > 0.0) {
        xs.push_back(double(i));
        ys.push_back(std::log(rep.ratioDiffs[i]));
      }
    }
    if (xs.size() >= 2) rep.ratioDiffDecayRate = std::exp(fit_line(xs, ys).slope);
  }

  // sup difference of successive rescaled return maps on a fixed grid
  for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
    const auto& a = rep.levels[i];
    const auto& b = rep.levels[i + 1];
    const double sa = a.p >= 0 ? 1.0 : -1.0, sb = b.p >= 0 ? 1.0 : -1.0;
    double sup = 0.0;
    for (int g = 0; g <= 64; ++g) {
      const double t = -1.0 + 2.0 * double(g) / 64.0;
      const double ga = sa * quad::iterate(c, sa * std::abs(a.p) * t, 1L << a.k) / std::abs(a.p);
      const double gb = sb * quad::iterate(c, sb * std::abs(b.p) * t, 1L << b.k) / std::abs(b.p);
      sup = std::max(sup, std::abs(ga - gb));
    }
    rep.rescaledSupDiffs.push_back(sup);
  }
  {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < rep.rescaledSupDiffs.size(); ++i) {
      if (rep.rescaledSupDiffs[i] > 0.0) {
        xs.push_back(double(i));
        ys.push_back(std::log(rep.rescaledSupDiffs[i]));
      }
    }
    if (xs.size() >= 2) rep.rescaledSupDecayRate = std::exp(fit_line(xs, ys).slope);
  }

  // branch intervals M_{k-1,i}: the annulus I_{k-1} \ I_k cut by the set E of
  // level k (the periodic orbit of p_k and its mirror, first images dropped)
  for (std::size_t li = 1; li < rep.levels.size() && int(li) <= branchLevels; ++li) {
    FeigenbaumLevel& lvl = rep.levels[li];
    const auto& prev = rep.levels[li - 1];
    const long nPrev = 1L << (lvl.k - 1);
    std::vector<double> cuts{std::abs(prev.p), -std::abs(prev.p), std::abs(lvl.p),
                             -std::abs(lvl.p)};
    double x = lvl.p;
    for (long j = 0; j < (1L << lvl.k); ++j) {
      if (j != 1 && std::abs(x) <= std::abs(prev.p) + 1e-13) {  // E drops +-f(p_k)
        cuts.push_back(x);
        cuts.push_back(-x);
      }
      x = x * x + c;
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = cuts[i], hi = cuts[i + 1];
      const double mid = 0.5 * (lo + hi);
      const bool inAnnulus = std::abs(mid) > std::abs(lvl.p) && std::abs(mid) < std::abs(prev.p);
      if (!inAnnulus || hi - lo < 1e-12) continue;
      FeigenbaumBranch br;
      br.piece = Interval(lo, hi);
      // minimal m with I_k covered by a monotone image of the piece under
      // f^(m * 2^(k-1)); monotonicity probed on a sample grid
      for (int m = 1; m <= 64; ++m) {
        const long iter = long(m) * nPrev;
        bool monotone = true;
        double sign = 0.0;
        for (int s = 0; s <= 16 && monotone; ++s) {
          const double x2 = lo + (hi - lo) * double(s) / 16.0;
          const double d = quad::deriv(c, x2, iter);
          if (s == 0)
            sign = d;
          else if (sign * d <= 0.0)
            monotone = false;
        }
        if (!monotone) continue;
        const double ylo = quad::iterate(c, lo, iter);
        const double yhi = quad::iterate(c, hi, iter);
        // closed covering: images may touch the boundary exactly at the
        // periodic point
        if (std::min(ylo, yhi) <= lvl.interval.lo + 1e-9 &&
            std::max(ylo, yhi) >= lvl.interval.hi - 1e-9) {
          br.returnMultiples = m;
          break;
        }
      }
      lvl.branches.push_back(br);
    }
  }
  return rep;
}

}  // namespace walklab
