#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/markov_map.hpp"
#include "walklab/rng.hpp"
#include "walklab/simulate.hpp"
#include "walklab/walk.hpp"

namespace walklab {

// Ulam discretization of the transfer operator on a uniform bin grid.
struct UlamModel {
  int bins = 0;
  Interval support{0.0, 1.0};
  std::vector<double> matrix;   // row-major, row i = distribution of bin i's image
  std::vector<double> density;  // pdf per bin, filled by invariant_density
  double residual = 0.0;
  int iterations = 0;
  double rowLeak = 0.0;  // largest mass renormalized away (truncated tails)

  double bin_width() const { return support.length() / double(bins); }
  Interval bin_interval(int i) const {
    const double w = bin_width();
    return Interval(support.lo + i * w, support.lo + (i + 1) * w);
  }
  int bin_of(double x) const {
    int i = int((x - support.lo) / bin_width());
    return std::clamp(i, 0, bins - 1);
  }

  // integral of the pdf over [iv]
  double measure(const Interval& iv) const {
    const double w = bin_width();
    const int first = std::clamp(int((iv.lo - support.lo) / w), 0, bins - 1);
    const int last = std::clamp(int((iv.hi - support.lo) / w), 0, bins - 1);
    double s = 0.0;
    for (int i = first; i <= last; ++i)
      s += density[std::size_t(i)] * bin_interval(i).overlap_length(iv);
    return s;
  }

  // inverse-CDF sample from the pdf
  double sample(CounterRng& rng) const {
    double u = rng.next_double();
    const double w = bin_width();
    double acc = 0.0;
    for (int i = 0; i < bins; ++i) {
      const double m = density[std::size_t(i)] * w;
      if (acc + m >= u) {
        const double frac = m > 0 ? (u - acc) / m : 0.5;
        return support.lo + (i + frac) * w;
      }
      acc += m;
    }
    return support.hi - 0.5 * w;
  }
};

// Entry (i,j) = fraction of bin i mapped into bin j.  Interval preimage
// arithmetic (exact) for affine branches, 64-point midpoint quadrature for
// perturbed ones.  Rows covering truncated tail gaps are renormalized; the
// removed mass is reported in rowLeak.
inline UlamModel ulam_matrix(const MarkovMap& map, int bins) {
  if (bins < 2) throw construction_error("ulam_matrix needs at least 2 bins");
  UlamModel model;
  model.bins = bins;
  model.support = map.partition().stateInterval;
  model.matrix.assign(std::size_t(bins) * std::size_t(bins), 0.0);
  const double w = model.bin_width();

  for (const Branch& b : map.branches()) {
    if (b.kind() == BranchKind::Affine) {
      const int jFirst = model.bin_of(b.image().lo + 0.5 * w * 1e-9);
      const int jLast = model.bin_of(b.image().hi - 0.5 * w * 1e-9);
      for (int j = jFirst; j <= jLast; ++j) {
        const Interval cut = intersect(model.bin_interval(j), b.image());
        if (cut.hi - cut.lo <= 0.0) continue;
        const Interval pre = b.pull_back(cut);
        const int iFirst = model.bin_of(pre.lo + 0.5 * w * 1e-12);
        const int iLast = model.bin_of(pre.hi - 0.5 * w * 1e-12);
        for (int i = iFirst; i <= iLast; ++i) {
          const double ov = model.bin_interval(i).overlap_length(pre);
          if (ov > 0.0) model.matrix[std::size_t(i) * bins + std::size_t(j)] += ov / w;
        }
      }
    } else {
      const int iFirst = model.bin_of(b.domain().lo + 1e-15);
      const int iLast = model.bin_of(b.domain().hi - 1e-15);
      for (int i = iFirst; i <= iLast; ++i) {
        const Interval cell = intersect(model.bin_interval(i), b.domain());
        const double len = cell.hi - cell.lo;
        if (len <= 0.0) continue;
        constexpr int kNodes = 64;
        for (int q = 0; q < kNodes; ++q) {
          const double x = cell.lo + (q + 0.5) / double(kNodes) * len;
          const int j = model.bin_of(b.eval(x));
          model.matrix[std::size_t(i) * bins + std::size_t(j)] += len / (double(kNodes) * w);
        }
      }
    }
  }

  for (int i = 0; i < bins; ++i) {
    double* row = &model.matrix[std::size_t(i) * bins];
    const double s = std::accumulate(row, row + bins, 0.0);
    if (s > 0.0 && std::abs(s - 1.0) > 1e-15) {
      model.rowLeak = std::max(model.rowLeak, std::abs(1.0 - s));
      for (int j = 0; j < bins; ++j) row[j] /= s;
    }
  }
  return model;
}

// Power iteration for the fixed row vector; deterministic uniform start.
inline const std::vector<double>& invariant_density(UlamModel& model, double tol = 1e-12,
                                                    int maxIter = 100000) {
  const int n = model.bins;
  std::vector<double> mass(std::size_t(n), 1.0 / double(n));
  std::vector<double> next(std::size_t(n), 0.0);
  double residual = 0.0;
  int iter = 0;
  for (; iter < maxIter; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double mi = mass[std::size_t(i)];
      if (mi == 0.0) continue;
      const double* row = &model.matrix[std::size_t(i) * n];
      for (int j = 0; j < n; ++j) next[std::size_t(j)] += mi * row[j];
    }
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    if (total > 0.0)
      for (double& v : next) v /= total;
    residual = 0.0;
    for (int i = 0; i < n; ++i)
      residual = std::max(residual, std::abs(next[std::size_t(i)] - mass[std::size_t(i)]));
    mass.swap(next);
    if (residual <= tol) break;
  }
  model.iterations = iter + 1;
  model.residual = residual;
  if (residual > tol)
    throw numeric_error("invariant_density did not converge: residual " +
                        std::to_string(residual));
  model.density.resize(std::size_t(n));
  const double w = model.bin_width();
  for (int i = 0; i < n; ++i) model.density[std::size_t(i)] = mass[std::size_t(i)] / w;
  return model.density;
}

inline UlamModel ulam_model(const MarkovMap& map, int bins) {
  UlamModel m = ulam_matrix(map, bins);
  invariant_density(m);
  return m;
}

// --- drift statistics ---------------------------------------------------------

struct MeanDriftResult {
  double M = 0.0;
  double errorEstimate = 0.0;  // |M(bins) - M(2 bins)|
  int bins = 0;
};

inline double mean_drift_at(const RandomWalk& walk, const UlamModel& model) {
  const auto& part = walk.base_map().partition();
  double M = 0.0;
  for (std::size_t j = 0; j < part.size(); ++j)
    M += double(walk.drift_at(0, j)) * model.measure(part.atoms[j]);
  return M;
}

// M = integral of psi against the invariant density of the base map.
inline MeanDriftResult mean_drift(const RandomWalk& walk, int bins = 1024) {
  if (!walk.homogeneous())
    throw construction_error("mean_drift is defined for homogeneous walks");
  UlamModel coarse = ulam_model(walk.base_map(), bins);
  UlamModel fine = ulam_model(walk.base_map(), 2 * bins);
  const double m1 = mean_drift_at(walk, coarse);
  const double m2 = mean_drift_at(walk, fine);
  return {m2, std::abs(m2 - m1), 2 * bins};
}

struct Sigma2Result {
  double sigma2 = 0.0;
  std::vector<double> table;      // sigma^2_n for n = 1..depthMax
  std::vector<double> firstDiff;  // successive differences
  bool partial = false;
};

// sigma^2_n = (1/n) E[(S_n - n M)^2] summed exactly over depth-n cylinders;
// psi is P^0-measurable so the Birkhoff sum is constant on each cylinder.
inline Sigma2Result sigma_squared(const RandomWalk& walk, int depthMax, int bins = 1024,
                                  std::size_t cap = 1u << 22) {
  if (!walk.homogeneous())
    throw construction_error("sigma_squared is defined for homogeneous walks");
  UlamModel model = ulam_model(walk.base_map(), bins);
  const double M = mean_drift_at(walk, model);
  Sigma2Result out;
  for (int n = 1; n <= depthMax; ++n) {
    CylinderFamily fam = refine_partition(walk, 0, n, cap);
    out.partial = out.partial || fam.capExceeded;
    double s = 0.0;
    for (const auto& c : fam.cylinders) {
      double birkhoff = 0.0;  // S_n over the n symbols (times 0..n-1)
      for (std::size_t i = 0; i < c.path.size(); ++i)
        birkhoff += double(walk.drift_at(c.statePath[i], std::size_t(c.path[i])));
      const double dev = birkhoff - double(n) * M;
      s += model.measure(c.interval) * dev * dev;
    }
    out.table.push_back(s / double(n));
  }
  for (std::size_t i = 0; i + 1 < out.table.size(); ++i)
    out.firstDiff.push_back(out.table[i + 1] - out.table[i]);
  out.sigma2 = out.table.empty() ? 0.0 : out.table.back();
  return out;
}

struct CltResult {
  double ks = 0.0;
  int n = 0;
  int samples = 0;
  double sigma = 0.0;
};

// Empirical Kolmogorov-Smirnov distance of S_n/(sigma sqrt(n)) against N(0,1),
// sampling starts from the Ulam invariant density.
inline CltResult clt_check(const RandomWalk& walk, int n, int samples, std::uint64_t seed,
                           int bins = 1024, int sigmaDepth = 12) {
  Sigma2Result s2 = sigma_squared(walk, sigmaDepth, bins);
  // coboundary detection: exact zero for constant drift, else threshold at
  // the deepest computed level
  if (s2.sigma2 <= 1e-9)
    throw construction_error("sigma^2 = 0: drift is a coboundary, CLT check refused");
  const double sigma = std::sqrt(s2.sigma2);
  UlamModel model = ulam_model(walk.base_map(), bins);

  std::vector<double> vals;
  vals.reserve(std::size_t(samples));
  for (int k = 0; k < samples; ++k) {
    CounterRng rng(seed, std::uint64_t(k));
    OrbitSimulator sim(walk, CounterRng(seed, 0x5a5a5a5aull ^ std::uint64_t(k)));
    WalkPoint p{model.sample(rng), 0};
    const int start = p.n;
    for (int t = 0; t < n; ++t) p = sim.step(p);
    vals.push_back(double(p.n - start) / (sigma * std::sqrt(double(n))));
  }
  std::sort(vals.begin(), vals.end());
  double d = 0.0;
  const double N = double(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double F = standard_normal_cdf(vals[i]);
    d = std::max(d, std::max(std::abs((double(i) + 1.0) / N - F), std::abs(F - double(i) / N)));
  }
  return {d, n, samples, sigma};
}

struct LdRateResult {
  std::vector<int> schedule;
  std::vector<double> tails;  // mu-mass of {|S_n/n - M| >= eps}
  double gammaHat = 0.0;      // fitted per-step factor, 0 when all tails vanish
  double rate = 0.0;          // -log gammaHat
  bool exact = true;          // false when the cap forced Monte Carlo
  LinearFit fit;
};

// Exact large-deviation tail masses by cylinder summation, with a log-linear
// rate fit.  Falls back to Monte Carlo (flagged) past the cylinder cap.
inline LdRateResult ld_rate(const RandomWalk& walk, double eps, std::vector<int> schedule,
                            int bins = 1024, std::size_t cap = 1u << 22,
                            std::uint64_t seed = 1, int mcSamples = 200000) {
  if (eps <= 0.0) throw construction_error("ld_rate requires eps > 0");
  if (!walk.homogeneous())
    throw construction_error("ld_rate is defined for homogeneous walks");
  UlamModel model = ulam_model(walk.base_map(), bins);
  const double M = mean_drift_at(walk, model);

  LdRateResult out;
  out.schedule = schedule;
  for (int n : schedule) {
    const double need = std::pow(double(walk.base_map().partition().size()), double(n));
    if (need > double(cap)) {
      out.exact = false;
      double hit = 0.0;
      for (int k = 0; k < mcSamples; ++k) {
        CounterRng rng(seed, std::uint64_t(k) + 0x77ull);
        OrbitSimulator sim(walk, CounterRng(seed, 0x1234ull ^ std::uint64_t(k)));
        WalkPoint p{model.sample(rng), 0};
        const int start = p.n;
        for (int t = 0; t < n; ++t) p = sim.step(p);
        if (std::abs(double(p.n - start) / double(n) - M) >= eps) hit += 1.0;
      }
      out.tails.push_back(hit / double(mcSamples));
      continue;
    }
    CylinderFamily fam = refine_partition(walk, 0, n, cap);
    double tail = 0.0;
    for (const auto& c : fam.cylinders) {
      double birkhoff = 0.0;
      for (std::size_t i = 0; i < c.path.size(); ++i)
        birkhoff += double(walk.drift_at(c.statePath[i], std::size_t(c.path[i])));
      if (std::abs(birkhoff / double(n) - M) >= eps) tail += model.measure(c.interval);
    }
    out.tails.push_back(tail);
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < out.tails.size(); ++i) {
    if (out.tails[i] > 0.0) {
      xs.push_back(double(schedule[i]));
      ys.push_back(std::log(out.tails[i]));
    }
  }
  if (xs.size() < 2) {
    out.gammaHat = 0.0;
    out.rate = 0.0;
    return out;
  }
  out.fit = fit_line(xs, ys);
  out.gammaHat = std::exp(out.fit.slope);
  out.rate = -out.fit.slope;
  return out;
}

struct AzumaBound {
  double raw = 0.0;
  double clamped = 0.0;
};

// 2 exp(-t^2 / (2 sum c_i^2)), reported raw and clamped to [0,1].
inline AzumaBound azuma_bound(std::span<const double> c, double t) {
  if (t <= 0.0) throw construction_error("azuma_bound requires t > 0");
  double s = 0.0;
  for (double ci : c) {
    if (ci < 0.0) throw construction_error("azuma_bound requires c_i >= 0");
    s += ci * ci;
  }
  if (s == 0.0) return {0.0, 0.0};
  const double raw = 2.0 * std::exp(-t * t / (2.0 * s));
  return {raw, std::min(raw, 1.0)};
}

struct MarginResult {
  double margin = 0.0;  // min over n <= depthMax of conditional expectations
  int depthMax = 0;
  bool partial = false;
};

// K-hat = min over n <= depthMax, over depth-(n-1) cylinders C, of
// E(psi o F^n | C) with Lebesgue conditioning.  psi is constant per
// next-level atom, so the expectation is an exact sub-cylinder length sum.
inline MarginResult strong_transience_margin(const RandomWalk& walk, int depthMax,
                                             std::size_t cap = 1u << 20) {
  MarginResult out;
  out.depthMax = depthMax;
  out.margin = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= depthMax; ++n) {
    const int prefixSymbols = std::max(n - 1, 1);
    CylinderFamily prefixes = refine_partition(walk, 0, prefixSymbols, cap);
    out.partial = out.partial || prefixes.capExceeded;
    for (const auto& pre : prefixes.cylinders) {
      // extend to time n: need symbols up to index n (n+1 total)
      double num = 0.0, den = 0.0;
      std::vector<int> path(pre.path);
      std::vector<int> states(pre.statePath);
      std::function<void()> extend = [&]() {
        if (int(path.size()) == n + 1) {
          Cylinder c;
          try {
            c = cylinder(walk, states[0], path);
          } catch (const numeric_error&) {
            return;  // unrepresentable sliver
          }
          const double len = c.interval.length();
          num += double(walk.drift_at(c.statePath.back(), std::size_t(c.path.back()))) * len;
          den += len;
          return;
        }
        const int prevState = states.back();
        const int prevAtom = path.back();
        const int dest = prevState + walk.drift_at(prevState, std::size_t(prevAtom));
        const auto& img = walk.map_at(prevState).branch(std::size_t(prevAtom)).image();
        const auto& destPart = walk.map_at(dest).partition();
        for (std::size_t j = 0; j < destPart.size(); ++j) {
          if (!img.covers(destPart.atoms[j], 1e-9)) continue;
          path.push_back(int(j));
          states.push_back(dest);
          extend();
          path.pop_back();
          states.pop_back();
        }
      };
      extend();
      if (den > 0.0) out.margin = std::min(out.margin, num / den);
    }
  }
  if (!std::isfinite(out.margin)) out.margin = 0.0;
  return out;
}

}  // namespace walklab
