#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace walklab {

// Orbit evaluation refuses points on atom boundaries; callers that simulate
// long ensembles nudge instead (see simulate.hpp).
class boundary_error : public std::runtime_error {
public:
  explicit boundary_error(const std::string& what) : std::runtime_error(what) {}
};

// A point (or symbolic path) fell into the truncated part of an infinite
// partition.
class tail_error : public std::runtime_error {
public:
  explicit tail_error(const std::string& what) : std::runtime_error(what) {}
};

// Symbolic path not realizable: some atom image does not cover the next atom.
class admissibility_error : public std::runtime_error {
public:
  explicit admissibility_error(const std::string& what) : std::runtime_error(what) {}
};

// Construction refused: invariants of the requested object cannot be
// established (overlapping atoms, expansion bound violated, ...).
class construction_error : public std::invalid_argument {
public:
  explicit construction_error(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure (non-convergence of an iteration, bracketing failure).
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

class config_error : public std::invalid_argument {
public:
  explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double maxResidual = 0.0;
  std::size_t points = 0;
  bool degenerate = true;  // fewer than two distinct abscissae
};

// Ordinary least squares for y ~ intercept + slope * x.
inline LinearFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  LinearFit f;
  f.points = xs.size();
  if (xs.size() != ys.size() || xs.size() < 2) return f;
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= double(xs.size());
  ym /= double(xs.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  f.degenerate = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = std::abs(ys[i] - (f.intercept + f.slope * xs[i]));
    if (r > f.maxResidual) f.maxResidual = r;
  }
  return f;
}

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// FNV-1a, used to stamp result records with a digest of their inputs.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace walklab
