#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "walklab/common.hpp"
#include "walklab/interval.hpp"

namespace walklab {

enum class BranchKind { Affine, PerturbedAffine };

// C^2 bump shapes vanishing at both endpoints together with their first
// derivative, so a perturbed branch keeps the exact affine image.
enum class BumpShape { Quartic, Sine };

namespace bump {

inline double value(BumpShape s, double t) {
  switch (s) {
    case BumpShape::Quartic: {
      const double u = t * (1.0 - t);
      return u * u;
    }
    case BumpShape::Sine: {
      const double v = std::sin(M_PI * t);
      return v * v / (M_PI * M_PI);
    }
  }
  return 0.0;
}

inline double d1(BumpShape s, double t) {
  switch (s) {
    case BumpShape::Quartic:
      return 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    case BumpShape::Sine:
      return std::sin(2.0 * M_PI * t) / M_PI;
  }
  return 0.0;
}

inline double d2(BumpShape s, double t) {
  switch (s) {
    case BumpShape::Quartic:
      return 2.0 * (1.0 - 6.0 * t + 6.0 * t * t);
    case BumpShape::Sine:
      return 2.0 * std::cos(2.0 * M_PI * t);
  }
  return 0.0;
}

// sup |B'|: quartic attains 1/(3*sqrt(3)) at t=(3-sqrt(3))/6.
inline double sup_d1(BumpShape s) {
  return s == BumpShape::Quartic ? 1.0 / (3.0 * std::sqrt(3.0)) : 1.0 / M_PI;
}

inline double sup_d2(BumpShape) { return 2.0; }

// Lipschitz constant of B'' (= sup |B'''|).
inline double lip_d2(BumpShape s) {
  return s == BumpShape::Quartic ? 12.0 : 4.0 * M_PI;
}

}  // namespace bump

// One monotone expanding branch of a Markov map.  The map is
//   f(x) = slope*x + offset + epsilon * B((x - domain.lo)/|domain|),
// affine when epsilon == 0.  The bump vanishes at the domain endpoints, so
// image endpoints are exact affine images and partition alignment survives
// perturbation.
class Branch {
public:
  static Branch affine(const Interval& domain, const Interval& image, int orientation = +1) {
    Branch b;
    b.domain_ = domain;
    b.image_ = image;
    b.kind_ = BranchKind::Affine;
    b.orientation_ = orientation >= 0 ? +1 : -1;
    const double a = image.length() / domain.length();
    b.slope_ = b.orientation_ > 0 ? a : -a;
    b.offset_ = b.orientation_ > 0 ? image.lo - b.slope_ * domain.lo
                                   : image.hi - b.slope_ * domain.lo;
    b.validate();
    return b;
  }

  static Branch perturbed_affine(const Interval& domain, const Interval& image, double epsilon,
                                 BumpShape shape = BumpShape::Quartic, int orientation = +1) {
    Branch b = affine(domain, image, orientation);
    b.kind_ = BranchKind::PerturbedAffine;
    b.epsilon_ = epsilon;
    b.shape_ = shape;
    b.validate();
    return b;
  }

  const Interval& domain() const { return domain_; }
  const Interval& image() const { return image_; }
  BranchKind kind() const { return kind_; }
  int orientation() const { return orientation_; }
  double epsilon() const { return epsilon_; }
  BumpShape shape() const { return shape_; }
  double affine_slope() const { return slope_; }

  double eval(double x) const {
    double y = slope_ * x + offset_;
    if (kind_ == BranchKind::PerturbedAffine)
      y += epsilon_ * bump::value(shape_, local(x));
    return y;
  }

  double deriv(double x) const {
    double d = slope_;
    if (kind_ == BranchKind::PerturbedAffine)
      d += epsilon_ / domain_.length() * bump::d1(shape_, local(x));
    return d;
  }

  double second_deriv(double x) const {
    if (kind_ == BranchKind::Affine) return 0.0;
    const double L = domain_.length();
    return epsilon_ / (L * L) * bump::d2(shape_, local(x));
  }

  double min_abs_deriv() const {
    const double a = std::abs(slope_);
    if (kind_ == BranchKind::Affine) return a;
    return a - std::abs(epsilon_) * bump::sup_d1(shape_) / domain_.length();
  }

  double max_abs_deriv() const {
    const double a = std::abs(slope_);
    if (kind_ == BranchKind::Affine) return a;
    return a + std::abs(epsilon_) * bump::sup_d1(shape_) / domain_.length();
  }

  // Solve eval(x) == y for y in the image.  Exact division for affine;
  // bisection plus Newton polish otherwise.
  double inverse(double y) const {
    const double tol = 1e-15;
    if (!image_.contains_closed(y, 1e-12))
      throw admissibility_error("inverse_branch: point outside branch image");
    y = std::clamp(y, image_.lo, image_.hi);
    if (kind_ == BranchKind::Affine) {
      double x = (y - offset_) / slope_;
      return std::clamp(x, domain_.lo, domain_.hi);
    }
    double a = domain_.lo, b = domain_.hi;
    double fa = eval(a) - y;
    for (int i = 0; i < 80 && (b - a) > tol; ++i) {
      const double m = 0.5 * (a + b);
      const double fm = eval(m) - y;
      if ((fa <= 0.0) == (fm <= 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    double x = 0.5 * (a + b);
    for (int i = 0; i < 4; ++i) {
      const double d = deriv(x);
      if (std::abs(d) < 1e-12) break;
      x -= (eval(x) - y) / d;
      x = std::clamp(x, domain_.lo, domain_.hi);
    }
    return x;
  }

  // Image of a subinterval of the domain, endpoint order restored.
  Interval map_interval(const Interval& sub) const {
    const double ya = eval(sub.lo), yb = eval(sub.hi);
    return orientation_ > 0 ? Interval(ya, yb) : Interval(yb, ya);
  }

  // Preimage of a subinterval of the image.
  Interval pull_back(const Interval& sub) const {
    const double xa = inverse(sub.lo), xb = inverse(sub.hi);
    return orientation_ > 0 ? Interval(xa, xb) : Interval(xb, xa);
  }

  // sup over the branch of |D^2 tau / (D tau)^2| = |J| * sup |f''/f'| for the
  // normalized inverse branch tau.  Zero for affine.  Grid sup (33 points)
  // plus an analytic slack term covering the gap between grid nodes.
  double distortion_sup(int gridPoints = 33) const {
    if (kind_ == BranchKind::Affine) return 0.0;
    const double L = domain_.length();
    double sup = 0.0;
    for (int i = 0; i < gridPoints; ++i) {
      const double x = domain_.lo + L * double(i) / double(gridPoints - 1);
      sup = std::max(sup, std::abs(second_deriv(x) / deriv(x)));
    }
    const double m = min_abs_deriv();
    const double d2max = std::abs(epsilon_) * bump::sup_d2(shape_) / (L * L);
    const double d3max = std::abs(epsilon_) * bump::lip_d2(shape_) / (L * L * L);
    // |(f''/f')'| <= |f'''|/|f'| + (f''/f')^2
    const double lip = d3max / m + (d2max / m) * (d2max / m);
    const double h = L / double(gridPoints - 1);
    return L * (sup + 0.5 * lip * h);
  }

private:
  Branch() = default;

  double local(double x) const { return (x - domain_.lo) / domain_.length(); }

  void validate() const {
    if (min_abs_deriv() <= 1.0 + 1e-12)
      throw construction_error("branch not expanding: min |f'| = " +
                               std::to_string(min_abs_deriv()));
    if (kind_ == BranchKind::PerturbedAffine) {
      // monotone: bump derivative must not flip the sign of f'
      if (std::abs(epsilon_) * bump::sup_d1(shape_) / domain_.length() >= std::abs(slope_))
        throw construction_error("branch perturbation breaks monotonicity");
    }
  }

  Interval domain_{0.0, 1.0};
  Interval image_{0.0, 1.0};
  BranchKind kind_ = BranchKind::Affine;
  BumpShape shape_ = BumpShape::Quartic;
  double slope_ = 2.0;
  double offset_ = 0.0;
  double epsilon_ = 0.0;
  int orientation_ = +1;
};

}  // namespace walklab
