#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "walklab/config.hpp"
#include "walklab/dimension.hpp"

using namespace walklab;

namespace {

CylinderFamily family_of_lengths(const std::vector<double>& lengths) {
  CylinderFamily fam;
  double lo = 0.0;
  for (double l : lengths) {
    Cylinder c;
    c.path = {0};
    c.statePath = {0};
    c.interval = Interval(lo, lo + l);
    fam.cylinders.push_back(c);
    lo += l + 1e-6;
  }
  return fam;
}

// brute-force survivor count over all atom paths
long brute_survivors(const std::vector<int>& drift, int depth, int floorState,
                     double betaSlope = -1.0) {
  const int b = int(drift.size());
  long count = 0;
  std::vector<int> idx(std::size_t(depth), 0);
  while (true) {
    int s = 0;
    bool ok = true;
    for (int i = 0; i < depth && ok; ++i) {
      s += drift[std::size_t(idx[std::size_t(i)])];
      ok = s >= floorState;
    }
    if (ok && betaSlope > 0.0 && double(s) < betaSlope * depth) ok = false;
    if (ok) ++count;
    int pos = depth - 1;
    while (pos >= 0 && ++idx[std::size_t(pos)] == b) idx[std::size_t(pos--)] = 0;
    if (pos < 0) break;
  }
  return count;
}

}  // namespace

TEST_CASE("vhd: closed-form families") {
  CHECK(vhd(family_of_lengths({0.5})) == Catch::Approx(0.0).margin(1e-10));
  CHECK(vhd(family_of_lengths({0.5, 0.5})) == Catch::Approx(1.0).margin(1e-10));
  CHECK(vhd(family_of_lengths({0.25, 0.25})) == Catch::Approx(0.5).margin(1e-10));
}

TEST_CASE("vhd: root residual, monotonicity, scaling") {
  CylinderFamily fam = family_of_lengths({0.3, 0.2, 0.1});
  const double beta = vhd(fam);
  double s = 0.0;
  for (const auto& c : fam.cylinders) s += std::pow(c.interval.length(), beta);
  CHECK(std::abs(s - 1.0) <= 1e-10);

  // adding a cylinder strictly increases beta
  CylinderFamily more = family_of_lengths({0.3, 0.2, 0.1, 0.05});
  CHECK(vhd(more) > beta);

  // scaling every length by t < 1 strictly decreases beta
  CylinderFamily scaled = family_of_lengths({0.15, 0.1, 0.05});
  CHECK(vhd(scaled) < beta);

  // total length <= 1 forces beta <= 1
  CHECK(beta <= 1.0);
  CHECK_THROWS_AS(vhd(CylinderFamily{}), construction_error);
}

TEST_CASE("hd_bounds: collapse, plug-in, vacuous") {
  const HdBounds collapse = hd_bounds(0.7, 0.5, 0.0);
  CHECK(collapse.lower == Catch::Approx(0.7));
  CHECK(collapse.upper == Catch::Approx(0.7));

  const HdBounds plug = hd_bounds(0.5, 0.5, 0.01);
  CHECK(plug.halfWidth == Catch::Approx(0.01 / (std::log(2.0) - 0.01)).margin(1e-12));

  const HdBounds vac = hd_bounds(0.5, 0.9, 0.2);  // log(1/0.9) < 0.2
  CHECK(vac.vacuous);
  CHECK(vac.lower == 0.0);
  CHECK(vac.upper == 1.0);
}

TEST_CASE("survivor_family: ballot paths of the symmetric walk at depth 3") {
  RandomWalk walk = builtin_walk("symmetric");
  const SurvivorFamily fam = survivor_family(walk, 0, 3, 0);
  REQUIRE(fam.family.cylinders.size() == 3);
  for (const auto& c : fam.family.cylinders)
    CHECK(c.interval.length() == Catch::Approx(0.125));
  CHECK(long(fam.family.cylinders.size()) == brute_survivors({+1, -1}, 3, 0));
}

TEST_CASE("survivor_family: counts match brute force over depths and walks") {
  for (const char* name : {"symmetric", "drift-down", "drift-up"}) {
    RandomWalk walk = builtin_walk(name);
    const std::vector<int>& drift = walk.drift().values;
    for (int depth = 1; depth <= 10; ++depth) {
      const SurvivorFamily fam = survivor_family(walk, 0, depth, 0);
      CHECK(long(fam.family.cylinders.size()) == brute_survivors(drift, depth, 0));
    }
  }
}

TEST_CASE("survivor_family: constant +1 drift keeps the full tree") {
  RandomWalk walk = homogeneous_walk({0.5, 0.5}, {1, 1});
  const SurvivorFamily fam = survivor_family(walk, 0, 6, 0);
  CHECK(fam.family.cylinders.size() == 64);
  CHECK(fam.totalLength == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("survivor_family: floor above the start state empties the family") {
  RandomWalk walk = builtin_walk("symmetric");
  const SurvivorFamily fam = survivor_family(walk, 0, 3, 1);
  CHECK(fam.family.cylinders.empty());
}

TEST_CASE("survivor_family is hereditary under depth refinement") {
  RandomWalk walk = builtin_walk("drift-down");
  const SurvivorFamily coarse = survivor_family(walk, 0, 6, 0);
  const SurvivorFamily fine = survivor_family(walk, 0, 7, 0);
  for (const auto& deep : fine.family.cylinders) {
    bool inside = false;
    for (const auto& c : coarse.family.cylinders) {
      if (c.interval.covers(deep.interval, 1e-12)) {
        inside = true;
        break;
      }
    }
    CHECK(inside);
  }
}

TEST_CASE("beta_survivor_family: slope 1 keeps only the all-up path") {
  RandomWalk walk = builtin_walk("symmetric");
  const SurvivorFamily fam = beta_survivor_family(walk, 0, 5, 1.0);
  REQUIRE(fam.family.cylinders.size() == 1);
  CHECK(fam.family.cylinders[0].path == std::vector<int>{0, 0, 0, 0, 0});
  CylinderFamily single = fam.family;
  CHECK(vhd(single) == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("beta_survivor_family: slope 1/2 depth 4 matches brute force") {
  RandomWalk walk = builtin_walk("symmetric");
  const SurvivorFamily fam = beta_survivor_family(walk, 0, 4, 0.5);
  // brute force over 16 paths: prefix sums >= 0 and final height >= 2
  const long oracle = brute_survivors({+1, -1}, 4, 0, 0.5);
  CHECK(oracle == 4);
  CHECK(long(fam.family.cylinders.size()) == oracle);
}

TEST_CASE("beta_survivor_family: slope above max drift empties the family") {
  RandomWalk walk = builtin_walk("symmetric");
  CHECK(beta_survivor_family(walk, 0, 4, 1.5).family.cylinders.empty());
}

TEST_CASE("dd_cover: J equal to one cylinder is its own root") {
  RandomWalk walk = builtin_walk("symmetric");
  const Cylinder c = cylinder(walk, 0, std::vector<int>{0, 1, 0});
  const std::vector<double> alphas{0.5, 1.0};
  const DDCover cover = dd_cover(walk, 0, c.interval, 3, alphas);
  REQUIRE(cover.parts.size() == 1);
  REQUIRE(cover.parts[0].cylinders.size() == 1);
  const auto [wRatio, rootRatio] = root_cylinder_ratio(cover.parts[0], 0.7);
  CHECK(wRatio == Catch::Approx(1.0));
  CHECK(rootRatio == Catch::Approx(1.0));
  for (const auto& [a, r] : cover.ratioGrid) CHECK(r == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("dd_cover: J spanning two adjacent equal cells") {
  RandomWalk walk = builtin_walk("symmetric");
  const Interval J(0.25, 0.75);  // two level-2 cells
  const DDCover cover = dd_cover(walk, 0, J, 2, std::vector<double>{1.0});
  CHECK(cover.parts.size() <= 2);
  double covered = 0.0;
  for (const auto& w : cover.parts) covered += w.hull.length();
  CHECK(covered >= J.length() - 1e-12);
  CHECK(cover.ratioGrid[0].second >= 1.0 - 1e-12);
  CHECK(cover.ratioGrid[0].second <= 2.0 + 1e-12);
}

TEST_CASE("dd_cover: separators never end up inside a dd-interval") {
  RandomWalk walk = geo2acc_walk();
  const auto& part = walk.base_map().partition();
  REQUIRE(part.separators.size() == 1);
  const double d = part.separators[0];
  CHECK(d == Catch::Approx(0.55));
  const Interval J(0.5, 0.6);
  const DDCover cover = dd_cover(walk, 0, J, 1, std::vector<double>{1.0});
  REQUIRE(cover.parts.size() >= 2);
  for (const auto& w : cover.parts) {
    CHECK_FALSE(w.hull.contains_interior(d));
    // contiguity of the stored cylinders
    for (std::size_t i = 0; i + 1 < w.cylinders.size(); ++i)
      CHECK(w.cylinders[i].interval.hi ==
            Catch::Approx(w.cylinders[i + 1].interval.lo).margin(1e-6));
  }
  double covered = 0.0;
  for (const auto& w : cover.parts) covered += w.hull.length();
  CHECK(covered + cover.absorbedTailLength >= J.length() - 1e-9);
}

TEST_CASE("root_cylinder_ratio on a geometric tail") {
  RandomWalk walk = geo2acc_walk(1e-9);
  // the left segment accumulates at 0.35 from below with ratio 1/2
  const Interval J(0.05, 0.349999);
  const DDCover cover = dd_cover(walk, 0, J, 1, std::vector<double>{});
  REQUIRE(cover.parts.size() == 1);
  const DDInterval& w = cover.parts[0];
  CHECK(w.rootIndex == 0);  // decay runs toward 0.35, root sits at the far end
  const auto [w1, r1] = root_cylinder_ratio(w, 1.0);
  CHECK(r1 == Catch::Approx(0.5).margin(1e-3));
  const auto [w2, r2] = root_cylinder_ratio(w, 0.5);
  CHECK(r2 == Catch::Approx(1.0 - 1.0 / std::sqrt(2.0)).margin(2e-3));
  (void)w1;
  (void)w2;
}

TEST_CASE("partition_moment_sum: doubling map growth factor 2^eps") {
  RandomWalk walk = builtin_walk("symmetric");
  const MomentSumResult r = partition_moment_sum(walk, 0, 10, 0.1);
  CHECK(r.growthFactor == Catch::Approx(std::pow(2.0, 0.1)).margin(1e-9));
  for (int n = 1; n <= 10; ++n)
    CHECK(r.sums[std::size_t(n - 1)] == Catch::Approx(std::pow(2.0, 0.1 * n)).margin(1e-9));
}

TEST_CASE("partition_moment_sum: eps = 0 collapses to total mass") {
  RandomWalk walk = builtin_walk("uniform-m0");
  const MomentSumResult r = partition_moment_sum(walk, 0, 8, 0.0);
  for (double s : r.sums) CHECK(s == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("partition_moment_sum: geometric partition has a finite growth factor") {
  RandomWalk walk = geo2acc_walk();
  const MomentSumResult r = partition_moment_sum(walk, 0, 3, 0.1, 1u << 21);
  CHECK(std::isfinite(r.growthFactor));
  CHECK(r.growthFactor > 1.0);
  CHECK(r.growthFactor <= r.maxStepRatio + 1e-9);
}

TEST_CASE("dimension_estimate: constant +1 drift pins beta = 1") {
  RandomWalk walk = homogeneous_walk({0.5, 0.5}, {1, 1});
  const std::vector<int> sched{2, 4, 6};
  const auto est = dimension_estimate(walk, 0, 0, sched);
  for (const auto& e : est) {
    CHECK(e.beta == Catch::Approx(1.0).margin(1e-10));
    CHECK(e.hdLower <= e.beta);
    CHECK(e.hdUpper >= e.beta);
  }
}

TEST_CASE("dimension_estimate: drift sign orders the survivor betas") {
  const std::vector<int> sched{12};
  const double up = dimension_estimate(builtin_walk("drift-up"), 0, 0, sched)[0].beta;
  const double flat = dimension_estimate(builtin_walk("symmetric"), 0, 0, sched)[0].beta;
  const double down = dimension_estimate(builtin_walk("drift-down"), 0, 0, sched)[0].beta;
  CHECK(up > flat);
  CHECK(flat > down);
  CHECK(up <= 1.0);
  CHECK(down > 0.0);
}

TEST_CASE("dd_cover: tail-gap handling") {
  // coarse truncation so the gaps are wide enough to probe
  RandomWalk w = geo2acc_walk(1e-3);
  // J inside a truncated gap: no level cells exist there
  CHECK_THROWS_AS(dd_cover(w, 0, Interval(0.3494, 0.3497), 1, std::vector<double>{}),
                  tail_error);
  // J straddling the accumulation point: one run, hull closed over the gap
  RandomWalk fine = geo2acc_walk(1e-6);
  const DDCover cover =
      dd_cover(fine, 0, Interval(0.34, 0.36), 1, std::vector<double>{1.0});
  REQUIRE(cover.parts.size() == 1);
  CHECK(cover.parts[0].tailAbsorbed);
  CHECK(cover.absorbedTailLength > 0.0);
  CHECK(cover.parts[0].hull.lo <= 0.34 + 1e-12);
  CHECK(cover.parts[0].hull.hi >= 0.36 - 1e-12);
}

TEST_CASE("dimension_estimate: symmetric walk betas increase with depth") {
  RandomWalk walk = builtin_walk("symmetric");
  const std::vector<int> sched{2, 4, 6, 8, 10};
  const auto est = dimension_estimate(walk, 0, 0, sched);
  for (std::size_t i = 0; i + 1 < est.size(); ++i) CHECK(est[i + 1].beta > est[i].beta);
  // affine walk: bounds collapse onto beta
  for (const auto& e : est) {
    CHECK(e.hdLower == Catch::Approx(e.beta).margin(1e-12));
    CHECK(e.hdUpper == Catch::Approx(e.beta).margin(1e-12));
  }
}
