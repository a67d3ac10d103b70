#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "walklab/config.hpp"
#include "walklab/stability.hpp"

using namespace walklab;

TEST_CASE("perturb: zero-magnitude schedule reproduces the base walk") {
  RandomWalk base = builtin_walk("drift-down");
  PerturbationSchedule sched;
  sched.C = 0.0;
  sched.windowLo = -4;
  sched.windowHi = 4;
  RandomWalk g = perturb(base, sched, 1);
  REQUIRE_FALSE(g.homogeneous());
  for (int n = -4; n <= 4; ++n) {
    const auto& pa = base.map_at(n).partition();
    const auto& pb = g.map_at(n).partition();
    for (std::size_t j = 0; j < pa.size(); ++j) {
      CHECK(pa.atoms[j].lo == Catch::Approx(pb.atoms[j].lo).margin(1e-15));
      CHECK(pa.atoms[j].hi == Catch::Approx(pb.atoms[j].hi).margin(1e-15));
    }
  }
  const AsympFit fit = asymp_verify(base, g, 50, 1);
  CHECK(fit.degenerate);
  CHECK(fit.C == 0.0);
  CHECK(fit.lambdaHat == 0.0);
  CHECK(fit.pass);
}

TEST_CASE("perturb: endpoint shifts fit a geometric asymp envelope") {
  RandomWalk base = builtin_walk("drift-down");
  PerturbationSchedule sched;
  sched.C = 0.1;
  sched.lambda = 0.5;
  sched.windowLo = -8;
  sched.windowHi = 8;
  RandomWalk g = perturb(base, sched, 7);
  const AsympFit fit = asymp_verify(base, g, 120, 7);
  REQUIRE_FALSE(fit.degenerate);
  CHECK(fit.pass);
  CHECK(fit.lambdaHat > 0.0);
  CHECK(fit.lambdaHat <= 0.8);
  CHECK(fit.maxResidual <= 0.1);
  // outside the window the maps coincide exactly
  for (std::size_t i = 0; i < fit.states.size(); ++i) {
    if (fit.states[i] < -8 || fit.states[i] > 8) CHECK(fit.perStateMax[i] <= 1e-14);
  }
}

TEST_CASE("perturb: schedule edits cannot exceed C lambda^|n|") {
  RandomWalk base = builtin_walk("symmetric");
  PerturbationSchedule sched;
  sched.C = 0.1;
  sched.lambda = 0.5;
  sched.windowLo = -6;
  sched.windowHi = 6;
  RandomWalk g = perturb(base, sched, 3);
  for (int n = -6; n <= 6; ++n) {
    const double cap = 0.1 * std::pow(0.5, std::abs(double(n))) + 1e-15;
    const auto& pa = base.map_at(n).partition();
    const auto& pb = g.map_at(n).partition();
    for (std::size_t j = 0; j < pa.size(); ++j) {
      CHECK(std::abs(pa.atoms[j].lo - pb.atoms[j].lo) <= cap);
      CHECK(std::abs(pa.atoms[j].hi - pb.atoms[j].hi) <= cap);
    }
  }
}

TEST_CASE("perturb: unbounded-above drift requires frozen negative states") {
  RandomWalk base = builtin_walk("symmetric");
  DriftFunction d = base.drift();
  d.unboundedAbove = true;
  RandomWalk marked(base.base_map(), d);
  PerturbationSchedule sched;
  sched.windowLo = -4;
  sched.windowHi = 4;
  CHECK_THROWS_AS(perturb(marked, sched, 1), construction_error);
  sched.negativeStatesFrozen = true;
  RandomWalk g = perturb(marked, sched, 1);
  CHECK(g.window_lo() == 0);  // window clipped to non-negative states
}

TEST_CASE("conjugacy_eval: identity pair is the identity map") {
  RandomWalk f = builtin_walk("symmetric");
  ConjugacyHandle h(f, f);
  CounterRng rng(12, 0);
  for (int i = 0; i < 50; ++i) {
    const double x = 0.01 + 0.98 * rng.next_double();
    const WalkPoint q = h.eval({x, 0}, 1e-10);
    CHECK(q.n == 0);
    CHECK(q.x == Catch::Approx(x).margin(1e-10));
  }
}

TEST_CASE("conjugacy_eval: boundary matching between full-branch walks") {
  RandomWalk f = builtin_walk("symmetric");
  RandomWalk g = homogeneous_walk({0.6, 0.4}, {+1, -1});
  ConjugacyHandle h(f, g);
  const WalkPoint q = h.eval({0.5, 0}, 1e-12);
  CHECK(q.x == Catch::Approx(0.6).margin(1e-14));
  CHECK(q.n == 0);
}

TEST_CASE("conjugacy_eval: intertwines the dynamics, H(F p) = G(H p)") {
  RandomWalk f = builtin_walk("nonneg-transient");
  PerturbationSchedule sched;
  sched.C = 0.1;
  sched.lambda = 0.5;
  sched.windowLo = -6;
  sched.windowHi = 6;
  RandomWalk g = perturb(f, sched, 11);
  ConjugacyHandle h(f, g);
  const double tol = 1e-9;
  CounterRng rng(2718, 0);
  for (int i = 0; i < 100; ++i) {
    const WalkPoint p{0.01 + 0.98 * rng.next_double(), 0};
    const WalkPoint hfp = h.eval(f.step(p), tol);
    const WalkPoint ghp = g.step(h.eval(p, tol));
    REQUIRE(hfp.n == ghp.n);
    CHECK(std::abs(hfp.x - ghp.x) <= 2.0 * tol);
  }
}

TEST_CASE("conjugacy_eval: monotone within each state") {
  RandomWalk f = builtin_walk("drift-up");
  PerturbationSchedule sched;
  sched.C = 0.08;
  sched.lambda = 0.5;
  sched.windowLo = -5;
  sched.windowHi = 5;
  RandomWalk g = perturb(f, sched, 5);
  ConjugacyHandle h(f, g);
  CounterRng rng(99, 9);
  std::vector<double> xs;
  for (int i = 0; i < 60; ++i) xs.push_back(0.01 + 0.98 * rng.next_double());
  std::sort(xs.begin(), xs.end());
  double prev = -1.0;
  for (double x : xs) {
    const WalkPoint q = h.eval({x, 0}, 1e-10);
    CHECK(q.x >= prev - 1e-12);
    prev = q.x;
  }
}

TEST_CASE("classify: constant +1 drift is transient upward with fraction 1") {
  RandomWalk walk = homogeneous_walk({0.5, 0.5}, {1, 1});
  const ClassificationResult r = classify(walk, 200, 2000, 77, {}, 2);
  CHECK(r.verdict == Verdict::transientPlus);
  CHECK(r.fracPlus == 1.0);
  REQUIRE(r.strongTransienceMargin.has_value());
  CHECK(*r.strongTransienceMargin == Catch::Approx(1.0));
}

TEST_CASE("classify: symmetric walk is recurrent at unit-test scale") {
  const ClassificationResult r = classify(builtin_walk("symmetric"), 300, 20000, 123, {}, 4);
  CHECK(r.verdict == Verdict::recurrent);
  CHECK(r.fracRecurrent >= 0.9);
}

TEST_CASE("classify: mildly drifted walk (M = +0.2) is transient upward") {
  RandomWalk walk = homogeneous_walk({0.4, 0.6}, {+2, -1});
  const ClassificationResult r = classify(walk, 400, 40000, 245, {}, 4);
  CHECK(r.verdict == Verdict::transientPlus);
  CHECK(r.fracPlus >= 0.95);
}

TEST_CASE("classify: deterministic given the seed, thread-count independent") {
  RandomWalk walk = builtin_walk("drift-up");
  const ClassificationResult a = classify(walk, 128, 5000, 5, {}, 1);
  const ClassificationResult b = classify(walk, 128, 5000, 5, {}, 4);
  CHECK(a.fracPlus == b.fracPlus);
  CHECK(a.fracMinus == b.fracMinus);
  CHECK(a.fracRecurrent == b.fracRecurrent);
  CHECK(a.verdict == b.verdict);
  const double total = a.fracPlus + a.fracMinus + a.fracRecurrent + a.fracOther;
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("dist_n on an asymptotically small pair obeys the recomputed tail bound") {
  RandomWalk f = builtin_walk("nonneg-transient");
  PerturbationSchedule sched;
  sched.C = 0.1;
  sched.lambda = 0.5;
  sched.windowLo = -6;
  sched.windowHi = 6;
  RandomWalk g = perturb(f, sched, 23);
  const AsympFit fit = asymp_verify(f, g, 150, 23);
  REQUIRE(fit.pass);
  // cylinders whose state path stays >= s: the derivative mismatch along the
  // path is at most the sum of the fitted per-state envelopes
  for (int s : {0, 2, 4}) {
    const SurvivorFamily fam = survivor_family(f, s, 6, s);
    for (std::size_t i = 0; i < fam.family.cylinders.size(); i += 7) {
      const Cylinder& c = fam.family.cylinders[i];
      double bound = 0.0;
      for (std::size_t t = 0; t < c.length(); ++t)
        bound += fit.C * std::pow(fit.lambdaHat, std::abs(double(c.statePath[t])));
      // the fit is a least-squares line, not a strict envelope; allow its
      // measured residual on top
      CHECK(dist_n(f, g, c) <= bound * std::exp(fit.maxResidual) + 1e-12);
    }
  }
}

TEST_CASE("asymp_verify: uniform slope change at all states is not asymptotically small") {
  RandomWalk f = builtin_walk("symmetric");
  RandomWalk g = homogeneous_walk({0.55, 0.45}, {+1, -1});
  const AsympFit fit = asymp_verify(f, g, 60, 2);
  REQUIRE_FALSE(fit.degenerate);
  CHECK(fit.lambdaHat >= 0.95);  // flat profile fits lambda ~ 1
  CHECK_FALSE(fit.pass);
}

TEST_CASE("msqs_test: identity pair has alpha = 1, C = 1") {
  RandomWalk f = builtin_walk("nonneg-transient");
  const MsqsResult r = msqs_test(f, f, 6, 3, 13);
  CHECK(r.alpha == Catch::Approx(1.0));
  CHECK(r.C == Catch::Approx(1.0).margin(1e-9));
  CHECK_FALSE(r.exploratory);
}

TEST_CASE("msqs_test: affine transient pair fits a positive exponent") {
  RandomWalk f = builtin_walk("nonneg-transient");
  PerturbationSchedule sched;
  sched.C = 0.1;
  sched.lambda = 0.5;
  sched.windowLo = -6;
  sched.windowHi = 6;
  RandomWalk g = perturb(f, sched, 17);
  const MsqsResult r = msqs_test(f, g, 8, 4, 13);
  CHECK_FALSE(r.exploratory);
  CHECK(r.alpha > 0.0);
  CHECK(r.alpha <= 1.0);
  CHECK(r.maxResidual <= 0.2);
  CHECK(r.samplePoints > 100);
}

TEST_CASE("msqs_test: recurrent pair is labeled exploratory") {
  RandomWalk f = builtin_walk("symmetric");
  PerturbationSchedule sched;
  sched.C = 0.1;
  sched.lambda = 0.5;
  sched.windowLo = 0;
  sched.windowHi = 0;  // slope change at state 0 only
  RandomWalk g = perturb(f, sched, 19);
  const MsqsResult r = msqs_test(f, g, 5, 3, 13);
  CHECK(r.exploratory);
}
