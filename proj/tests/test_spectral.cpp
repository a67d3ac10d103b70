#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "walklab/config.hpp"
#include "walklab/spectral.hpp"

using namespace walklab;

namespace {

// exact binomial tail P(|S_n/n| >= eps) for the +-1 walk
double binomial_tail(int n, double eps) {
  std::vector<double> logfact(std::size_t(n) + 1, 0.0);
  for (int i = 2; i <= n; ++i) logfact[std::size_t(i)] = logfact[std::size_t(i - 1)] + std::log(double(i));
  auto choose = [&](int k) {
    return std::exp(logfact[std::size_t(n)] - logfact[std::size_t(k)] - logfact[std::size_t(n - k)]);
  };
  const int hi = int(std::ceil(n * (1.0 + eps) / 2.0));
  const int lo = int(std::floor(n * (1.0 - eps) / 2.0));
  double t = 0.0;
  for (int k = hi; k <= n; ++k) t += choose(k);
  for (int k = 0; k <= lo; ++k) t += choose(k);
  return t / std::pow(2.0, n);
}

MarkovMap three_atom_markov() {
  // A -> B u C, B -> all, C -> A u B: non-onto Markov with onto middle branch
  MarkovPartition part = build_partition(
      explicit_partition({{0.0, 1.0 / 3.0}, {1.0 / 3.0, 2.0 / 3.0}, {2.0 / 3.0, 1.0}}));
  std::vector<Branch> branches;
  branches.push_back(Branch::affine(part.atoms[0], Interval(1.0 / 3.0, 1.0)));
  branches.push_back(Branch::affine(part.atoms[1], Interval(0.0, 1.0)));
  branches.push_back(Branch::affine(part.atoms[2], Interval(0.0, 2.0 / 3.0)));
  return MarkovMap(std::move(part), std::move(branches));
}

}  // namespace

TEST_CASE("ulam_matrix: doubling map, 4 bins, two entries of 1/2 per row") {
  UlamModel m = ulam_matrix(full_shift_affine({0.5, 0.5}), 4);
  for (int i = 0; i < 4; ++i) {
    int nonzero = 0;
    double rowSum = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double v = m.matrix[std::size_t(i) * 4 + std::size_t(j)];
      rowSum += v;
      if (v != 0.0) {
        ++nonzero;
        CHECK(v == Catch::Approx(0.5));
      }
    }
    CHECK(nonzero == 2);
    CHECK(rowSum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("ulam_matrix: perturbed branches keep rows stochastic to 1e-12") {
  MarkovPartition part = build_partition(explicit_partition({{0.0, 0.5}, {0.5, 1.0}}));
  std::vector<Branch> branches;
  branches.push_back(Branch::perturbed_affine(part.atoms[0], Interval(0.0, 1.0), 0.05));
  branches.push_back(
      Branch::perturbed_affine(part.atoms[1], Interval(0.0, 1.0), -0.04, BumpShape::Sine));
  UlamModel m = ulam_matrix(MarkovMap(std::move(part), std::move(branches)), 128);
  for (int i = 0; i < m.bins; ++i) {
    double rowSum = 0.0;
    for (int j = 0; j < m.bins; ++j) rowSum += m.matrix[std::size_t(i) * m.bins + std::size_t(j)];
    CHECK(std::abs(rowSum - 1.0) <= 1e-12);
  }
}

TEST_CASE("invariant_density: doubling map is uniform") {
  UlamModel m = ulam_model(full_shift_affine({0.5, 0.5}), 1024);
  for (double d : m.density) CHECK(std::abs(d - 1.0) <= 1e-3);
  CHECK(m.residual <= 1e-12);
}

TEST_CASE("invariant_density: reciprocal slopes give the uniform density") {
  UlamModel m = ulam_model(full_shift_affine({2.0 / 3.0, 1.0 / 3.0}), 512);
  for (double d : m.density) CHECK(std::abs(d - 1.0) <= 1e-9);
}

TEST_CASE("invariant_density: non-onto Markov map, atom-level oracle and Birkhoff") {
  MarkovMap map = three_atom_markov();
  UlamModel m = ulam_model(map, 768);
  // atom-mass fixed point solved by hand: masses (2/7, 3/7, 2/7)
  const double pdfA = (2.0 / 7.0) * 3.0, pdfB = (3.0 / 7.0) * 3.0;
  for (int i = 0; i < 256; ++i) CHECK(m.density[std::size_t(i)] == Catch::Approx(pdfA).margin(1e-6));
  for (int i = 256; i < 512; ++i)
    CHECK(m.density[std::size_t(i)] == Catch::Approx(pdfB).margin(1e-6));
  for (int i = 512; i < 768; ++i)
    CHECK(m.density[std::size_t(i)] == Catch::Approx(pdfA).margin(1e-6));

  // Birkhoff histogram oracle
  RandomWalk walk(map, DriftFunction{{0, 0, 0}, {}});
  OrbitSimulator sim(walk, CounterRng(31337, 0));
  WalkPoint p = sim.start_uniform(0);
  long counts[3] = {0, 0, 0};
  const long steps = 2000000;
  for (long t = 0; t < steps; ++t) {
    p = sim.step(p);
    counts[p.x < 1.0 / 3.0 ? 0 : (p.x < 2.0 / 3.0 ? 1 : 2)]++;
  }
  CHECK(double(counts[0]) / double(steps) == Catch::Approx(2.0 / 7.0).margin(2e-3));
  CHECK(double(counts[1]) / double(steps) == Catch::Approx(3.0 / 7.0).margin(2e-3));
}

TEST_CASE("mean_drift: exact symmetric and compensated tables") {
  CHECK(std::abs(mean_drift(builtin_walk("symmetric"), 1024).M) <= 1e-12);
  CHECK(std::abs(mean_drift(builtin_walk("uniform-m0"), 1024).M) <= 1e-9);
  CHECK(mean_drift(builtin_walk("drift-up"), 1024).M == Catch::Approx(0.5).margin(1e-9));
  CHECK(mean_drift(builtin_walk("drift-down"), 1024).M == Catch::Approx(-0.5).margin(1e-9));
}

TEST_CASE("mean_drift: bin-refinement consistency on shipped affine walks") {
  for (const char* name : {"symmetric", "uniform-m0", "drift-up", "geo2acc"}) {
    const MeanDriftResult a = mean_drift(builtin_walk(name), 256);
    const MeanDriftResult b = mean_drift(builtin_walk(name), 512);
    CHECK(std::abs(a.M - b.M) <= 1e-6);
  }
}

TEST_CASE("empirical orbit drift matches the spectral mean drift") {
  RandomWalk walk = builtin_walk("drift-up");
  const double M = mean_drift(walk, 512).M;
  const int horizon = 2000, orbits = 1000;
  double sum = 0.0;
  for (int o = 0; o < orbits; ++o) {
    OrbitSimulator sim(walk, CounterRng(404, std::uint64_t(o)));
    WalkPoint p = sim.start_uniform(0);
    const int s0 = p.n;
    for (int t = 0; t < horizon; ++t) p = sim.step(p);
    sum += double(p.n - s0) / double(horizon);
  }
  const double sigma = 1.5;  // Var(psi) = 9/4 for the (+2,-1) table
  CHECK(sum / orbits == Catch::Approx(M).margin(3.0 * sigma / std::sqrt(double(horizon) * orbits)));
}

TEST_CASE("sigma_squared: constant drift is an exact coboundary") {
  const Sigma2Result s = sigma_squared(homogeneous_walk({0.5, 0.5}, {2, 2}), 8);
  for (double v : s.table) CHECK(v == 0.0);
}

TEST_CASE("sigma_squared: +-1 binary digits give sigma^2 = 1 at every depth") {
  const Sigma2Result s = sigma_squared(builtin_walk("symmetric"), 12);
  for (double v : s.table) CHECK(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("sigma_squared: (2/3,1/3)/(-1,+2) has variance 2 (iid digits)") {
  const Sigma2Result s = sigma_squared(builtin_walk("uniform-m0"), 12);
  for (double v : s.table) {
    CHECK(v > 0.0);
    CHECK(v == Catch::Approx(2.0).margin(1e-9));
  }
}

TEST_CASE("clt_check: constant drift refused with coboundary message") {
  CHECK_THROWS_AS(clt_check(homogeneous_walk({0.5, 0.5}, {1, 1}), 64, 100, 1),
                  construction_error);
}

TEST_CASE("clt_check: symmetric walk at moderate n") {
  const CltResult r = clt_check(builtin_walk("symmetric"), 256, 2000, 42);
  CHECK(r.sigma == Catch::Approx(1.0).margin(1e-9));
  CHECK(r.ks <= 0.2);
}

TEST_CASE("clt_check: KS distance shrinks along a 3-point n schedule") {
  const CltResult a = clt_check(builtin_walk("symmetric"), 16, 10000, 42);
  const CltResult b = clt_check(builtin_walk("symmetric"), 256, 10000, 42);
  const CltResult c = clt_check(builtin_walk("symmetric"), 1024, 10000, 42);
  CHECK(a.ks > b.ks);
  CHECK(b.ks > c.ks);
}

TEST_CASE("ld_rate: exact tails match the binomial oracle") {
  std::vector<int> sched{2, 4, 6, 8, 10, 12, 14, 16};
  const LdRateResult r = ld_rate(builtin_walk("symmetric"), 0.25, sched);
  REQUIRE(r.exact);
  for (std::size_t i = 0; i < sched.size(); ++i)
    CHECK(r.tails[i] == Catch::Approx(binomial_tail(sched[i], 0.25)).margin(1e-12));
}

TEST_CASE("ld_rate: tails monotone non-increasing on even n at eps = 0.9") {
  std::vector<int> sched{2, 4, 6, 8, 10, 12, 14, 16};
  const LdRateResult r = ld_rate(builtin_walk("symmetric"), 0.9, sched);
  for (std::size_t i = 0; i + 1 < r.tails.size(); ++i) CHECK(r.tails[i + 1] <= r.tails[i] + 1e-15);
  for (std::size_t i = 0; i < sched.size(); ++i)
    CHECK(r.tails[i] == Catch::Approx(binomial_tail(sched[i], 0.9)).margin(1e-12));
}

TEST_CASE("ld_rate: zero tails reported with the gamma = 0 convention") {
  const LdRateResult a = ld_rate(homogeneous_walk({0.5, 0.5}, {1, 1}), 0.5, {2, 4, 6});
  for (double t : a.tails) CHECK(t == 0.0);
  CHECK(a.gammaHat == 0.0);

  const LdRateResult b = ld_rate(builtin_walk("symmetric"), 1.5, {2, 4, 6});
  for (double t : b.tails) CHECK(t == 0.0);
  CHECK(b.gammaHat == 0.0);
}

TEST_CASE("azuma_bound: plug-in values") {
  const std::vector<double> c1{1.0};
  const AzumaBound a = azuma_bound(c1, 1.0);
  CHECK(a.raw == Catch::Approx(2.0 * std::exp(-0.5)).margin(1e-12));
  CHECK(a.clamped == 1.0);

  const int n = 8;
  const std::vector<double> cn(n, 1.0);
  const AzumaBound b = azuma_bound(cn, std::sqrt(2.0 * n * std::log(2.0)));
  CHECK(b.raw == Catch::Approx(1.0).margin(1e-12));

  const std::vector<double> c4(4, 1.0);
  const AzumaBound d = azuma_bound(c4, 4.0);
  CHECK(d.raw == Catch::Approx(2.0 * std::exp(-2.0)).margin(1e-12));

  const std::vector<double> zeros{0.0, 0.0};
  CHECK(azuma_bound(zeros, 1.0).raw == 0.0);
}

TEST_CASE("azuma_bound: monotone in t and in each c_i") {
  std::vector<double> c{0.5, 1.0, 2.0};
  double prev = 2.0;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double v = azuma_bound(c, t).raw;
    CHECK(v < prev);
    prev = v;
  }
  const double base = azuma_bound(c, 1.0).raw;
  c[1] = 1.5;
  CHECK(azuma_bound(c, 1.0).raw > base);
}

TEST_CASE("strong_transience_margin: constant +1 gives margin 1") {
  const MarginResult m = strong_transience_margin(homogeneous_walk({0.5, 0.5}, {1, 1}), 6);
  CHECK(m.margin == Catch::Approx(1.0));
}

TEST_CASE("strong_transience_margin: full branches make conditionals state-free") {
  const MarginResult m =
      strong_transience_margin(homogeneous_walk({2.0 / 3.0, 1.0 / 3.0}, {+2, -1}), 6);
  CHECK(m.margin == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("strong_transience_margin: symmetric walk has zero margin") {
  const MarginResult m = strong_transience_margin(builtin_walk("symmetric"), 6);
  CHECK(m.margin == Catch::Approx(0.0).margin(1e-12));
}
