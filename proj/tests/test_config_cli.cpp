#include <catch2/catch_amalgamated.hpp>

#include "walklab/config.hpp"

using namespace walklab;

TEST_CASE("builtin walks construct and validate") {
  for (const char* name : {"symmetric", "drift-up", "drift-down", "uniform-m0",
                           "nonneg-transient", "geo2acc", "fibonacci-model"}) {
    RandomWalk w = builtin_walk(name);
    CHECK(w.base_map().partition().size() >= 2);
  }
  CHECK_THROWS_AS(builtin_walk("no-such-walk"), config_error);
}

TEST_CASE("geo2acc: regularity structure as designed") {
  RandomWalk w = geo2acc_walk();
  const auto& part = w.base_map().partition();
  REQUIRE(part.accumulationPoints.size() == 2);
  CHECK(part.accumulationPoints[0] == Catch::Approx(0.35));
  CHECK(part.accumulationPoints[1] == Catch::Approx(0.75));
  REQUIRE(part.separators.size() == 1);
  CHECK(part.separators[0] == Catch::Approx(0.55));
  const PropertyReport rep = check_properties(w.base_map());
  CHECK(rep.mk.verdict);
  CHECK(rep.onto.verdict);
  CHECK(rep.ra.verdict);
  CHECK(rep.rb.verdict);
  CHECK(rep.rb.constant == Catch::Approx(0.5).margin(1e-9));
  CHECK(rep.accumulationN == 2);
  CHECK(rep.accumulationGap == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("walk_from_json: explicit map with branches") {
  const json j = json::parse(R"({
    "map": {
      "segments": [{"kind": "explicit", "atoms": [[0, 0.5], [0.5, 1]]}],
      "branches": [
        {"kind": "affine", "image": [0, 1]},
        {"kind": "perturbed", "image": [0, 1], "epsilon": 0.05, "bump": "quartic"}
      ]
    },
    "drift": [1, -1]
  })");
  RandomWalk w = walk_from_json(j);
  CHECK(w.homogeneous());
  CHECK(w.base_map().branch(0).kind() == BranchKind::Affine);
  CHECK(w.base_map().branch(1).kind() == BranchKind::PerturbedAffine);
}

TEST_CASE("walk_from_json: geometric segments and builtin + perturb") {
  const json geo = json::parse(R"({
    "map": {
      "truncationTol": 1e-6,
      "segments": [{"kind": "geometric", "span": [0, 1], "ratio": 0.5, "accumulateAt": "lo"}]
    },
    "drift": [1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1]
  })");
  RandomWalk w = walk_from_json(geo);
  CHECK(w.base_map().partition().truncationIndex == 20);

  const json pert = json::parse(R"({
    "builtin": "drift-down",
    "perturb": {"C": 0.1, "lambda": 0.5, "window": [-4, 4], "seed": 9}
  })");
  RandomWalk g = walk_from_json(pert);
  CHECK_FALSE(g.homogeneous());
  CHECK(g.window_lo() == -4);
  CHECK(g.window_hi() == 4);
}

TEST_CASE("walk_from_json: errors are config errors") {
  CHECK_THROWS_AS(walk_from_json(json::parse(R"({"drift": [1,-1]})")), config_error);
  CHECK_THROWS_AS(walk_from_json(json::parse(R"({"map": {"segments": []}, "drift": []})")),
                  config_error);
}

TEST_CASE("walk_from_json: explicit per-state override maps") {
  const json j = json::parse(R"({
    "map": {"segments": [{"kind": "explicit", "atoms": [[0, 0.5], [0.5, 1]]}]},
    "drift": [1, -1],
    "overrides": [
      {"state": 0, "map": {"segments": [{"kind": "explicit", "atoms": [[0, 0.6], [0.6, 1]]}]}}
    ]
  })");
  RandomWalk w = walk_from_json(j);
  REQUIRE_FALSE(w.homogeneous());
  CHECK(w.window_lo() == 0);
  CHECK(w.window_hi() == 0);
  CHECK(w.map_at(0).partition().atoms[0].hi == Catch::Approx(0.6));
  CHECK(w.map_at(1).partition().atoms[0].hi == Catch::Approx(0.5));
}

TEST_CASE("config digest is stable and order-sensitive") {
  const json a = json::parse(R"({"walk": "symmetric", "seed": 1})");
  const json b = json::parse(R"({"walk": "symmetric", "seed": 2})");
  CHECK(config_digest(a) == config_digest(a));
  CHECK(config_digest(a) != config_digest(b));
}
