#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "walklab/common.hpp"
#include "walklab/renorm.hpp"
#include "walklab/stability.hpp"
#include "walklab/walk.hpp"

namespace walklab {

using json = nlohmann::ordered_json;

// --- shipped systems -----------------------------------------------------------

// Two interior accumulation points (0.35, 0.75) with a separator at 0.55;
// onto affine branches, alternating +-1 drift.  Exercises Ra/Rb, truncated
// tails, separators and dd-covers.
inline RandomWalk geo2acc_walk(double truncationTol = 1e-6) {
  PartitionSpec spec;
  spec.truncationTol = truncationTol;
  spec.segments.push_back(GeometricSegment{Interval(0.0, 0.35), 0.5, false});
  spec.segments.push_back(GeometricSegment{Interval(0.35, 0.55), 0.5, true});
  spec.segments.push_back(GeometricSegment{Interval(0.55, 0.75), 0.5, false});
  spec.segments.push_back(GeometricSegment{Interval(0.75, 1.0), 0.5, true});
  MarkovPartition part = build_partition(spec);
  std::vector<Branch> branches;
  std::vector<int> drift;
  for (std::size_t j = 0; j < part.size(); ++j) {
    branches.push_back(Branch::affine(part.atoms[j], part.stateInterval));
    drift.push_back(j % 2 == 0 ? 1 : -1);
  }
  MarkovMap map(std::move(part), std::move(branches));
  return RandomWalk(std::move(map), DriftFunction{std::move(drift), {}});
}

inline RandomWalk builtin_walk(const std::string& name) {
  if (name == "symmetric") return homogeneous_walk({0.5, 0.5}, {+1, -1});        // M = 0
  if (name == "drift-up") return homogeneous_walk({0.5, 0.5}, {+2, -1});         // M = +1/2
  if (name == "drift-down") return homogeneous_walk({0.5, 0.5}, {+1, -2});       // M = -1/2
  if (name == "uniform-m0") return homogeneous_walk({2.0 / 3.0, 1.0 / 3.0}, {-1, +2});
  if (name == "nonneg-transient") return homogeneous_walk({0.5, 0.5}, {+1, 0});  // psi >= 0
  if (name == "geo2acc") return geo2acc_walk();
  if (name == "fibonacci-model")
    return fibonacci_model(0.25, default_fibonacci_spec(0.25));
  throw config_error("unknown builtin walk: " + name);
}

// --- JSON -> objects -------------------------------------------------------------

inline Interval interval_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw config_error("interval must be [lo, hi]");
  return Interval(j[0].get<double>(), j[1].get<double>());
}

inline PartitionSpec partition_spec_from_json(const json& j) {
  PartitionSpec spec;
  if (j.contains("stateInterval")) spec.stateInterval = interval_from_json(j["stateInterval"]);
  if (j.contains("truncationTol")) spec.truncationTol = j["truncationTol"].get<double>();
  if (!j.contains("segments")) throw config_error("map needs a segments array");
  for (const auto& s : j["segments"]) {
    const std::string kind = s.value("kind", "explicit");
    if (kind == "explicit") {
      ExplicitSegment seg;
      for (const auto& a : s.at("atoms")) seg.atoms.push_back(interval_from_json(a));
      spec.segments.emplace_back(std::move(seg));
    } else if (kind == "geometric") {
      GeometricSegment seg;
      seg.span = interval_from_json(s.at("span"));
      seg.ratio = s.at("ratio").get<double>();
      const std::string at = s.value("accumulateAt", "lo");
      if (at != "lo" && at != "hi") throw config_error("accumulateAt must be 'lo' or 'hi'");
      seg.accumulateAtLo = at == "lo";
      spec.segments.emplace_back(std::move(seg));
    } else {
      throw config_error("unknown segment kind: " + kind);
    }
  }
  return spec;
}

inline BumpShape bump_from_string(const std::string& s) {
  if (s == "quartic") return BumpShape::Quartic;
  if (s == "sine") return BumpShape::Sine;
  throw config_error("unknown bump shape: " + s);
}

inline MarkovMap map_from_json_impl(const json& j) {
  MarkovPartition part = build_partition(partition_spec_from_json(j));
  std::vector<Branch> branches;
  if (!j.contains("branches") || (j["branches"].is_string() && j["branches"] == "onto")) {
    for (const auto& a : part.atoms) branches.push_back(Branch::affine(a, part.stateInterval));
  } else {
    const auto& bs = j["branches"];
    if (bs.size() != part.size())
      throw config_error("need one branch per atom (" + std::to_string(part.size()) + ")");
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto& b = bs[i];
      const Interval image = interval_from_json(b.at("image"));
      const int orient = b.value("orientation", 1);
      const std::string kind = b.value("kind", "affine");
      if (kind == "affine") {
        branches.push_back(Branch::affine(part.atoms[i], image, orient));
      } else if (kind == "perturbed") {
        branches.push_back(Branch::perturbed_affine(
            part.atoms[i], image, b.at("epsilon").get<double>(),
            bump_from_string(b.value("bump", "quartic")), orient));
      } else {
        throw config_error("unknown branch kind: " + kind);
      }
    }
  }
  return MarkovMap(std::move(part), std::move(branches));
}

// construction failures on config-described objects surface as config errors
inline MarkovMap map_from_json(const json& j) {
  try {
    return map_from_json_impl(j);
  } catch (const construction_error& e) {
    throw config_error(std::string("invalid map: ") + e.what());
  }
}

inline PerturbationSchedule schedule_from_json(const json& j) {
  PerturbationSchedule s;
  s.C = j.value("C", 0.1);
  s.lambda = j.value("lambda", 0.5);
  if (j.contains("window")) {
    s.windowLo = j["window"][0].get<int>();
    s.windowHi = j["window"][1].get<int>();
  }
  s.endpointShifts = j.value("endpointShifts", true);
  s.branchBumps = j.value("branchBumps", false);
  s.negativeStatesFrozen = j.value("negativeStatesFrozen", false);
  s.editScale = j.value("editScale", 0.25);
  s.bumpScale = j.value("bumpScale", 0.25);
  return s;
}

inline RandomWalk walk_from_json(const json& j) {
  if (j.is_string()) return builtin_walk(j.get<std::string>());
  if (j.contains("builtin")) {
    RandomWalk base = builtin_walk(j["builtin"].get<std::string>());
    if (j.contains("perturb")) {
      const auto& p = j["perturb"];
      return perturb(base, schedule_from_json(p), p.value("seed", std::uint64_t(1)));
    }
    return base;
  }
  if (j.contains("fibonacci")) {
    const auto& f = j["fibonacci"];
    const double lam = f.value("scaleLambda", 0.3);
    std::vector<std::pair<double, int>> spec;
    if (f.contains("branches")) {
      for (const auto& b : f["branches"])
        spec.emplace_back(b.at("length").get<double>(), b.at("drift").get<int>());
    } else {
      spec = default_fibonacci_spec(lam);
    }
    return fibonacci_model(lam, spec);
  }
  if (!j.contains("map") || !j.contains("drift"))
    throw config_error("walk needs map + drift (or builtin/fibonacci)");
  MarkovMap map = map_from_json(j["map"]);
  std::vector<int> drift = j["drift"].get<std::vector<int>>();
  DriftFunction df{std::move(drift), {}};
  df.unboundedAbove = j.value("driftUnboundedAbove", false);
  try {
    if (j.contains("overrides")) {
      // explicit per-state maps on a contiguous window
      std::vector<std::pair<int, MarkovMap>> entries;
      for (const auto& o : j["overrides"])
        entries.emplace_back(o.at("state").get<int>(), map_from_json(o.at("map")));
      std::sort(entries.begin(), entries.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<MarkovMap> maps;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i > 0 && entries[i].first != entries[i - 1].first + 1)
          throw config_error("override states must form a contiguous window");
        maps.push_back(std::move(entries[i].second));
      }
      return RandomWalk(std::move(map), std::move(df), entries.front().first,
                        std::move(maps));
    }
    RandomWalk base(std::move(map), std::move(df));
    if (j.contains("perturb")) {
      const auto& p = j["perturb"];
      return perturb(base, schedule_from_json(p), p.value("seed", std::uint64_t(1)));
    }
    return base;
  } catch (const construction_error& e) {
    throw config_error(std::string("invalid walk: ") + e.what());
  }
}

inline std::uint64_t config_digest(const json& j) { return fnv1a(j.dump()); }

}  // namespace walklab
