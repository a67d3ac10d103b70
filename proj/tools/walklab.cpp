// walklab: reproducible experiment harness for deterministic random walks.
//
//   walklab <subcommand> --config <file.json> [--out <dir>] [--threads k]
//
// Subcommands: simulate, classify, drift, dimension, perturb, msqs, ddcover,
// momentsum, renorm, suite.  Every config must carry a seed; identical
// config + seed reproduces byte-identical result JSON (timing goes to a
// .meta.json sidecar).  Exit codes: 0 ok, 2 config error, 3 numeric failure,
// 4 cap exceeded with partial output.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "walklab/walklab.hpp"

namespace fs = std::filesystem;
using walklab::json;

namespace {

struct RunContext {
  json config;
  fs::path outDir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool capExceeded = false;
};

json walk_summary(const walklab::RandomWalk& w) {
  json j;
  j["homogeneous"] = w.homogeneous();
  j["atoms"] = w.base_map().partition().size();
  j["drift"] = w.drift().values;
  if (!w.homogeneous()) j["window"] = {w.window_lo(), w.window_hi()};
  return j;
}

json cmd_simulate(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
  const int orbits = cfg.value("orbits", 16);
  const int horizon = cfg.value("horizon", 1000);
  const int startState = cfg.value("startState", 0);

  std::ofstream csv(ctx.outDir / "orbits.csv");
  csv << "orbitId,t,state\n";
  json finals = json::array();
  for (int o = 0; o < orbits; ++o) {
    walklab::OrbitSimulator sim(walk, walklab::CounterRng(ctx.seed, std::uint64_t(o)));
    walklab::WalkPoint p = sim.start_uniform(startState);
    csv << o << ",0," << p.n << "\n";
    for (int t = 1; t <= horizon; ++t) {
      p = sim.step(p);
      csv << o << "," << t << "," << p.n << "\n";
    }
    finals.push_back(p.n);
  }
  json r;
  r["walk"] = walk_summary(walk);
  r["orbits"] = orbits;
  r["horizon"] = horizon;
  r["finalStates"] = finals;
  return r;
}

json cmd_classify(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
  walklab::ClassifyThresholds th;
  th.recurrentReturns = cfg.value("recurrentReturns", 10);
  th.supermajority = cfg.value("supermajority", 0.90);
  if (cfg.contains("transientT")) th.transientT = cfg["transientT"].get<double>();
  if (cfg.contains("burnIn")) th.burnIn = cfg["burnIn"].get<int>();
  const walklab::ClassificationResult res =
      walklab::classify(walk, cfg.value("ensemble", 1000), cfg.value("horizon", 100000),
                        ctx.seed, th, ctx.threads, cfg.value("startState", 0));
  json r;
  r["walk"] = walk_summary(walk);
  r["verdict"] = walklab::to_string(res.verdict);
  r["fractions"] = {{"transientPlus", res.fracPlus},
                    {"transientMinus", res.fracMinus},
                    {"recurrent", res.fracRecurrent},
                    {"other", res.fracOther}};
  r["ensemble"] = res.ensemble;
  r["horizon"] = res.horizon;
  r["boundaryNudges"] = res.boundaryNudges;
  if (res.strongTransienceMargin) r["strongTransienceMargin"] = *res.strongTransienceMargin;
  return r;
}

json cmd_drift(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
  const int bins = cfg.value("bins", 1024);
  const walklab::MeanDriftResult md = walklab::mean_drift(walk, bins);
  json r;
  r["walk"] = walk_summary(walk);
  r["M"] = md.M;
  r["errorEstimate"] = md.errorEstimate;
  r["bins"] = md.bins;
  if (cfg.value("sigma2", true)) {
    const walklab::Sigma2Result s2 =
        walklab::sigma_squared(walk, cfg.value("depthMax", 12), bins);
    r["sigma2"] = s2.sigma2;
    r["sigma2Table"] = s2.table;
    ctx.capExceeded = ctx.capExceeded || s2.partial;
  }
  return r;
}

json cmd_dimension(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
  const int k = cfg.value("k", 0);
  const int floorState = cfg.value("floorState", 0);
  std::vector<int> schedule = cfg.value("depthSchedule", std::vector<int>{4, 6, 8, 10});
  const std::size_t cap = cfg.value("cap", std::size_t(1) << 22);
  const auto estimates = walklab::dimension_estimate(walk, k, floorState, schedule, cap);

  json table = json::array();
  for (const auto& e : estimates) {
    json row;
    row["depth"] = e.depth;
    row["beta"] = e.beta;
    row["betaPositiveDrift"] = e.betaPositiveDrift;
    row["hdLower"] = e.hdLower;
    row["hdUpper"] = e.hdUpper;
    row["familySize"] = e.familySize;
    row["converged"] = e.converged;
    row["partial"] = e.partial;
    ctx.capExceeded = ctx.capExceeded || e.partial;
    table.push_back(row);
  }

  // full family dump at the deepest scheduled depth
  if (!schedule.empty() && cfg.value("dumpFamily", true)) {
    walklab::SurvivorFamily fam =
        walklab::survivor_family(walk, k, schedule.back(), floorState, cap);
    std::ofstream csv(ctx.outDir / "family.csv");
    csv << "path,statePath,lo,hi,length\n";
    csv.precision(17);
    for (const auto& c : fam.family.cylinders) {
      for (std::size_t i = 0; i < c.path.size(); ++i) csv << (i ? " " : "") << c.path[i];
      csv << ",";
      for (std::size_t i = 0; i < c.statePath.size(); ++i)
        csv << (i ? " " : "") << c.statePath[i];
      csv << "," << c.interval.lo << "," << c.interval.hi << "," << c.interval.length() << "\n";
    }
  }
  json r;
  r["walk"] = walk_summary(walk);
  r["k"] = k;
  r["floorState"] = floorState;
  r["estimates"] = table;
  if (cfg.contains("betaSlope")) {
    const double bs = cfg["betaSlope"].get<double>();
    json bt = json::array();
    for (int depth : schedule) {
      walklab::SurvivorFamily fam = walklab::beta_survivor_family(walk, k, depth, bs, cap);
      json row;
      row["depth"] = depth;
      row["familySize"] = fam.family.cylinders.size();
      row["beta"] = fam.family.cylinders.empty() ? 0.0 : walklab::vhd(fam.family);
      bt.push_back(row);
    }
    r["betaSliced"] = bt;
  }
  return r;
}

json cmd_perturb(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk base = walklab::walk_from_json(cfg.at("walk"));
  const walklab::PerturbationSchedule sched =
      walklab::schedule_from_json(cfg.at("schedule"));
  walklab::RandomWalk g = walklab::perturb(base, sched, ctx.seed);
  const walklab::AsympFit fit =
      walklab::asymp_verify(base, g, cfg.value("samples", 200), ctx.seed);
  json r;
  r["walk"] = walk_summary(base);
  r["perturbed"] = walk_summary(g);
  r["asymp"] = {{"C", fit.C},
                {"lambdaHat", fit.lambdaHat},
                {"maxResidual", fit.maxResidual},
                {"pass", fit.pass},
                {"degenerate", fit.degenerate}};
  json per = json::array();
  for (std::size_t i = 0; i < fit.states.size(); ++i)
    per.push_back({{"state", fit.states[i]}, {"max", fit.perStateMax[i]}});
  r["perState"] = per;
  return r;
}

json cmd_msqs(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk base = walklab::walk_from_json(cfg.at("walk"));
  walklab::RandomWalk g =
      cfg.contains("schedule")
          ? walklab::perturb(base, walklab::schedule_from_json(cfg["schedule"]), ctx.seed)
          : walklab::walk_from_json(cfg.at("other"));
  const walklab::MsqsResult res =
      walklab::msqs_test(base, g, cfg.value("basisDepth", 8), cfg.value("subsetGrid", 4),
                         ctx.seed);
  json r;
  r["alpha"] = res.alpha;
  r["C"] = res.C;
  r["basisDepth"] = res.basisDepth;
  r["maxResidual"] = res.maxResidual;
  r["exploratory"] = res.exploratory;
  r["samplePoints"] = res.samplePoints;
  return r;
}

json cmd_ddcover(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
  const int state = cfg.value("state", 0);
  const std::vector<double> alphas = cfg.value("alphas", std::vector<double>{0.5, 0.75, 1.0});
  json covers = json::array();

  auto runOne = [&](const walklab::Interval& J, int level) {
    const walklab::DDCover cover = walklab::dd_cover(walk, state, J, level, alphas);
    json cj;
    cj["J"] = {J.lo, J.hi};
    cj["level"] = level;
    cj["parts"] = cover.parts.size();
    cj["absorbedTail"] = cover.absorbedTailLength;
    json ratios = json::array();
    for (const auto& [a, r] : cover.ratioGrid) ratios.push_back({{"alpha", a}, {"ratio", r}});
    cj["ratios"] = ratios;
    json parts = json::array();
    for (const auto& w : cover.parts) {
      parts.push_back({{"hull", {w.hull.lo, w.hull.hi}},
                       {"cylinders", w.cylinders.size()},
                       {"rootLength", w.cylinders[w.rootIndex].interval.length()}});
    }
    cj["ddIntervals"] = parts;
    covers.push_back(cj);
  };

  const double theta = walk.map_at(state).expansion_bound();
  if (cfg.contains("intervals")) {
    for (const auto& spec : cfg["intervals"]) {
      const walklab::Interval J = walklab::interval_from_json(spec.at("J"));
      int level = spec.value("level", 0);
      if (level <= 0)
        level = std::max(1, int(std::log(J.length()) / std::log(theta)));
      runOne(J, level);
    }
  } else {
    const int count = cfg.value("count", 50);
    walklab::CounterRng rng(ctx.seed, 0xddc0ull);
    for (int i = 0; i < count; ++i) {
      double a = rng.next_double(), b = rng.next_double();
      if (a > b) std::swap(a, b);
      if (b - a < 1e-4) b = std::min(1.0 - 1e-9, a + 1e-4);
      const walklab::Interval J(a, b);
      const int level =
          std::max(1, std::min(cfg.value("maxLevel", 18),
                               int(std::log(J.length()) / std::log(theta))));
      runOne(J, level);
    }
  }
  json r;
  r["walk"] = walk_summary(walk);
  r["covers"] = covers;
  return r;
}

json cmd_momentsum(RunContext& ctx) {
  const auto& cfg = ctx.config;
  walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
  const walklab::MomentSumResult res = walklab::partition_moment_sum(
      walk, cfg.value("state", 0), cfg.value("nMax", 10), cfg.value("eps", 0.1),
      cfg.value("cap", std::size_t(1) << 22));
  ctx.capExceeded = ctx.capExceeded || res.partial;
  json r;
  r["walk"] = walk_summary(walk);
  r["sums"] = res.sums;
  r["growthFactor"] = res.growthFactor;
  r["maxStepRatio"] = res.maxStepRatio;
  r["partial"] = res.partial;
  return r;
}

json cmd_renorm(RunContext& ctx) {
  const auto& cfg = ctx.config;
  const std::string mode = cfg.value("mode", "feigenbaum");
  json r;
  if (mode == "feigenbaum") {
    double c;
    if (cfg.contains("c")) {
      c = cfg["c"].get<double>();
      r["locatedAccumulation"] = false;
    } else {
      const walklab::FeigenbaumAccumulation acc =
          walklab::locate_feigenbaum_accumulation(cfg.value("maxK", 14));
      c = acc.cInf;
      r["locatedAccumulation"] = true;
      r["accumulationParameter"] = acc.cInf;
      r["accumulationUncertainty"] = acc.uncertainty;
      r["superstable"] = acc.superstable;
    }
    const walklab::InducedMapReport rep = walklab::feigenbaum_induced(
        c, cfg.value("maxLevel", 8), cfg.value("rootTol", 1e-10));
    json levels = json::array();
    for (const auto& l : rep.levels) {
      json lj;
      lj["k"] = l.k;
      lj["p"] = l.p;
      lj["interval"] = {l.interval.lo, l.interval.hi};
      lj["boundaryResidual"] = l.boundaryResidual;
      lj["multiplier"] = l.multiplier;
      json branches = json::array();
      for (const auto& b : l.branches)
        branches.push_back({{"piece", {b.piece.lo, b.piece.hi}},
                            {"returnMultiples", b.returnMultiples}});
      lj["branches"] = branches;
      levels.push_back(lj);
    }
    r["parameter"] = rep.parameter;
    r["levels"] = levels;
    r["rescalingRatios"] = rep.rescalingRatios;
    r["ratioDiffDecayRate"] = rep.ratioDiffDecayRate;
    r["rescaledSupDiffs"] = rep.rescaledSupDiffs;
    r["rescaledSupDecayRate"] = rep.rescaledSupDecayRate;
    r["truncated"] = rep.truncated;
    if (rep.truncated) r["truncationReason"] = rep.truncationReason;
  } else if (mode == "fibonacci") {
    walklab::RandomWalk walk = walklab::walk_from_json(
        cfg.contains("walk") ? cfg["walk"] : json{{"fibonacci", json::object()}});
    const walklab::MeanDriftResult md = walklab::mean_drift(walk, cfg.value("bins", 1024));
    r["walk"] = walk_summary(walk);
    r["M"] = md.M;
    r["errorEstimate"] = md.errorEstimate;
  } else if (mode == "criterion") {
    walklab::RandomWalk walk = walklab::walk_from_json(cfg.at("walk"));
    const walklab::WildAttractorResult res =
        walklab::wild_attractor_criterion(walk, cfg.value("bins", 1024));
    r["walk"] = walk_summary(walk);
    r["verdict"] = walklab::to_string(res.verdict);
    r["M"] = res.M;
    r["errorBar"] = res.errorBar;
  } else {
    throw walklab::config_error("unknown renorm mode: " + mode);
  }
  return r;
}

json dispatch(const std::string& op, RunContext& ctx);

json cmd_suite(RunContext& ctx) {
  json experiments = json::array();
  for (const auto& e : ctx.config.at("experiments")) {
    RunContext sub;
    sub.config = e;
    sub.config["seed"] = e.value("seed", ctx.seed);
    sub.outDir = ctx.outDir;
    sub.threads = ctx.threads;
    sub.seed = sub.config["seed"].get<std::uint64_t>();
    json rec;
    rec["name"] = e.value("name", e.at("operation").get<std::string>());
    rec["operation"] = e.at("operation");
    rec["result"] = dispatch(e.at("operation").get<std::string>(), sub);
    ctx.capExceeded = ctx.capExceeded || sub.capExceeded;
    experiments.push_back(rec);
  }
  json r;
  r["experiments"] = experiments;
  return r;
}

json dispatch(const std::string& op, RunContext& ctx) {
  if (op == "simulate") return cmd_simulate(ctx);
  if (op == "classify") return cmd_classify(ctx);
  if (op == "drift") return cmd_drift(ctx);
  if (op == "dimension") return cmd_dimension(ctx);
  if (op == "perturb") return cmd_perturb(ctx);
  if (op == "msqs") return cmd_msqs(ctx);
  if (op == "ddcover") return cmd_ddcover(ctx);
  if (op == "momentsum") return cmd_momentsum(ctx);
  if (op == "renorm") return cmd_renorm(ctx);
  if (op == "suite") return cmd_suite(ctx);
  throw walklab::config_error("unknown operation: " + op);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walklab: deterministic random walk experiments"};
  app.require_subcommand(1);

  std::string configPath, outDir = ".";
  int threads = 0;
  for (const char* name : {"simulate", "classify", "drift", "dimension", "perturb", "msqs",
                           "ddcover", "momentsum", "renorm", "suite"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", configPath, "experiment config (JSON)")->required();
    sub->add_option("--out", outDir, "output directory");
    sub->add_option("--threads", threads, "parallelism degree (0 = hardware)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string op = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  RunContext ctx;
  ctx.threads = threads;
  json result;
  try {
    std::ifstream in(configPath);
    if (!in) throw walklab::config_error("cannot open config: " + configPath);
    ctx.config = json::parse(in);
    if (!ctx.config.contains("seed"))
      throw walklab::config_error("config must carry a seed (reproducibility is mandatory)");
    ctx.seed = ctx.config["seed"].get<std::uint64_t>();
    ctx.outDir = outDir;
    fs::create_directories(ctx.outDir);
    result = dispatch(op, ctx);
  } catch (const walklab::config_error& e) {
    json err{{"error", "config"}, {"what", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return 2;
  } catch (const walklab::numeric_error& e) {
    json err{{"error", "numeric"}, {"what", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return 3;
  } catch (const std::exception& e) {
    json err{{"error", "config"}, {"what", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return 2;
  }

  json out;
  out["schema"] = 1;
  out["operation"] = op;
  out["configDigest"] = ctx.config.is_null() ? 0 : walklab::config_digest(ctx.config);
  out["seed"] = ctx.seed;
  out["result"] = result;
  {
    std::ofstream f(ctx.outDir / "result.json");
    f << out.dump(2) << "\n";
  }
  {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    json meta{{"runtimeMs", ms}};
    std::ofstream f(ctx.outDir / "result.meta.json");
    f << meta.dump(2) << "\n";
  }
  std::cout << out.dump(2) << "\n";
  return ctx.capExceeded ? 4 : 0;
}
