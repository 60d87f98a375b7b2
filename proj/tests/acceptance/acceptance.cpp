// One line per acceptance criterion; exit status 1 when any criterion fails.

#include "falsify/bench.hpp"
#include "falsify/dual_game.hpp"
#include "falsify/engine.hpp"
#include "falsify/geometry.hpp"
#include "falsify/io.hpp"
#include "support/plants.hpp"
#include "support/sampling.hpp"
#include "support/theorem1.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace falsify;
using geom::ConvexSet;
using geom::HPolytope;
using geom::Mat;
using geom::Vec;
using io::json;
using falsify::testing::scalar;
using falsify::testing::vec;

namespace fs = std::filesystem;

namespace {

const std::string kConfigs = FALSIFY_CONFIGS;
const std::string kWork = FALSIFY_WORKDIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string config(const std::string& name) { return kConfigs + "/" + name + ".json"; }

struct CliRun {
  int code = -1;
  double seconds = 0.0;
};

CliRun cli(const std::string& args, const std::string& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cmd = std::string("\"") + FALSIFY_CLI + "\" " + args + " > \"" + log + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

// Falsifies a config into kWork/<dir>; the scenario is loaded when one was written.
struct FalsifyRun {
  CliRun run;
  std::string dir;
  std::optional<Scenario> scenario;
};

FalsifyRun falsify_cli(const std::string& cfg, const std::string& dir, const std::string& extra = "") {
  FalsifyRun f;
  f.dir = kWork + "/" + dir;
  fs::remove_all(f.dir);
  fs::create_directories(f.dir);
  f.run = cli("falsify \"" + cfg + "\" --out \"" + f.dir + "\" " + extra, f.dir + "/log.txt");
  if (fs::exists(f.dir + "/scenario.json")) f.scenario = io::scenario_from_json(io::read_json(f.dir + "/scenario.json"));
  return f;
}

int replay_cli(const std::string& cfg, const std::string& dir) {
  return cli("replay \"" + cfg + "\" \"" + dir + "/scenario.json\"", dir + "/replay.txt").code;
}

// In-process engine runs whose backward chains feed the sampled soundness check.
struct ChainRun {
  std::string label;
  io::Problem problem;
  std::vector<engine::BackreachFrame> frames;
};

std::vector<ChainRun>& chains() {
  static std::vector<ChainRun> all;
  return all;
}

void record_chain(const std::string& label, const std::string& cfg, const std::optional<double>& delta = {}) {
  io::Problem pr = io::load_problem(cfg);
  if (delta) pr.engine.delta = *delta;
  auto c = pr.make_controller();
  const auto run = engine::find_adversarial_scenario(pr.plant, *c, pr.X_init, pr.targets, pr.engine);
  chains().push_back({label, std::move(pr), run.frames});
}

Outcome criterion1() {
  Outcome o;
  const HPolytope init = HPolytope::box(vec({0, 17}), vec({20, 20}));
  const HPolytope unsafe = HPolytope::box(vec({3, 0}), vec({17, 3}));
  for (const std::string name : {"pi1", "pi2", "pi3"}) {
    const auto f = falsify_cli(config("example1_" + name), "c1_" + name);
    const bool ok = f.run.code == 0 && f.scenario && f.scenario->from_init && init.contains(f.scenario->x0) &&
                    unsafe.contains(f.scenario->x_traj.back()) && f.scenario->T <= 30 && f.run.seconds <= 300.0 &&
                    replay_cli(config("example1_" + name), f.dir) == 0;
    o.require(ok, name + ": exit " + std::to_string(f.run.code) + ", T " +
                      (f.scenario ? std::to_string(f.scenario->T) : std::string("-")) + ", " + fmt(f.run.seconds) + " s");
    record_chain("example1_" + name, config("example1_" + name));
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto coarse = falsify_cli(config("example2_lqr"), "c2_inf", "--delta inf");
  o.require(coarse.run.code == 2, "delta inf: exit " + std::to_string(coarse.run.code));
  const auto fine = falsify_cli(config("example2_lqr"), "c2_fine");
  const int T = fine.scenario ? fine.scenario->T : -1;
  o.require(fine.run.code == 0 && fine.scenario && fine.scenario->from_init && T <= 250,
            "delta 0.5: exit " + std::to_string(fine.run.code) + ", T " + std::to_string(T));
  record_chain("example2_inf", config("example2_lqr"), lp::kInf);
  record_chain("example2_fine", config("example2_lqr"));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const HPolytope init = HPolytope::box(vec({0, 0}), vec({2, 1}));
  const auto f = falsify_cli(config("example3_buck"), "c3");
  const int T = f.scenario ? f.scenario->T : -1;
  o.require(f.run.code == 0 && f.scenario && init.contains(f.scenario->x0) && T <= 300,
            "falsify: exit " + std::to_string(f.run.code) + ", T " + std::to_string(T));
  if (f.scenario) {
    const std::string sim = f.dir + "/sim";
    const auto s = cli("simulate \"" + config("example3_buck") + "\" --scenario \"" + f.dir + "/scenario.json\" --runs 10 --out \"" +
                           sim + "\"",
                       f.dir + "/simulate.txt");
    int violations = -1;
    if (fs::exists(sim + "/simulate.json")) violations = io::read_json(sim + "/simulate.json").value("violations", -1);
    o.require(s.code == 0 && violations == 0, "simulate from x0: " + std::to_string(violations) + "/10 violations");
  }
  record_chain("example3_buck", config("example3_buck"));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const io::Problem pr = io::load_problem(config("example7_reach_avoid"));
  const auto f = falsify_cli(config("example7_reach_avoid"), "c4");
  o.require(f.run.code == 0 && f.scenario.has_value(), "falsify: exit " + std::to_string(f.run.code));
  if (f.scenario) {
    const std::string& target = f.scenario->target;
    const bool deadline = target.rfind("deadline", 0) == 0;
    o.require(target.rfind("unsafe", 0) == 0 || deadline, "target " + target);
    o.require(replay_cli(config("example7_reach_avoid"), f.dir) == 0, "replay with time slices");
    if (deadline) {
      bool entered = false;
      const int n = pr.X_target->dim();
      for (int t = 0; t < pr.t_max && t < static_cast<int>(f.scenario->x_traj.size()); ++t) {
        entered = entered || pr.X_target->contains(f.scenario->x_traj[t].head(n));
      }
      o.require(!entered, "X_target avoided before t_max");
    }
  }
  record_chain("example7", config("example7_reach_avoid"));
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::uint64_t seed = 100;
  for (const ChainRun& c : chains()) {
    const auto r = falsify::testing::theorem1_check(c.problem.plant, c.frames, 1000, seed++, 1e-7);
    o.require(r.failures == 0, c.label + " " + std::to_string(r.failures) + "/" + std::to_string(r.samples));
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  std::mt19937_64 rng(606);
  std::normal_distribution<double> g;
  int samples = 0, failures = 0;
  while (samples < 10000) {
    const int n = 2 + samples % 3;
    std::vector<geom::Zonotope> ops;
    for (int k = 0; k < 2; ++k) {
      ops.emplace_back(Mat::NullaryExpr(n, n + 2, [&]() { return g(rng); }),
                       0.3 * Vec::NullaryExpr(n, [&]() { return g(rng); }));
    }
    const auto Z = geom::zonotope_intersection_under(ops);
    if (!Z) continue;
    for (const Vec& p : falsify::testing::sample_zonotope(*Z, 500, rng)) {
      ++samples;
      failures += !(ops[0].contains(p, 1e-8) && ops[1].contains(p, 1e-8));
    }
  }
  o.require(failures == 0, "intersection " + std::to_string(failures) + "/" + std::to_string(samples));

  int instances = 0, mismatches = 0;
  double worst = 0.0;
  while (instances < 50) {
    const int m = 5 + instances % 7;
    Mat A(m + 6, 3);
    Vec b(m + 6);
    for (int i = 0; i < m; ++i) {
      A.row(i) << g(rng), g(rng), g(rng);
      b(i) = 0.5 + std::abs(g(rng));
    }
    A.bottomRows(6) << Mat::Identity(3, 3), -Mat::Identity(3, 3);
    b.tail(6).setConstant(2.0 + std::abs(g(rng)));
    const HPolytope P(A, b);
    const auto Q = geom::project(P, {0, 1});
    ++instances;
    if (!Q) {
      ++mismatches;
      continue;
    }
    for (int k = 0; k < 20; ++k) {
      const double th = 2.0 * M_PI * (k + 0.37) / 20.0;
      Vec d3 = Vec::Zero(3);
      d3(0) = std::cos(th);
      d3(1) = std::sin(th);
      const double err = std::abs(Q->support(d3.head(2)) - P.support(d3));
      worst = std::max(worst, err);
      mismatches += err > 1e-6;
    }
  }
  o.require(mismatches == 0, "projection " + std::to_string(mismatches) + " mismatches, worst " + fmt(worst));
  return o;
}

// 1D integrator x' = x + u + w, y = x + v, on the domain [0, 15].
constexpr double kCell = 0.01;

double lower_end(const ConvexSet& S) { return -S.support(scalar(-1)); }

bool grid_forced(double x, double lo, double hi, double u_half, double w_half) {
  const int nu = static_cast<int>(std::lround(2 * u_half / kCell));
  const int nw = static_cast<int>(std::lround(2 * w_half / kCell));
  for (int a = 0; a <= nu; ++a) {
    const double u = -u_half + a * kCell;
    bool some_w = false;
    for (int c = 0; c <= nw && !some_w; ++c) {
      const double next = x + u - w_half + c * kCell;
      some_w = next >= lo - 1e-9 && next <= hi + 1e-9;
    }
    if (!some_w) return false;
  }
  return true;
}

double grid_lower(const std::function<bool(double)>& in, double from, double to) {
  for (double x = from; x <= to + 1e-9; x += kCell) {
    if (in(x)) return x;
  }
  return NAN;
}

Outcome criterion7() {
  Outcome o;
  // epre_under of {x >= 10} for two control/disturbance ratios.
  for (const auto& [u_half, w_half] : std::vector<std::pair<double, double>>{{0.5, 1.0}, {1.0, 0.5}, {0.3, 0.3}}) {
    const auto plant = falsify::testing::integrator_1d(u_half, w_half, 0.0);
    const ConvexSet pre = dual::epre_under(plant, ConvexSet(HPolytope(Mat::Constant(1, 1, -1.0), scalar(-10))), {});
    const double oracle = grid_lower([&](double x) { return grid_forced(x, 10, 15, u_half, w_half); }, 0, 15);
    o.require(std::abs(lower_end(pre) - oracle) <= kCell,
              "epre_under u " + fmt(u_half) + " w " + fmt(w_half) + ": " + fmt(lower_end(pre)) + " vs " + fmt(oracle));
  }
  // epre_y of {x >= 10} on the piece [-0.5, 0.5] with noise 0.2, domain [0, 12].
  {
    const auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.2, 0.0, 12.0);
    const auto e = engine::epre_y(plant, ConvexSet(HPolytope(Mat::Constant(1, 1, -1.0), scalar(-10))),
                                  geom::Box{scalar(-0.5), scalar(0.5)});
    int disagreements = 0;
    for (int i = 0; i <= 500; ++i) {
      const double y = 7.0 + i * kCell;
      // For both extreme u, some grid x within 0.2 of y in the domain and some grid w reach {x >= 10}.
      bool oracle = true;
      for (double u : {-0.5, 0.5}) {
        bool found = false;
        for (int a = 0; a <= 40 && !found; ++a) {
          const double x = y - 0.2 + a * kCell;
          if (x < -1e-12 || x > 12 + 1e-12) continue;
          for (int c = 0; c <= 200 && !found; ++c) found = x + u - 1.0 + c * kCell >= 10 - 1e-9;
        }
        oracle = oracle && found;
      }
      if (std::abs(y - 9.3) < 0.5 * kCell) continue;
      disagreements += e.set.contains(scalar(y)) != oracle;
    }
    o.require(disagreements == 0, "epre_y " + std::to_string(disagreements) + " cells");
  }
  // pre_y_pi of {x >= 9.5} for the query y = 9.3, u = 0.5.
  {
    const auto plant = falsify::testing::integrator_1d(0.5, 1.0, 0.2);
    const auto opt = engine::backend_options(plant, {}, dual::Backend::polytope);
    const ConvexSet X = engine::pre_y_pi(plant, ConvexSet(HPolytope(Mat::Constant(1, 1, -1.0), scalar(-9.5))),
                                         scalar(9.3), 0, scalar(0.5), opt);
    int disagreements = 0;
    for (int i = 0; i <= 200; ++i) {
      const double x = 8.5 + i * kCell;
      bool reach = false;
      for (int c = 0; c <= 200 && !reach; ++c) reach = x + 0.5 - 1 + c * kCell >= 9.5 - 1e-9;
      const bool oracle = std::abs(x - 9.3) <= 0.2 + 1e-9 && reach;
      if (std::abs(x - 9.1) < 1e-6 || std::abs(x - 9.5) < 1e-6) continue;
      disagreements += X.contains(scalar(x)) != oracle;
    }
    o.require(disagreements == 0, "pre_y_pi " + std::to_string(disagreements) + " cells");
  }
  return o;
}

json bench_result;

Outcome criterion8() {
  Outcome o;
  const io::Problem pr = io::load_problem(config("example1_pi1"));
  auto c = pr.make_controller();
  engine::EngineConfig cfg = pr.engine;
  cfg.backend = engine::BackendChoice::polytope;
  const auto poly = engine::find_adversarial_scenario(pr.plant, *c, pr.X_init, pr.targets, cfg);
  std::mt19937_64 rng(808);
  int samples = 0, violations = 0;
  const auto zopt = engine::backend_options(pr.plant, cfg, dual::Backend::zonotope);
  for (std::size_t k = 1; k < poly.frames.size(); ++k) {
    const auto& f = poly.frames[k];
    const ConvexSet Z = engine::pre_y_pi(pr.plant, poly.frames[k - 1].X, *f.y_query, f.mode, f.u, zopt);
    if (Z.is_empty()) continue;
    for (const Vec& x : falsify::testing::sample_frame(Z, 300, rng)) {
      ++samples;
      violations += !f.X.contains(x, 1e-7);
    }
  }
  dual::DualGameOptions dpoly, dzono;
  dzono.backend = dual::Backend::zonotope;
  const ConvexSet unsafe(pr.X_unsafe.front());
  const auto gp = dual::expand(pr.plant, unsafe, dpoly);
  const auto gz = dual::expand(pr.plant, unsafe, dzono);
  for (int k = 0; k <= std::min(gz.K, gp.K); ++k) {
    for (const Vec& x : falsify::testing::sample_zonotope(*gz.frames[k].zonotope(), 300, rng)) {
      ++samples;
      violations += !gp.frames[k].contains(x, 1e-7);
    }
  }
  o.require(samples > 0 && violations == 0 && gz.K <= gp.K,
            "example 1 frames " + std::to_string(violations) + "/" + std::to_string(samples));

  const auto z = falsify_cli(config("example1_pi1"), "c8_zonotope", "--backend zonotope");
  o.require(z.run.code == 0, "example 1 on the zonotope backend: exit " + std::to_string(z.run.code));

  bool found = false;
  for (const auto& row : bench_result.value("instances", json::array())) {
    if (row.value("dimension", 0) != 10) continue;
    found = true;
    o.require(row.value("backend", "") == "zonotope" && row.value("status", "") != "failed" && row.value("replay_ok", false),
              "10D zonotope run " + row.value("status", std::string("?")));
  }
  o.require(found, "10D bench row present");

  io::Problem big = io::parse_problem(bench::generate_instance({10, 1, 6, 0.0}));
  big.engine.backend = engine::BackendChoice::polytope;
  auto bc = big.make_controller();
  std::string refusal;
  try {
    const auto run = engine::find_adversarial_scenario(big.plant, *bc, big.X_init, big.targets, big.engine);
    for (const auto& t : run.targets) {
      if (!t.error.empty()) refusal = t.error;
    }
    if (run.scenario) refusal.clear();
  } catch (const Error& e) {
    refusal = e.what();
  }
  o.require(!refusal.empty(), "10D polytope refused: " + (refusal.empty() ? std::string("no") : refusal));
  return o;
}

Outcome criterion9() {
  Outcome o;
  const std::string dir = kWork + "/c9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const json spec{{"runs", 10},
                  {"instances",
                   json::array({json{{"dimension", 2}, {"obstacles", 1}, {"seed", 12}},
                                json{{"dimension", 2}, {"obstacles", 2}, {"seed", 7}},
                                json{{"dimension", 2}, {"obstacles", 3}, {"seed", 17}, {"mismatch", 0.02}},
                                json{{"dimension", 10}, {"obstacles", 1}, {"seed", 6}}})}};
  io::write_json(dir + "/bench_spec.json", spec);
  const auto r = cli("bench \"" + dir + "/bench_spec.json\" --out \"" + dir + "\"", dir + "/log.txt");
  o.require(r.code == 0, "bench exit " + std::to_string(r.code));
  if (!fs::exists(dir + "/bench.json")) {
    o.require(false, "bench.json written");
    return o;
  }
  bench_result = io::read_json(dir + "/bench.json");
  int rows = 0, from_init = 0;
  for (const auto& row : bench_result["instances"]) {
    ++rows;
    const std::string name = row.value("name", std::string());
    const std::string status = row.value("status", std::string());
    const std::string idir = dir + "/" + name;
    bool ok = status != "failed" && row.value("replay_ok", false) && fs::exists(idir + "/scenario.json");
    if (ok) {
      ok = cli("replay \"" + idir + "/instance.json\" \"" + idir + "/scenario.json\"", idir + "/replay.txt").code == 0;
      const Scenario sc = io::scenario_from_json(io::read_json(idir + "/scenario.json"));
      ok = ok && (status == "from_init") == sc.from_init && (status == "from_init" || status == "partial");
      from_init += sc.from_init;
    }
    o.require(ok, name + " " + status);
  }
  o.require(rows == 4, std::to_string(rows) + " rows, " + std::to_string(from_init) + " from init");
  return o;
}

Outcome criterion10() {
  Outcome o;
  for (const std::string name : {"pi1", "pi2", "pi3"}) {
    const auto a = falsify_cli(config("example1_" + name), "c10_" + name + "_a");
    const auto b = falsify_cli(config("example1_" + name), "c10_" + name + "_b");
    const std::string sa = slurp(a.dir + "/scenario.json"), sb = slurp(b.dir + "/scenario.json");
    o.require(!sa.empty() && sa == sb, name + " " + std::to_string(sa.size()) + " bytes");
  }
  return o;
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  // Criterion 9 runs before 8, whose 10D check reads the bench rows.
  const std::vector<std::pair<int, std::function<Outcome()>>> order = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {9, criterion9}, {8, criterion8}, {10, criterion10}};
  std::map<int, Outcome> results;
  for (const auto& [id, fn] : order) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.detail += " [" + fmt(std::round(secs * 10) / 10) + " s]";
    results[id] = out;
    std::cerr << "criterion " << id << " done\n";
  }
  int failed = 0;
  for (const auto& [id, out] : results) {
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << out.detail << "\n";
    failed += !out.pass;
  }
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}
