#include "falsify/bench.hpp"
#include "falsify/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace falsify;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<std::string> delta;
  std::optional<int> kmax;
  std::optional<std::string> backend;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "seed for the random tail noises");
  cmd->add_option("--beta", o.beta, "query-point blend in [0, 1]");
  cmd->add_option("--delta", o.delta, "control refinement fineness, or inf");
  cmd->add_option("--kmax", o.kmax, "iteration cap of the alternating phase");
  cmd->add_option("--backend", o.backend, "polytope, zonotope or auto");
}

void apply(io::Problem& pr, const Overrides& o) {
  io::json e = io::json::object();
  if (o.seed) e["seed"] = *o.seed;
  if (o.beta) e["beta"] = *o.beta;
  if (o.delta) {
    if (*o.delta == "inf") e["delta"] = "inf";
    else e["delta"] = std::stod(*o.delta);
  }
  if (o.kmax) e["k_max"] = *o.kmax;
  if (o.backend) e["backend"] = *o.backend;
  pr.engine = io::parse_engine(e, pr.engine);
  if (!e.empty()) {
    io::json& block = pr.doc["engine"];
    if (!block.is_object()) block = io::json::object();
    for (const auto& [k, v] : e.items()) block[k] = v;
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string default_out(const io::Problem& pr, const std::string& out) {
  return out.empty() ? "out/" + pr.name : out;
}

void print_report(const replay::Report& rep) {
  for (const auto& f : rep.failures) {
    std::cerr << "  t = " << f.t << ": " << f.what << "\n";
  }
}

int cmd_falsify(const std::string& spec, const std::string& out_arg, const Overrides& o) {
  io::Problem pr = io::load_problem(spec);
  apply(pr, o);
  const std::string out = default_out(pr, out_arg);
  std::filesystem::create_directories(out);
  auto ctrl = pr.make_controller();
  const engine::RunResult run = engine::find_adversarial_scenario(pr.plant, *ctrl, pr.X_init, pr.targets, pr.engine);

  std::optional<replay::Report> rep;
  if (run.scenario) {
    auto fresh = pr.make_controller();
    rep = replay::validate(pr.plant, *fresh, *run.scenario, pr.violation());
    io::write_json(out + "/scenario.json", io::scenario_to_json(*run.scenario, io::config_hash(pr.doc)));
    write_text(out + "/trace.csv", io::trace_csv(*run.scenario));
  }
  io::write_json(out + "/report.json", io::report_to_json(pr, run, rep ? &*rep : nullptr));
  std::vector<geom::ConvexSet> dual_sets(run.game.frames.begin(), run.game.frames.end());
  std::vector<geom::ConvexSet> alt_sets;
  for (const auto& f : run.frames) alt_sets.push_back(f.X);
  write_text(out + "/plot.svg", io::plot_svg(pr, {{dual_sets, "#9b5de5", 0.15}, {alt_sets, "#f4a261", 0.3}},
                                             run.scenario ? &*run.scenario : nullptr));

  for (const auto& t : run.targets) {
    std::cout << t.name << ": backend " << dual::to_string(t.backend) << ", dual depth " << t.dual_depth << " ("
              << t.dual_stop << "), alternating " << engine::to_string(t.status) << " after " << t.alternating_frames
              << " frames";
    if (!t.error.empty()) std::cout << ", error: " << t.error;
    std::cout << "\n";
  }
  if (!run.scenario) {
    std::cerr << "no scenario found\n";
    return 1;
  }
  const Scenario& sc = *run.scenario;
  std::cout << "scenario: target " << sc.target << ", N = " << sc.N << ", T = " << sc.T
            << ", from_init = " << (sc.from_init ? "true" : "false") << ", queries = " << run.query_count << "\n";
  if (!rep->ok()) {
    std::cerr << "replay failed:\n";
    print_report(*rep);
    return 1;
  }
  std::cout << "replay ok (" << rep->violation << "), outputs in " << out << "\n";
  return sc.from_init ? 0 : 2;
}

int cmd_replay(const std::string& spec, const std::string& scenario_path) {
  const io::Problem pr = io::load_problem(spec);
  const Scenario sc = io::scenario_from_json(io::read_json(scenario_path));
  auto ctrl = pr.make_controller();
  const replay::Report rep = replay::validate(pr.plant, *ctrl, sc, pr.violation());
  if (!rep.ok()) {
    std::cerr << "replay failed:\n";
    print_report(rep);
    return 1;
  }
  std::cout << "replay ok: " << rep.violation << " at T = " << sc.T << "\n";
  return 0;
}

int cmd_simulate(const std::string& spec, const std::string& scenario_path, const std::vector<double>& x0_arg, int runs,
                 std::optional<int> horizon, const Overrides& o, const std::string& out_arg) {
  io::Problem pr = io::load_problem(spec);
  apply(pr, o);
  geom::Vec x0;
  int h = horizon.value_or(100);
  if (!scenario_path.empty()) {
    const Scenario sc = io::scenario_from_json(io::read_json(scenario_path));
    x0 = sc.x0;
    if (!horizon) h = std::max(2 * sc.T, 1);
  } else if (!x0_arg.empty()) {
    x0 = Eigen::Map<const geom::Vec>(x0_arg.data(), static_cast<Eigen::Index>(x0_arg.size()));
  } else {
    x0 = pr.X_init.chebyshev_center().center;
  }
  if (x0.size() != pr.plant.system().nx()) throw Error("simulate: x0 has the wrong dimension");
  auto ctrl = pr.make_controller();
  const bench::BaselineResult r = bench::random_baseline(pr.plant, *ctrl, x0, runs, h, pr.engine.seed, pr.X_unsafe);
  std::cout << "violations: " << r.violations << " of " << r.runs << " (horizon " << h << ")\n";
  if (!out_arg.empty()) {
    std::filesystem::create_directories(out_arg);
    io::json x0j = io::json::array();
    for (int i = 0; i < x0.size(); ++i) x0j.push_back(x0(i));
    io::write_json(out_arg + "/simulate.json", {{"x0", x0j}, {"runs", r.runs}, {"horizon", h},
                                                 {"violations", r.violations},
                                                 {"membership_failures", r.membership_failures}});
  }
  return r.membership_failures == 0 ? 0 : 1;
}

int cmd_dualgame(const std::string& spec, const std::string& out_arg, const Overrides& o) {
  io::Problem pr = io::load_problem(spec);
  apply(pr, o);
  const std::string out = default_out(pr, out_arg);
  std::filesystem::create_directories(out);
  const auto backend = engine::resolve_backend(pr.plant, pr.engine);
  dual::DualGameOptions opt;
  static_cast<dual::BackendOptions&>(opt) = engine::backend_options(pr.plant, pr.engine, backend);
  opt.k_stop = pr.engine.k_stop;
  io::json games = io::json::array();
  std::vector<geom::ConvexSet> shaded;
  for (const auto& t : pr.targets) {
    opt.invariant = t.invariant;
    const dual::DualGameResult g = dual::expand(pr.plant, geom::ConvexSet(t.set), opt);
    std::cout << t.name << ": K = " << g.K << " (" << g.stop_reason << ")\n";
    engine::RunResult stub;
    stub.game = g;
    games.push_back({{"target", t.name}, {"game", io::report_to_json(pr, stub, nullptr)["dual_game"]}});
    shaded.insert(shaded.end(), g.frames.begin(), g.frames.end());
  }
  io::write_json(out + "/dualgame.json", {{"backend", dual::to_string(backend)}, {"targets", games}});
  write_text(out + "/dualgame.svg", io::plot_svg(pr, {{shaded, "#9b5de5", 0.15}}, nullptr));
  return 0;
}

int cmd_bench(const std::string& spec, const std::string& out_arg) {
  const io::json doc = io::read_json(spec);
  const std::string out = out_arg.empty() ? "out/bench" : out_arg;
  std::filesystem::create_directories(out);
  const int runs = doc.value("runs", 10);
  std::vector<bench::Row> rows;
  for (const auto& inst : doc.at("instances")) {
    bench::InstanceSpec s;
    s.dimension = inst.value("dimension", 2);
    s.obstacles = inst.value("obstacles", 1);
    s.seed = inst.value("seed", std::uint64_t{0});
    s.mismatch = inst.value("mismatch", 0.0);
    io::json instance;
    try {
      instance = bench::generate_instance(s);
    } catch (const Error& e) {
      bench::Row r;
      r.name = "bench_d" + std::to_string(s.dimension) + "_s" + std::to_string(s.seed);
      r.status = "failed";
      r.error = e.what();
      rows.push_back(r);
      continue;
    }
    const std::string name = instance["name"].get<std::string>();
    rows.push_back(bench::run_instance(instance, runs, out + "/" + name));
    const auto& r = rows.back();
    std::cout << name << ": " << r.status << " (" << r.backend << "), T = " << r.T << ", replay "
              << (r.replay_ok ? "ok" : "invalid") << ", baseline " << r.baseline_violations << "/" << r.baseline_runs
              << (r.error.empty() ? "" : ", error: " + r.error) << "\n";
  }
  write_text(out + "/bench.csv", bench::rows_csv(rows));
  io::write_json(out + "/bench.json", bench::rows_json(rows));
  for (const auto& r : rows) {
    if (r.status != "failed" && !r.replay_ok) return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Falsification of switched-affine plants under black-box output-feedback controllers"};
  app.require_subcommand(1);

  Overrides o;
  std::string spec, out, scenario;
  std::vector<double> x0;
  int runs = 10;
  std::optional<int> horizon;

  auto* f = app.add_subcommand("falsify", "search for an adversarial scenario");
  f->add_option("spec", spec, "problem spec (JSON)")->required()->check(CLI::ExistingFile);
  f->add_option("--out", out, "output directory (default out/<name>)");
  add_overrides(f, o);

  auto* r = app.add_subcommand("replay", "validate a scenario against the plant and controller");
  r->add_option("spec", spec, "problem spec (JSON)")->required()->check(CLI::ExistingFile);
  r->add_option("scenario", scenario, "scenario.json")->required()->check(CLI::ExistingFile);

  auto* s = app.add_subcommand("simulate", "closed-loop runs under random noise and disturbance");
  s->add_option("spec", spec, "problem spec (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--scenario", scenario, "take x0 (and horizon 2T) from a scenario")->check(CLI::ExistingFile);
  s->add_option("--x0", x0, "initial state")->delimiter(',');
  s->add_option("--runs", runs, "number of runs");
  s->add_option("--horizon", horizon, "steps per run");
  s->add_option("--out", out, "output directory");
  add_overrides(s, o);

  auto* d = app.add_subcommand("dualgame", "expand the controller-independent dual game");
  d->add_option("spec", spec, "problem spec (JSON)")->required()->check(CLI::ExistingFile);
  d->add_option("--out", out, "output directory (default out/<name>)");
  add_overrides(d, o);

  auto* b = app.add_subcommand("bench", "generate and run random instances");
  b->add_option("spec", spec, "bench spec (JSON)")->required()->check(CLI::ExistingFile);
  b->add_option("--out", out, "output directory (default out/bench)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*f) return cmd_falsify(spec, out, o);
    if (*r) return cmd_replay(spec, scenario);
    if (*s) return cmd_simulate(spec, scenario, x0, runs, horizon, o, out);
    if (*d) return cmd_dualgame(spec, out, o);
    if (*b) return cmd_bench(spec, out);
  } catch (const io::SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
