#include "falsify/bench.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace falsify::bench {

using geom::HPolytope;
using geom::Mat;
using geom::Vec;

namespace {

constexpr double kLo = 0.0, kHi = 10.0;  // obstacle workspace
constexpr double kDomainLo = -2.0, kDomainHi = 12.0;
constexpr double kMargin = 0.6;          // avoidance band around each obstacle
constexpr double kGain = 0.3, kDamping = 1.0, kPush = 1.0;
constexpr int kRetries = 100;

struct Layout {
  int npos = 2, nvel = 0, nstable = 0;
  int nx() const { return npos + nvel + nstable; }
};

Layout layout(int dimension) {
  switch (dimension) {
    case 2: return {2, 0, 0};
    case 6: return {3, 3, 0};
    case 10: return {3, 3, 4};
  }
  throw Error("bench: dimension must be 2, 6 or 10");
}

json jvec(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json jmat(const Mat& M) {
  json a = json::array();
  for (int i = 0; i < M.rows(); ++i) a.push_back(jvec(M.row(i).transpose()));
  return a;
}

json jbox(const Vec& lo, const Vec& hi) { return json{{"lo", jvec(lo)}, {"hi", jvec(hi)}}; }

struct Obstacle {
  Vec lo, hi;
};

bool overlaps(const Vec& alo, const Vec& ahi, const Vec& blo, const Vec& bhi, double gap) {
  for (int i = 0; i < alo.size(); ++i) {
    if (ahi(i) + gap <= blo(i) || bhi(i) + gap <= alo(i)) return false;
  }
  return true;
}

// Law on the position block: u = k (g - y_pos) - kd y_vel + push.
json go_to_goal_law(const Layout& L, const Vec& goal, const Vec& push) {
  const int nx = L.nx(), nu = L.npos;
  Mat gain = Mat::Zero(nu, nx);
  for (int i = 0; i < nu; ++i) {
    gain(i, i) = -kGain;
    if (L.nvel > 0) gain(i, L.npos + i) = -kDamping;
  }
  const Vec offset = kGain * goal + push;
  return json{{"gain", jmat(gain)}, {"offset", jvec(offset)},
              {"saturation", jbox(Vec::Constant(nu, -1.0), Vec::Constant(nu, 1.0))}};
}

// Sector of the inflated box whose nearest face is (axis, upper).
json sector_region(const Layout& L, const Obstacle& o, int axis, bool upper) {
  const int nx = L.nx(), d = L.npos;
  const Vec lo = o.lo.array() - kMargin, hi = o.hi.array() + kMargin;
  std::vector<Vec> rows;
  std::vector<double> rhs;
  for (int i = 0; i < d; ++i) {
    Vec r = Vec::Zero(nx);
    r(i) = 1.0;
    rows.push_back(r);
    rhs.push_back(hi(i));
    rows.push_back(-r);
    rhs.push_back(-lo(i));
  }
  // distance to face (a, up): up ? hi_a - y_a : y_a - lo_a, written as s * y_a + c.
  auto face = [&](int a, bool up, Vec& s, double& c) {
    s = Vec::Zero(nx);
    s(a) = up ? -1.0 : 1.0;
    c = up ? hi(a) : -lo(a);
  };
  Vec sf;
  double cf;
  face(axis, upper, sf, cf);
  for (int a = 0; a < d; ++a) {
    for (bool up : {false, true}) {
      if (a == axis && up == upper) continue;
      Vec sg;
      double cg;
      face(a, up, sg, cg);
      rows.push_back(sf - sg);
      rhs.push_back(cg - cf);
    }
  }
  Mat H(static_cast<int>(rows.size()), nx);
  for (std::size_t k = 0; k < rows.size(); ++k) H.row(static_cast<int>(k)) = rows[k].transpose();
  return json{{"H", jmat(H)}, {"h", rhs}};
}

}  // namespace

json generate_instance(const InstanceSpec& spec) {
  const Layout L = layout(spec.dimension);
  const int nx = L.nx(), d = L.npos, nu = d;
  if (spec.obstacles < 0) throw Error("bench: obstacle count must be non-negative");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  // X_init and the goal first, then obstacles scattered around the segment between them;
  // the whole layout is redrawn when an obstacle cannot be placed.
  Vec init_lo(d), goal(d), init_hi(d);
  std::vector<Obstacle> obstacles;
  bool placed = false;
  for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
    bool endpoints = false;
    for (int k = 0; k < kRetries && !endpoints; ++k) {
      for (int i = 0; i < d; ++i) init_lo(i) = uniform(kLo + 0.5, kHi - 1.5);
      for (int i = 0; i < d; ++i) goal(i) = uniform(kLo + 0.5, kHi - 0.5);
      endpoints = (goal - (init_lo.array() + 0.5).matrix()).norm() >= 5.0;
    }
    if (!endpoints) continue;
    init_hi = init_lo.array() + 1.0;
    const Vec init_c = init_lo.array() + 0.5;
    obstacles.clear();
    placed = true;
    for (int n = 0; n < spec.obstacles && placed; ++n) {
      bool ok = false;
      for (int k = 0; k < kRetries && !ok; ++k) {
        const double t = uniform(0.25, 0.75);
        Obstacle o{Vec(d), Vec(d)};
        for (int i = 0; i < d; ++i) {
          const double size = uniform(1.0, 2.5);
          const double c = init_c(i) + t * (goal(i) - init_c(i)) + uniform(-1.25, 1.25);
          o.lo(i) = std::clamp(c - 0.5 * size, kLo, kHi - size);
          o.hi(i) = o.lo(i) + size;
        }
        ok = !overlaps(o.lo, o.hi, init_lo, init_hi, kMargin) && !overlaps(o.lo, o.hi, goal, goal, kMargin);
        for (const auto& p : obstacles) ok = ok && !overlaps(o.lo, o.hi, p.lo, p.hi, kMargin);
        if (ok) obstacles.push_back(o);
      }
      placed = ok;
    }
  }
  if (!placed) throw Error("bench: infeasible layout after " + std::to_string(kRetries) + " attempts");

  // Dynamics.
  Mat A = Mat::Identity(nx, nx), B = Mat::Zero(nx, nu), E;
  int nw;
  if (L.nvel == 0) {
    B.topRows(d) = 0.25 * Mat::Identity(d, d);
    nw = d;
    E = Mat::Identity(nx, nw);
  } else {
    const double dt = 0.2;
    A.block(0, d, d, d) = dt * Mat::Identity(d, d);
    B.topRows(d) = 0.5 * dt * dt * Mat::Identity(d, d);
    B.middleRows(d, d) = dt * Mat::Identity(d, d);
    nw = 3;
    E = Mat::Zero(nx, nw);
    E.middleRows(d, d) = dt * Mat::Identity(d, d);
    if (L.nstable > 0) A.bottomRightCorner(L.nstable, L.nstable) = 0.9 * Mat::Identity(L.nstable, L.nstable);
  }
  const Vec w_half = Vec::Constant(nw, L.nvel == 0 ? 0.05 : 0.25);
  Vec v_half(nx), dom_lo(nx), dom_hi(nx), x0_lo(nx), x0_hi(nx), safe_lo(nx), safe_hi(nx);
  for (int i = 0; i < nx; ++i) {
    if (i < d) {
      v_half(i) = L.nvel == 0 ? 0.2 : 0.1;
      dom_lo(i) = kDomainLo;
      dom_hi(i) = kDomainHi;
      x0_lo(i) = init_lo(i);
      x0_hi(i) = init_hi(i);
      safe_lo(i) = kLo;
      safe_hi(i) = kHi;
    } else if (i < d + L.nvel) {
      v_half(i) = 0.05;
      dom_lo(i) = -3.0;
      dom_hi(i) = 3.0;
      x0_lo(i) = -0.1;
      x0_hi(i) = 0.1;
      safe_lo(i) = -3.0;
      safe_hi(i) = 3.0;
    } else {
      v_half(i) = 0.05;
      dom_lo(i) = -1.0;
      dom_hi(i) = 1.0;
      x0_lo(i) = -0.1;
      x0_hi(i) = 0.1;
      safe_lo(i) = -1.0;
      safe_hi(i) = 1.0;
    }
  }

  std::ostringstream name;
  name << "bench_d" << spec.dimension << "_o" << spec.obstacles << "_s" << spec.seed;
  json doc;
  doc["name"] = name.str();
  doc["comment"] = "generated instance; go-to-goal controller with avoidance bands";
  doc["system"] = {{"modes", json::array({json{{"label", 0}, {"A", jmat(A)}, {"B", jmat(B)},
                                              {"K", jvec(Vec::Zero(nx))}, {"E", jmat(E)}}})},
                   {"C", jmat(Mat::Identity(nx, nx))},
                   {"F", jmat(Mat::Identity(nx, nx))}};
  doc["uncertainty"] = {{"W", jbox(-w_half, w_half)}, {"V", jbox(-v_half, v_half)}};
  doc["control"] = {{"U", jbox(Vec::Constant(nu, -1.0), Vec::Constant(nu, 1.0))}};
  json sets{{"domain", jbox(dom_lo, dom_hi)}, {"X_init", jbox(x0_lo, x0_hi)}};
  if (obstacles.empty()) {
    sets["X_safe"] = jbox(safe_lo, safe_hi);
  } else {
    json list = json::array();
    for (const auto& o : obstacles) {
      Vec lo = dom_lo, hi = dom_hi;
      lo.head(d) = o.lo;
      hi.head(d) = o.hi;
      list.push_back(jbox(lo, hi));
    }
    sets["X_unsafe"] = list;
  }
  doc["sets"] = sets;

  json pieces = json::array();
  for (const auto& o : obstacles) {
    for (int a = 0; a < d; ++a) {
      for (bool up : {false, true}) {
        Vec push = Vec::Zero(nu);
        push(a) = up ? kPush : -kPush;
        pieces.push_back({{"region", sector_region(L, o, a, up)}, {"law", go_to_goal_law(L, goal, push)}});
      }
    }
  }
  doc["controller"] = {{"type", "piecewise"}, {"pieces", pieces}, {"fallback", go_to_goal_law(L, goal, Vec::Zero(nu))}};
  // Same smallest piece side for every input dimension.
  doc["engine"] = {{"k_max", 60}, {"delta", 0.5 * std::sqrt(nu / 2.0)}, {"seed", spec.seed}, {"backend", "auto"}};
  if (spec.mismatch > 0.0) {
    // p = clamp(0.01 m |x_pos|^2, -m, m), entering the first state.
    Mat M = Mat::Zero(nx, nx);
    M.topLeftCorner(d, d) = 0.01 * spec.mismatch * Mat::Identity(d, d);
    Mat Pm = Mat::Zero(nx, 1);
    Pm(0, 0) = 1.0;
    doc["mismatch"] = {{"Pm", jmat(Pm)},
                       {"P", jbox(Vec::Constant(1, -spec.mismatch), Vec::Constant(1, spec.mismatch))},
                       {"injection", {{"type", "quadratic"}, {"M", json::array({jmat(M)})}, {"bound", {spec.mismatch}}}},
                       {"oracle", "model"}};
  }
  doc["plot"] = {{"axes", {0, 1}}};
  return doc;
}

BaselineResult random_baseline(const sys::Plant& plant, ctrl::Controller& controller, const Vec& x0, int runs,
                               int horizon, std::uint64_t seed, const std::vector<HPolytope>& unsafe) {
  BaselineResult r;
  r.runs = runs;
  std::mt19937_64 rng(seed);
  const auto& unc = plant.uncertainty();
  const auto& sys = plant.system();
  for (int k = 0; k < runs; ++k) {
    Vec x = x0;
    bool hit = false;
    for (int t = 0; t < horizon && !hit; ++t) {
      const Vec v = unc.V.sample(x, rng);
      const Vec w = unc.W.sample(x, rng);
      if (!unc.V.contains(x, v) || !unc.W.contains(x, w)) ++r.membership_failures;
      const Vec u0 = Vec::Zero(sys.nu());
      const auto out = controller.query(plant.measure(x, u0, v));
      int mode = 0;
      if (out.mode_label) mode = sys.mode_index(*out.mode_label);
      x = plant.concrete_step(x, mode, plant.control().clamp(out.u), w);
      for (const auto& X : unsafe) hit = hit || X.contains(x);
    }
    r.violations += hit;
  }
  return r;
}

Row run_instance(const json& instance, int runs, const std::string& out_dir) {
  using Clock = std::chrono::steady_clock;
  Row row;
  row.name = instance.value("name", std::string("instance"));
  try {
    const io::Problem pr = io::parse_problem(instance);
    row.dimension = pr.plant.system().nx();
    row.obstacles = instance.at("sets").contains("X_unsafe") ? static_cast<int>(instance["sets"]["X_unsafe"].size()) : 0;
    row.seed = pr.engine.seed;
    row.backend = dual::to_string(engine::resolve_backend(pr.plant, pr.engine));
    auto ctrl = pr.make_controller();
    const auto t0 = Clock::now();
    const engine::RunResult run = engine::find_adversarial_scenario(pr.plant, *ctrl, pr.X_init, pr.targets, pr.engine);
    row.engine_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    row.queries = run.query_count;
    std::optional<replay::Report> rep;
    if (run.scenario) {
      auto fresh = pr.make_controller();
      rep = replay::validate(pr.plant, *fresh, *run.scenario, pr.violation());
      row.replay_ok = rep->ok();
      row.N = run.scenario->N;
      row.T = run.scenario->T;
      row.status = run.scenario->from_init ? "from_init" : "partial";
      const auto t1 = Clock::now();
      auto sim = pr.make_controller();
      const BaselineResult b = random_baseline(pr.plant, *sim, run.scenario->x0, runs, std::max(2 * row.T, 1),
                                               pr.engine.seed + 1, pr.X_unsafe);
      row.baseline_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
      row.baseline_runs = b.runs;
      row.baseline_violations = b.violations;
    } else {
      row.status = "failed";
      for (const auto& t : run.targets) {
        if (!t.error.empty()) row.error = t.error;
      }
    }
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      io::write_json(out_dir + "/instance.json", instance);
      io::write_json(out_dir + "/report.json", io::report_to_json(pr, run, rep ? &*rep : nullptr));
      if (run.scenario) io::write_json(out_dir + "/scenario.json", io::scenario_to_json(*run.scenario, io::config_hash(instance)));
    }
  } catch (const Error& e) {
    row.status = "failed";
    row.error = e.what();
  }
  return row;
}

std::string rows_csv(const std::vector<Row>& rows) {
  std::ostringstream out;
  out << "name,dimension,obstacles,seed,backend,status,success,replay_ok,N,T,baseline_violations,baseline_runs,queries,"
         "engine_seconds,baseline_seconds,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << r.name << "," << r.dimension << "," << r.obstacles << "," << r.seed << "," << r.backend << "," << r.status
        << "," << (r.status == "from_init" ? "yes" : "no") << "," << (r.replay_ok ? "yes" : "no") << "," << r.N << ","
        << r.T << "," << r.baseline_violations << "," << r.baseline_runs << "," << r.queries << "," << r.engine_seconds
        << "," << r.baseline_seconds << "," << err << "\n";
  }
  return out.str();
}

json rows_json(const std::vector<Row>& rows) {
  json a = json::array();
  for (const auto& r : rows) {
    a.push_back({{"name", r.name},
                 {"dimension", r.dimension},
                 {"obstacles", r.obstacles},
                 {"seed", r.seed},
                 {"backend", r.backend},
                 {"status", r.status},
                 {"success", r.status == "from_init"},
                 {"replay_ok", r.replay_ok},
                 {"N", r.N},
                 {"T", r.T},
                 {"baseline_violations", r.baseline_violations},
                 {"baseline_runs", r.baseline_runs},
                 {"queries", r.queries},
                 {"engine_seconds", r.engine_seconds},
                 {"baseline_seconds", r.baseline_seconds},
                 {"error", r.error}});
  }
  return json{{"instances", a}};
}

}  // namespace falsify::bench
