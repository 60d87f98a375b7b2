#include "falsify/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace falsify::io {

using geom::ConvexSet;
using geom::Vec;

namespace {

json jvec(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json jvecs(const std::vector<Vec>& vs) {
  json a = json::array();
  for (const Vec& v : vs) a.push_back(jvec(v));
  return a;
}

Vec to_vec(const json& j) {
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

std::vector<Vec> to_vecs(const json& j) {
  std::vector<Vec> out;
  for (const auto& e : j) out.push_back(to_vec(e));
  return out;
}

json jbox(const std::optional<geom::Box>& b) {
  if (!b) return nullptr;
  return json{{"lo", jvec(b->lo)}, {"hi", jvec(b->hi)}};
}

// Finite supports only; unbounded directions become null.
json set_bounds(const ConvexSet& S) {
  if (S.is_empty()) return nullptr;
  const int n = S.dim();
  json lo = json::array(), hi = json::array();
  for (int i = 0; i < n; ++i) {
    Vec d = Vec::Zero(n);
    d(i) = 1.0;
    const double h = S.support(d);
    const double l = -S.support(-d);
    hi.push_back(std::isfinite(h) ? json(h) : json(nullptr));
    lo.push_back(std::isfinite(l) ? json(l) : json(nullptr));
  }
  return json{{"kind", S.polytope() ? "polytope" : "zonotope"}, {"lo", lo}, {"hi", hi}};
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

json scenario_to_json(const Scenario& sc, const std::string& hash) {
  json phases = json::array();
  for (Phase p : sc.phases) phases.push_back(to_string(p));
  json scenario{{"x0", jvec(sc.x0)}, {"w_seq", jvecs(sc.w_seq)}, {"v_seq", jvecs(sc.v_seq)}};
  if (!sc.p_seq.empty() || !sc.q_seq.empty()) {
    scenario["p_seq"] = jvecs(sc.p_seq);
    scenario["q_seq"] = jvecs(sc.q_seq);
  }
  return json{{"scenario", scenario},
              {"traces",
               {{"x", jvecs(sc.x_traj)},
                {"y", jvecs(sc.y_traj)},
                {"u", jvecs(sc.u_traj)},
                {"u_raw", jvecs(sc.u_raw)},
                {"s", sc.s_traj},
                {"phase", phases}}},
              {"metadata",
               {{"N", sc.N},
                {"T", sc.T},
                {"from_init", sc.from_init},
                {"target", sc.target},
                {"seed", sc.seed},
                {"config_hash", hash},
                {"query_count", sc.query_count}}}};
}

Scenario scenario_from_json(const json& doc) {
  Scenario sc;
  try {
    const json& s = doc.at("scenario");
    sc.x0 = to_vec(s.at("x0"));
    sc.w_seq = to_vecs(s.at("w_seq"));
    sc.v_seq = to_vecs(s.at("v_seq"));
    if (s.contains("p_seq")) sc.p_seq = to_vecs(s["p_seq"]);
    if (s.contains("q_seq")) sc.q_seq = to_vecs(s["q_seq"]);
    if (doc.contains("traces")) {
      const json& t = doc["traces"];
      if (t.contains("x")) sc.x_traj = to_vecs(t["x"]);
      if (t.contains("y")) sc.y_traj = to_vecs(t["y"]);
      if (t.contains("u")) sc.u_traj = to_vecs(t["u"]);
      if (t.contains("u_raw")) sc.u_raw = to_vecs(t["u_raw"]);
      if (t.contains("s")) sc.s_traj = t["s"].get<std::vector<int>>();
      if (t.contains("phase")) {
        for (const auto& p : t["phase"]) sc.phases.push_back(p.get<std::string>() == "dual" ? Phase::dual : Phase::alternating);
      }
    }
    const json& m = doc.at("metadata");
    sc.N = m.value("N", 0);
    sc.T = m.at("T").get<int>();
    sc.from_init = m.value("from_init", false);
    sc.target = m.value("target", std::string());
    sc.seed = m.value("seed", std::uint64_t{0});
    sc.query_count = m.value("query_count", std::size_t{0});
  } catch (const json::exception& e) {
    throw SpecError(std::string("scenario: ") + e.what());
  }
  return sc;
}

std::string trace_csv(const Scenario& sc) {
  std::ostringstream out;
  const int nx = static_cast<int>(sc.x0.size());
  const int ny = sc.y_traj.empty() ? 0 : static_cast<int>(sc.y_traj[0].size());
  const int nu = sc.u_traj.empty() ? 0 : static_cast<int>(sc.u_traj[0].size());
  const int nw = sc.w_seq.empty() ? 0 : static_cast<int>(sc.w_seq[0].size());
  const int nv = sc.v_seq.empty() ? 0 : static_cast<int>(sc.v_seq[0].size());
  out << "t";
  for (int i = 0; i < nx; ++i) out << ",x" << i;
  for (int i = 0; i < ny; ++i) out << ",y" << i;
  for (int i = 0; i < nu; ++i) out << ",u" << i;
  out << ",s";
  for (int i = 0; i < nw; ++i) out << ",w" << i;
  for (int i = 0; i < nv; ++i) out << ",v" << i;
  out << ",phase\n";
  for (int t = 0; t <= sc.T && t < static_cast<int>(sc.x_traj.size()); ++t) {
    const bool step = t < sc.T;
    out << t;
    for (int i = 0; i < nx; ++i) out << "," << num(sc.x_traj[t](i));
    for (int i = 0; i < ny; ++i) out << "," << (step ? num(sc.y_traj[t](i)) : "");
    for (int i = 0; i < nu; ++i) out << "," << (step ? num(sc.u_traj[t](i)) : "");
    out << "," << (step ? std::to_string(sc.s_traj[t]) : "");
    for (int i = 0; i < nw; ++i) out << "," << (step ? num(sc.w_seq[t](i)) : "");
    for (int i = 0; i < nv; ++i) out << "," << (step ? num(sc.v_seq[t](i)) : "");
    out << "," << (step ? to_string(sc.phases[t]) : "") << "\n";
  }
  return out.str();
}

json report_to_json(const Problem& problem, const engine::RunResult& run, const replay::Report* rep) {
  json targets = json::array();
  for (const auto& t : run.targets) {
    targets.push_back({{"name", t.name},
                       {"backend", dual::to_string(t.backend)},
                       {"dual_depth", t.dual_depth},
                       {"dual_stop", t.dual_stop},
                       {"alternating_status", engine::to_string(t.status)},
                       {"alternating_frames", t.alternating_frames},
                       {"rejections", t.rejections},
                       {"from_init", t.from_init},
                       {"seconds", t.seconds},
                       {"error", t.error}});
  }
  json frames = json::array();
  for (const auto& f : run.frames) {
    json fj{{"k", f.k}, {"backend", dual::to_string(f.backend)}, {"bounds", set_bounds(f.X)}};
    if (f.y_query) {
      fj["y_query"] = jvec(*f.y_query);
      fj["mode"] = problem.plant.system().mode(f.mode).label;
      fj["u"] = jvec(f.u);
      fj["u_raw"] = jvec(f.u_raw);
      fj["u_piece"] = jbox(f.u_piece);
    }
    frames.push_back(fj);
  }
  json dual_frames = json::array();
  for (const auto& d : run.game.frames) dual_frames.push_back(set_bounds(d));
  std::string status = "failed";
  if (run.scenario) status = run.scenario->from_init ? "from_init" : "partial";
  json r{{"name", problem.name},
         {"status", status},
         {"chosen_target", run.chosen >= 0 ? json(run.targets[run.chosen].name) : json(nullptr)},
         {"targets", targets},
         {"frames", frames},
         {"dual_game", {{"K", run.game.K}, {"stop_reason", run.game.stop_reason}, {"frames", dual_frames}}},
         {"query_count", run.query_count},
         {"seconds", run.seconds}};
  if (run.scenario) r["scenario"] = {{"N", run.scenario->N}, {"T", run.scenario->T}, {"from_init", run.scenario->from_init}};
  if (rep) {
    json failures = json::array();
    for (const auto& f : rep->failures) failures.push_back({{"t", f.t}, {"what", f.what}});
    r["replay"] = {{"ok", rep->ok()}, {"violation", rep->violation}, {"failures", failures}};
  }
  return r;
}

namespace {

struct Frame2 {
  double x0, x1, y0, y1;
};

// Polygon of the 2D projection through support functions, clipped to the window.
std::vector<std::pair<double, double>> projected_polygon(const ConvexSet& S, int ax, int ay, const Frame2& win) {
  constexpr int kDirs = 72;
  const int n = S.dim();
  std::vector<double> h(kDirs);
  std::vector<std::pair<double, double>> dirs(kDirs);
  for (int k = 0; k < kDirs; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kDirs;
    const double cx = std::cos(a), cy = std::sin(a);
    Vec d = Vec::Zero(n);
    d(ax) += cx;
    if (ay != ax) d(ay) += cy;
    double s = S.support(d);
    const double wsup = std::max(cx * win.x0, cx * win.x1) + std::max(cy * win.y0, cy * win.y1);
    if (!std::isfinite(s) || s > wsup) s = wsup;
    h[k] = s;
    dirs[k] = {cx, cy};
  }
  std::vector<std::pair<double, double>> pts;
  for (int k = 0; k < kDirs; ++k) {
    const auto [a1, b1] = dirs[k];
    const auto [a2, b2] = dirs[(k + 1) % kDirs];
    const double det = a1 * b2 - a2 * b1;
    const double h1 = h[k], h2 = h[(k + 1) % kDirs];
    pts.emplace_back((h1 * b2 - h2 * b1) / det, (a1 * h2 - a2 * h1) / det);
  }
  return pts;
}

}  // namespace

std::string plot_svg(const Problem& problem, const std::vector<PlotLayer>& layers, const Scenario* sc) {
  const int ax = problem.axis_x, ay = problem.axis_y;
  Frame2 win{-1, 1, -1, 1};
  if (const auto& d = problem.plant.domain()) {
    win = {d->lo(ax), d->hi(ax), d->lo(ay), d->hi(ay)};
  } else if (sc && !sc->x_traj.empty()) {
    win = {INFINITY, -INFINITY, INFINITY, -INFINITY};
    for (const Vec& x : sc->x_traj) {
      win.x0 = std::min(win.x0, x(ax));
      win.x1 = std::max(win.x1, x(ax));
      win.y0 = std::min(win.y0, x(ay));
      win.y1 = std::max(win.y1, x(ay));
    }
    const double pad = 0.1 * std::max(win.x1 - win.x0, win.y1 - win.y0) + 1e-3;
    win = {win.x0 - pad, win.x1 + pad, win.y0 - pad, win.y1 + pad};
  }
  constexpr double kSize = 600, kMargin = 40;
  const double sx = (kSize - 2 * kMargin) / std::max(win.x1 - win.x0, 1e-12);
  const double sy = (kSize - 2 * kMargin) / std::max(win.y1 - win.y0, 1e-12);
  auto px = [&](double x) { return kMargin + (x - win.x0) * sx; };
  auto py = [&](double y) { return kSize - kMargin - (y - win.y0) * sy; };

  std::ostringstream out;
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize << "\" viewBox=\"0 0 "
      << kSize << " " << kSize << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kSize << "\" height=\"" << kSize << "\" fill=\"white\"/>\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize - 2 * kMargin << "\" height=\""
      << kSize - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto polygon = [&](const ConvexSet& S, const std::string& fill, double opacity) {
    if (S.is_empty()) return;
    out << "<polygon points=\"";
    for (const auto& [x, y] : projected_polygon(S, ax, ay, win)) out << px(x) << "," << py(y) << " ";
    out << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\" stroke=\"" << fill << "\"/>\n";
  };
  polygon(ConvexSet(problem.X_init), "#2a9d8f", 0.25);
  for (const auto& X : problem.X_unsafe) polygon(ConvexSet(X), "#e63946", 0.35);
  if (problem.X_target) polygon(ConvexSet(*problem.X_target), "#90be6d", 0.2);
  for (const auto& layer : layers) {
    for (const auto& S : layer.sets) polygon(S, layer.fill, layer.opacity);
  }
  if (sc && !sc->x_traj.empty()) {
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
    for (const Vec& x : sc->x_traj) out << px(x(ax)) << "," << py(x(ay)) << " ";
    out << "\"/>\n";
    const Eigen::Index ny = sc->y_traj.empty() ? 0 : sc->y_traj[0].size();
    if (ny > std::max(ax, ay)) {
      out << "<polyline fill=\"none\" stroke=\"#457b9d\" stroke-dasharray=\"3,3\" points=\"";
      for (const Vec& y : sc->y_traj) out << px(y(ax)) << "," << py(y(ay)) << " ";
      out << "\"/>\n";
    }
    out << "<circle cx=\"" << px(sc->x0(ax)) << "\" cy=\"" << py(sc->x0(ay)) << "\" r=\"3\" fill=\"black\"/>\n";
  }
  out << "<text x=\"" << kMargin << "\" y=\"" << kSize - 10 << "\" font-size=\"12\">x" << ax << " in [" << win.x0 << ", "
      << win.x1 << "], x" << ay << " in [" << win.y0 << ", " << win.y1 << "]</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace falsify::io
