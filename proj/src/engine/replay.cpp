#include "falsify/replay.hpp"

#include <cmath>
#include <sstream>

namespace falsify::replay {

namespace {

std::string fmt(const geom::Vec& v) {
  std::ostringstream s;
  s.precision(17);
  s << "[";
  for (int i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v(i);
  s << "]";
  return s.str();
}

double gap(const geom::Vec& a, const geom::Vec& b) {
  if (a.size() != b.size()) return INFINITY;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

int resolve_mode(const sys::Plant& plant, const ctrl::ControlOutput& out) {
  if (out.mode_label) return plant.system().mode_index(*out.mode_label);
  if (plant.system().num_modes() != 1) throw Error("controller returned no mode for a switched plant");
  return 0;
}

}  // namespace

Report validate(const sys::Plant& plant, ctrl::Controller& controller, const Scenario& sc, const ViolationSpec& spec,
                const Options& opt) {
  Report r;
  auto fail = [&r](int t, std::string what) { r.failures.push_back({t, std::move(what)}); };
  const auto& sys = plant.system();
  const int T = sc.T;
  const bool mismatch = plant.mismatch().has_value();

  if (sc.x0.size() != sys.nx()) {
    fail(-1, "x0 has the wrong dimension");
    return r;
  }
  if (static_cast<int>(sc.w_seq.size()) != T || static_cast<int>(sc.v_seq.size()) != T) {
    fail(-1, "w_seq and v_seq must both have T entries");
    return r;
  }
  if (static_cast<int>(sc.u_traj.size()) != T) {
    fail(-1, "u trace must have T entries");
    return r;
  }
  if (mismatch && static_cast<int>(sc.q_seq.size()) != T) {
    fail(-1, "mismatch scenario must carry T entries of q");
    return r;
  }
  if (sc.from_init && spec.x_init && !spec.x_init->contains(sc.x0, opt.member_tol)) {
    fail(-1, "x0 = " + fmt(sc.x0) + " is not in X_init although from_init is set");
  }

  geom::Vec x = sc.x0;
  r.x_traj.push_back(x);
  for (int t = 0; t < T; ++t) {
    const geom::Vec& w = sc.w_seq[t];
    const geom::Vec& v = sc.v_seq[t];
    if (v.size() != sys.nv() || !plant.uncertainty().V.contains(x, v, opt.member_tol)) {
      fail(t, "v_t = " + fmt(v) + " is outside V(x_t)");
    }
    if (w.size() != sys.nw() || !plant.uncertainty().W.contains(x, w, opt.member_tol)) {
      fail(t, "w_t = " + fmt(w) + " is outside W(x_t)");
    }
    if (!r.failures.empty() && r.failures.back().t == t) return r;

    const geom::Vec y = plant.measure(x, sc.u_traj[t], v);
    r.y_traj.push_back(y);
    if (t < static_cast<int>(sc.y_traj.size()) && gap(y, sc.y_traj[t]) > opt.state_tol) {
      fail(t, "recorded y_t differs from the measurement " + fmt(y));
    }
    ctrl::ControlOutput out;
    int mode = 0;
    try {
      out = controller.query(y);
      mode = resolve_mode(plant, out);
    } catch (const Error& e) {
      fail(t, std::string("controller query failed: ") + e.what());
      return r;
    }
    const geom::Vec u = plant.control().clamp(out.u);
    if (u.size() != sc.u_traj[t].size() || u != sc.u_traj[t]) {
      fail(t, "re-queried control " + fmt(u) + " differs from the recorded " + fmt(sc.u_traj[t]));
      return r;
    }
    if (t < static_cast<int>(sc.s_traj.size()) && sys.mode(mode).label != sc.s_traj[t]) {
      fail(t, "re-queried mode differs from the recorded one");
      return r;
    }
    if (mismatch) {
      const auto& mm = *plant.mismatch();
      const geom::Vec p = plant.injection(x, mode, u);
      if (t < static_cast<int>(sc.p_seq.size()) && gap(p, sc.p_seq[t]) > opt.state_tol) {
        fail(t, "recorded p_t differs from the injection rule");
      }
      if (mm.nq() > 0 && !mm.Q.contains(sc.q_seq[t], opt.member_tol)) fail(t, "q_t is outside Q");
      const geom::Vec abstract = plant.abstract_step(x, mode, u, w, p, sc.q_seq[t]);
      const geom::Vec concrete = plant.concrete_step(x, mode, u, w);
      if (gap(abstract, concrete) > opt.state_tol) fail(t, "abstraction with (p_t, q_t) does not match the oracle");
      x = concrete;
    } else {
      x = plant.concrete_step(x, mode, u, w);
    }
    r.x_traj.push_back(x);
    if (t + 1 < static_cast<int>(sc.x_traj.size()) && gap(x, sc.x_traj[t + 1]) > opt.state_tol) {
      fail(t, "state recursion differs from the recorded x_{t+1}");
    }
  }

  for (std::size_t i = 0; i < spec.unsafe.size(); ++i) {
    if (spec.unsafe[i].contains(x, opt.member_tol)) {
      r.violation = "unsafe[" + std::to_string(i) + "]";
      break;
    }
  }
  if (r.violation.empty() && spec.target && T >= spec.t_max) {
    bool reached = false;
    for (int t = 0; t <= spec.t_max && t < static_cast<int>(r.x_traj.size()); ++t) {
      reached = reached || spec.target->contains(r.x_traj[t], 0.0);
    }
    if (!reached) r.violation = "deadline";
  }
  if (r.violation.empty()) fail(T, "final state " + fmt(x) + " is not a violation");
  return r;
}

}  // namespace falsify::replay
