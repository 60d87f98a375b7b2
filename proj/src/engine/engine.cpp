#include "falsify/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>

namespace falsify::engine {

using geom::Zonotope;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const Vec& v) {
  std::ostringstream s;
  s.precision(17);
  s << "[";
  for (int i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v(i);
  s << "]";
  return s.str();
}

std::vector<Vec> p_vertices(const sys::Plant& plant) {
  const auto& mm = plant.mismatch();
  if (!mm || mm->np() == 0) return {Vec(0)};
  return mm->P.vertices;
}

std::vector<Vec> q_offsets(const sys::Plant& plant) {
  const auto& mm = plant.mismatch();
  if (!mm || mm->nq() == 0) return {Vec::Zero(plant.system().nx())};
  std::vector<Vec> out;
  for (const Vec& q : mm->Q.vertices) out.push_back(mm->Qm * q);
  return out;
}

Vec p_term(const sys::Plant& plant, const Vec& p) {
  if (p.size() == 0) return Vec::Zero(plant.system().nx());
  return plant.mismatch()->Pm * p;
}

// Per-row worst case of H Qm q.
Vec worst_q_offset(const Mat& H, const sys::Plant& plant) {
  Vec off = Vec::Zero(H.rows());
  const auto& mm = plant.mismatch();
  if (!mm || mm->nq() == 0) return off;
  off.setConstant(-lp::kInf);
  const Mat HQ = H * mm->Qm;
  for (const Vec& q : mm->Q.vertices) off = off.cwiseMax(HQ * q);
  return off;
}

int resolve_mode(const sys::Plant& plant, const ctrl::ControlOutput& out) {
  if (out.mode_label) return plant.system().mode_index(*out.mode_label);
  if (plant.system().num_modes() != 1) throw Error("controller returned no mode for a switched plant");
  return 0;
}

bool meets(const ConvexSet& X, const HPolytope& P) {
  if (X.is_empty_marker()) return false;
  if (const HPolytope* H = X.polytope()) return !H->intersect(P).is_empty();
  return geom::intersection_point(*X.zonotope(), P).has_value();
}

// min ||z - x'||_1 over z in X and x' in P.
double distance_to(const ConvexSet& X, const HPolytope& P) {
  if (const HPolytope* H = X.polytope()) return geom::distance_1norm(*H, P);
  const Zonotope& Z = *X.zonotope();
  const int n = Z.dim();
  lp::Builder b;
  const int th = b.add_variables(Z.order(), -1.0, 1.0);
  const int x = b.add_variables(n);
  const int t = b.add_variables(n, 0.0, lp::kInf);
  if (P.rows() > 0) b.add_le_block({{x, P.A}}, P.b);
  const Mat I = Mat::Identity(n, n);
  b.add_le_block({{th, Z.G}, {x, Mat(-I)}, {t, Mat(-I)}}, -Z.c);
  b.add_le_block({{th, Mat(-Z.G)}, {x, I}, {t, Mat(-I)}}, Z.c);
  for (int i = 0; i < n; ++i) b.set_objective(t + i, 1.0);
  const auto s = b.solve(lp::Sense::minimize);
  if (!s.optimal()) return lp::kInf;
  return s.objective_value;
}

double point_distance(const Vec& x, const HPolytope& P) {
  return geom::distance_1norm(HPolytope::box(x, x), P);
}

Vec centre_of(const ConvexSet& X, const HPolytope* X_init, bool* inside) {
  *inside = false;
  if (const HPolytope* H = X.polytope()) {
    if (X_init) {
      const HPolytope both = H->intersect(*X_init);
      if (!both.is_empty()) {
        *inside = true;
        return both.chebyshev_center().center;
      }
    }
    return H->chebyshev_center().center;
  }
  const Zonotope& Z = *X.zonotope();
  if (X_init) {
    if (auto p = geom::deep_point(Z, *X_init)) {
      *inside = true;
      return *p;
    }
  }
  return Z.c;
}

// v in V(x) with C x + F v = ybar, nudged by ulps so that measure() returns ybar.
Vec exact_noise(const sys::Plant& plant, const Vec& x, const Vec& ybar, const Vec& u) {
  const auto& sys = plant.system();
  const auto& V = plant.uncertainty().V;
  const int nv = sys.nv(), ny = sys.ny();
  const Vec r = ybar - sys.C() * x - sys.D() * u;
  Vec v;
  const bool identity = nv == ny && sys.F().isIdentity(0.0);
  if (identity) {
    v = r;
  } else {
    lp::Builder b;
    const int vv = b.add_variables(nv);
    b.add_eq_block({{vv, sys.F()}}, r);
    if (V.Hz().rows() > 0) b.add_le_block({{vv, V.Hz()}}, V.h() - V.Hx() * x);
    const auto s = b.solve(lp::Sense::feasibility);
    if (!s.optimal()) throw Error("forward: no noise reproduces the query point at x = " + fmt(x));
    v = s.point.segment(vv, nv);
  }
  if (identity) {
    for (int it = 0; it < 64; ++it) {
      const Vec y = plant.measure(x, u, v);
      if (y == ybar) break;
      for (int i = 0; i < ny; ++i) {
        if (y(i) != ybar(i)) v(i) = std::nextafter(v(i), y(i) < ybar(i) ? lp::kInf : -lp::kInf);
      }
    }
  }
  return v;
}

// q in Q with Qm q = residual, as close as the LP allows.
Vec match_q(const sys::Plant& plant, const Vec& residual) {
  const auto& mm = *plant.mismatch();
  if (mm.nq() == 0) return Vec(0);
  const auto& verts = mm.Q.vertices;
  const int m = static_cast<int>(verts.size()), n = static_cast<int>(residual.size());
  Mat QV(n, m);
  for (int k = 0; k < m; ++k) QV.col(k) = mm.Qm * verts[k];
  lp::Builder b;
  const int lam = b.add_variables(m, 0.0, lp::kInf);
  const int t = b.add_variables(1, 0.0, lp::kInf);
  std::vector<lp::Builder::Term> sum;
  for (int k = 0; k < m; ++k) sum.push_back({lam + k, 1.0});
  b.add_eq(sum, 1.0);
  b.add_le_block({{lam, QV}, {t, Mat(-Mat::Ones(n, 1))}}, residual);
  b.add_le_block({{lam, Mat(-QV)}, {t, Mat(-Mat::Ones(n, 1))}}, -residual);
  b.set_objective(t, 1.0);
  const auto s = b.solve(lp::Sense::minimize);
  if (!s.optimal()) throw Error("forward: no q matches the oracle");
  Vec q = Vec::Zero(mm.nq());
  for (int k = 0; k < m; ++k) q += s.point(lam + k) * verts[k];
  return q;
}

}  // namespace

const char* to_string(AlternatingStatus s) {
  switch (s) {
    case AlternatingStatus::reached_init: return "reached_init";
    case AlternatingStatus::frame_died: return "frame_died";
    case AlternatingStatus::exhausted: return "exhausted";
    case AlternatingStatus::k_max: return "k_max";
  }
  return "?";
}

Backend resolve_backend(const sys::Plant& plant, const EngineConfig& cfg) {
  if (cfg.backend == BackendChoice::polytope) return Backend::polytope;
  if (cfg.backend == BackendChoice::zonotope) return Backend::zonotope;
  const auto& sys = plant.system();
  const int np = static_cast<int>(p_vertices(plant).size());
  const int lifted = sys.nx() + sys.nv() + np * sys.nw();
  if (lifted <= cfg.max_total_dim && sys.nx() + sys.nw() <= cfg.max_total_dim) return Backend::polytope;
  try {
    dual::check_backend(plant, Backend::zonotope);
  } catch (const Error&) {
    return Backend::polytope;
  }
  return Backend::zonotope;
}

dual::BackendOptions backend_options(const sys::Plant& plant, const EngineConfig& cfg, Backend backend) {
  dual::BackendOptions o;
  o.backend = backend;
  o.projection.max_total_dim = cfg.max_total_dim;
  const int nx = plant.system().nx();
  o.zonotope.max_generators = cfg.max_generators > 0 ? cfg.max_generators : (nx <= 4 ? 2 * nx : nx);
  return o;
}

std::optional<Box> observation_box(const sys::Plant& plant) {
  if (!plant.domain()) return std::nullopt;
  const Box& d = *plant.domain();
  const Mat& C = plant.system().C();
  const Vec c = C * d.center();
  const Vec r = C.cwiseAbs() * (0.5 * (d.hi - d.lo));
  return Box{c - r, c + r};
}

ObservationSet::ObservationSet(const sys::Plant& plant, ConvexSet frame, std::vector<Vec> controls,
                               std::optional<Box> observation_box)
    : plant_(&plant), frame_(std::move(frame)), controls_(std::move(controls)), ybox_(std::move(observation_box)) {}

int ObservationSet::build(lp::Builder& b) const {
  const auto& sys = plant_->system();
  const auto& W = plant_->uncertainty().W;
  const auto& V = plant_->uncertainty().V;
  const int nx = sys.nx(), nv = sys.nv(), nw = sys.nw(), ny = sys.ny();
  const auto& dom = plant_->domain();
  const auto ps = p_vertices(*plant_);

  const int y = b.add_variables(ny);
  if (ybox_) {
    for (int i = 0; i < ny; ++i) b.set_bounds(y + i, ybox_->lo(i), ybox_->hi(i));
  }
  const HPolytope* H = frame_.polytope();
  const Zonotope* Z = frame_.zonotope();
  Vec h_tight;
  if (H) h_tight = H->b - worst_q_offset(H->A, *plant_);
  const auto qs = q_offsets(*plant_);

  for (int s = 0; s < sys.num_modes(); ++s) {
    const auto& m = sys.mode(s);
    for (const Vec& u : controls_) {
      const int x = b.add_variables(nx);
      if (dom) {
        for (int i = 0; i < nx; ++i) b.set_bounds(x + i, dom->lo(i), dom->hi(i));
      }
      const int v = b.add_variables(nv);
      // C x + F v - y = -D u
      b.add_eq_block({{x, sys.C()}, {v, sys.F()}, {y, Mat(-Mat::Identity(ny, ny))}}, -sys.D() * u);
      if (V.Hz().rows() > 0) b.add_le_block({{x, V.Hx()}, {v, V.Hz()}}, V.h());
      for (const Vec& p : ps) {
        const int w = b.add_variables(nw);
        if (W.Hz().rows() > 0) b.add_le_block({{x, W.Hx()}, {w, W.Hz()}}, W.h());
        const Vec base = m.B * u + m.K + p_term(*plant_, p);
        if (H) {
          b.add_le_block({{x, Mat(H->A * m.A)}, {w, Mat(H->A * m.E)}}, h_tight - H->A * base);
        } else {
          for (const Vec& qq : qs) {
            const int xi = b.add_variables(Z->order(), -1.0, 1.0);
            b.add_eq_block({{x, m.A}, {w, m.E}, {xi, Mat(-Z->G)}}, Z->c - base - qq);
          }
        }
      }
    }
  }
  return y;
}

std::optional<Vec> ObservationSet::witness() const {
  if (frame_.is_empty_marker()) return std::nullopt;
  lp::Builder b;
  const int y = build(b);
  const auto s = b.solve(lp::Sense::feasibility);
  if (!s.optimal()) return std::nullopt;
  return Vec(s.point.segment(y, plant_->system().ny()));
}

bool ObservationSet::contains(const Vec& yq) const {
  if (frame_.is_empty_marker()) return false;
  lp::Builder b;
  const int y = build(b);
  for (int i = 0; i < yq.size(); ++i) b.set_bounds(y + i, yq(i), yq(i));
  return b.solve(lp::Sense::feasibility).optimal();
}

std::optional<Vec> ObservationSet::closest_to(const HPolytope& X_init) const {
  if (frame_.is_empty_marker()) return std::nullopt;
  const auto& sys = plant_->system();
  const auto& V = plant_->uncertainty().V;
  const int nx = sys.nx(), nv = sys.nv(), ny = sys.ny();
  lp::Builder b;
  const int y = build(b);
  const int x = b.add_variables(nx);
  if (plant_->domain()) {
    for (int i = 0; i < nx; ++i) b.set_bounds(x + i, plant_->domain()->lo(i), plant_->domain()->hi(i));
  }
  const int v = b.add_variables(nv);
  b.add_eq_block({{x, sys.C()}, {v, sys.F()}, {y, Mat(-Mat::Identity(ny, ny))}}, Vec::Zero(ny));
  if (V.Hz().rows() > 0) b.add_le_block({{x, V.Hx()}, {v, V.Hz()}}, V.h());
  const int xi = b.add_variables(nx);
  if (X_init.rows() > 0) b.add_le_block({{xi, X_init.A}}, X_init.b);
  const int t = b.add_variables(nx, 0.0, lp::kInf);
  const Mat I = Mat::Identity(nx, nx);
  b.add_le_block({{x, I}, {xi, Mat(-I)}, {t, Mat(-I)}}, Vec::Zero(nx));
  b.add_le_block({{x, Mat(-I)}, {xi, I}, {t, Mat(-I)}}, Vec::Zero(nx));
  for (int i = 0; i < nx; ++i) b.set_objective(t + i, 1.0);
  const auto s = b.solve(lp::Sense::minimize);
  if (!s.optimal()) return std::nullopt;
  return Vec(s.point.segment(y, ny));
}

std::optional<Vec> ObservationSet::approximate_center() const {
  if (frame_.is_empty_marker()) return std::nullopt;
  const int ny = plant_->system().ny();
  Vec sum = Vec::Zero(ny);
  for (int i = 0; i < ny; ++i) {
    for (double sgn : {1.0, -1.0}) {
      lp::Builder b;
      const int y = build(b);
      b.set_objective(y + i, sgn);
      const auto s = b.solve(lp::Sense::maximize);
      if (!s.optimal()) return std::nullopt;
      sum += s.point.segment(y, ny);
    }
  }
  return Vec(sum / (2.0 * ny));
}

EpreY epre_y(const sys::Plant& plant, const ConvexSet& X, const Box& piece) {
  EpreY r{std::nullopt, ObservationSet(plant, X, geom::VPolytope::box(piece.lo, piece.hi).vertices,
                                       observation_box(plant))};
  r.witness = r.set.witness();
  return r;
}

Vec select_query_point(const ObservationSet& Y, const HPolytope& X_init, double beta) {
  auto close = Y.closest_to(X_init);
  if (!close) close = Y.witness();
  if (!close) throw Error("query point: the observation set is empty");
  const auto centre = Y.approximate_center();
  if (!centre) return *close;
  const Vec blend = beta * *close + (1.0 - beta) * *centre;
  if (Y.contains(blend)) return blend;
  return *close;
}

ConvexSet pre_y_pi(const sys::Plant& plant, const ConvexSet& X, const Vec& ybar, int mode, const Vec& u,
                   const dual::BackendOptions& options, const std::optional<HPolytope>& invariant) {
  const auto& sys = plant.system();
  const auto& m = sys.mode(mode);
  const int nx = sys.nx(), nv = sys.nv(), nw = sys.nw(), ny = sys.ny();
  if (X.is_empty()) return ConvexSet::empty(nx);
  const auto& dom = plant.domain();

  if (options.backend == Backend::polytope) {
    const ConvexSet Xp = dual::to_backend(X, Backend::polytope);
    const HPolytope& H = *Xp.polytope();
    const auto& W = plant.uncertainty().W;
    const auto& V = plant.uncertainty().V;
    const auto ps = p_vertices(plant);
    const int np = static_cast<int>(ps.size());
    const int n = nx + nv + np * nw;
    geom::LinearSystem ls(n);
    const Vec h_tight = H.b - worst_q_offset(H.A, plant);
    for (int k = 0; k < np; ++k) {
      const int w = nx + nv + k * nw;
      Mat rows = Mat::Zero(H.rows(), n);
      rows.leftCols(nx) = H.A * m.A;
      rows.middleCols(w, nw) = H.A * m.E;
      ls.add_ineq(rows, h_tight - H.A * (m.B * u + m.K + p_term(plant, ps[k])));
      Mat wr = Mat::Zero(W.Hz().rows(), n);
      wr.leftCols(nx) = W.Hx();
      wr.middleCols(w, nw) = W.Hz();
      ls.add_ineq(wr, W.h());
    }
    Mat vr = Mat::Zero(V.Hz().rows(), n);
    vr.leftCols(nx) = V.Hx();
    vr.middleCols(nx, nv) = V.Hz();
    ls.add_ineq(vr, V.h());
    Mat eq = Mat::Zero(ny, n);
    eq.leftCols(nx) = sys.C();
    eq.middleCols(nx, nv) = sys.F();
    ls.add_eq(eq, ybar - sys.D() * u);
    if (dom) {
      const HPolytope box = HPolytope::from_box(*dom);
      ls.add_ineq_block(0, box.A, box.b);
    }
    std::vector<int> keep(nx);
    for (int i = 0; i < nx; ++i) keep[i] = i;
    auto proj = geom::project(ls, keep, options.projection);
    if (!proj) return ConvexSet::empty(nx);
    HPolytope out = *proj;
    if (invariant) out = out.intersect(*invariant);
    if (out.is_empty()) return ConvexSet::empty(nx);
    return ConvexSet(geom::remove_redundancy(out));
  }

  dual::check_backend(plant, Backend::zonotope);
  const ConvexSet Xz = dual::to_backend(X, Backend::zonotope, options.zonotope);
  if (Xz.is_empty_marker()) return Xz;
  const auto& mm = plant.mismatch();
  const Vec zero = Vec::Zero(nx);
  Zonotope Z = *Xz.zonotope();
  if (mm && mm->nq() > 0) {
    auto shrunk = geom::minkowski_difference_under(Z, geom::affine_map(*mm->Q_zonotope, mm->Qm, zero), options.zonotope);
    if (!shrunk) return ConvexSet::empty(nx);
    Z = *shrunk;
  }
  Z = geom::minkowski_sum(Z, geom::affine_map(*plant.uncertainty().W.zonotope(), Mat(-m.E), zero));
  if (mm && mm->np() > 0) {
    auto diff = geom::minkowski_difference_under(Z, geom::affine_map(*mm->P_zonotope, mm->Pm, zero), options.zonotope);
    if (!diff) return ConvexSet::empty(nx);
    Z = *diff;
  }
  const Mat Ainv = m.A.inverse();
  Z = geom::affine_map(Z, Ainv, Vec(-Ainv * (m.B * u + m.K)));
  // x = ybar - F v, v in V  (C = I, D = 0)
  const Zonotope& Vz = *plant.uncertainty().V.zonotope();
  const Zonotope consistent(Mat(-sys.F() * Vz.G), Vec(ybar - sys.F() * Vz.c));
  auto both = geom::zonotope_intersection_under({Z, consistent}, options.zonotope);
  if (!both) return ConvexSet::empty(nx);
  HPolytope clip_to = dom ? HPolytope::from_box(*dom) : HPolytope::universe(nx);
  if (invariant) clip_to = clip_to.intersect(*invariant);
  if (clip_to.rows() == 0) return ConvexSet(*both);
  auto out = geom::zonotope_polytope_intersection_under(*both, clip_to, options.zonotope);
  if (!out) return ConvexSet::empty(nx);
  return ConvexSet(*out);
}

RefineResult refine_and_query(const sys::Plant& plant, ctrl::Controller& controller, const ConvexSet& X,
                              const HPolytope& X_init, const EngineConfig& cfg) {
  RefineResult r;
  const auto& U = plant.control();
  const Box root = U.box() ? *U.box() : U.vertices().bounding_box();
  std::deque<Box> queue{root};
  while (!queue.empty()) {
    Box piece = queue.front();
    queue.pop_front();
    ++r.pieces_tried;
    const EpreY e = epre_y(plant, X, piece);
    bool split = !e.witness.has_value();
    if (e.witness) {
      const Vec ybar = select_query_point(e.set, X_init, cfg.beta);
      const ctrl::ControlOutput out = controller.query(ybar);
      const int mode = resolve_mode(plant, out);
      const Vec u = U.clamp(out.u);
      if (piece.contains(u, 1e-9)) {
        r.accepted = Query{ybar, mode, u, out.u, piece, r.rejections};
        return r;
      }
      ++r.rejections;
      split = true;
    }
    if (split && (piece.hi - piece.lo).norm() > cfg.delta) {
      Eigen::Index axis = 0;
      (piece.hi - piece.lo).maxCoeff(&axis);
      const double mid = 0.5 * (piece.lo(axis) + piece.hi(axis));
      Box a = piece, b = piece;
      a.hi(axis) = mid;
      b.lo(axis) = mid;
      queue.push_back(a);
      queue.push_back(b);
    }
  }
  return r;
}

AlternatingResult alternating_backward(const sys::Plant& plant, ctrl::Controller& controller, const ConvexSet& X0,
                                       const HPolytope& X_init, const EngineConfig& cfg, Backend backend,
                                       const std::optional<HPolytope>& invariant, int dual_depth, int min_time) {
  AlternatingResult r;
  const dual::BackendOptions opt = backend_options(plant, cfg, backend);
  BackreachFrame f0;
  f0.X = dual::to_backend(X0, backend, opt.zonotope);
  f0.backend = backend;
  r.frames.push_back(f0);
  for (int k = 0;; ++k) {
    const ConvexSet& X = r.frames.back().X;
    if (meets(X, X_init) && k + dual_depth >= min_time) {
      r.status = AlternatingStatus::reached_init;
      break;
    }
    if (k >= cfg.k_max) {
      r.status = AlternatingStatus::k_max;
      break;
    }
    const RefineResult q = refine_and_query(plant, controller, X, X_init, cfg);
    r.rejections += q.rejections;
    if (!q.accepted) {
      r.status = AlternatingStatus::exhausted;
      break;
    }
    ConvexSet next = pre_y_pi(plant, X, q.accepted->y, q.accepted->mode, q.accepted->u, opt, invariant);
    if (next.is_empty()) {
      r.status = AlternatingStatus::frame_died;
      break;
    }
    BackreachFrame f;
    f.k = k + 1;
    f.X = std::move(next);
    f.y_query = q.accepted->y;
    f.mode = q.accepted->mode;
    f.u = q.accepted->u;
    f.u_raw = q.accepted->u_raw;
    f.u_piece = q.accepted->piece;
    f.backend = backend;
    r.frames.push_back(std::move(f));
  }
  return r;
}

Scenario forward_expand(const sys::Plant& plant, ctrl::Controller& controller, const ForwardInput& in,
                        const HPolytope& X_init, std::uint64_t seed) {
  const auto& sys = plant.system();
  const auto& frames = *in.frames;
  if (in.start < 0 || in.start >= static_cast<int>(frames.size())) throw Error("forward: start frame out of range");
  std::mt19937_64 rng(seed);
  Scenario sc;
  sc.seed = seed;
  sc.N = in.start;

  bool inside = false;
  Vec x = centre_of(frames[in.start].X, &X_init, &inside);
  sc.from_init = inside;
  sc.x0 = x;
  sc.x_traj.push_back(x);
  const bool mismatch = plant.mismatch().has_value();
  auto record = [&](const Vec& y, const ctrl::ControlOutput& out, const Vec& u, int mode, const Vec& v,
                    const Vec& w, const Vec& next, Phase phase) {
    if (mismatch) {
      const Vec p = plant.injection(x, mode, u);
      sc.p_seq.push_back(p);
      sc.q_seq.push_back(match_q(plant, next - plant.abstract_step(x, mode, u, w, p, Vec(0))));
    }
    sc.y_traj.push_back(y);
    sc.u_raw.push_back(out.u);
    sc.u_traj.push_back(u);
    sc.s_traj.push_back(sys.mode(mode).label);
    sc.v_seq.push_back(v);
    sc.w_seq.push_back(w);
    sc.phases.push_back(phase);
    x = next;
    sc.x_traj.push_back(x);
  };

  for (int i = in.start; i >= 1; --i) {
    const BackreachFrame& f = frames[i];
    const int t = in.start - i;
    const Vec v = exact_noise(plant, x, *f.y_query, f.u);
    if (!plant.uncertainty().V.contains(x, v)) {
      throw Error("forward: noise " + fmt(v) + " leaves V at t = " + std::to_string(t));
    }
    const Vec y = plant.measure(x, f.u, v);
    const ctrl::ControlOutput out = controller.query(y);
    const int mode = resolve_mode(plant, out);
    const Vec u = plant.control().clamp(out.u);
    if (mode != f.mode || u != f.u) {
      throw Error("forward: controller is not deterministic at t = " + std::to_string(t) + ": y = " + fmt(y) +
                  " gave u = " + fmt(u) + " but the backward pass recorded " + fmt(f.u));
    }
    const Vec p = plant.injection(x, mode, u);
    const auto st = dual::steer_disturbance(plant, frames[i - 1].X, x, mode, u, p);
    if (!st) throw Error("forward: no disturbance reaches frame " + std::to_string(i - 1) + " at t = " + std::to_string(t));
    record(y, out, u, mode, v, st->w, plant.concrete_step(x, mode, u, st->w), Phase::alternating);
  }

  if (in.game && in.dual_start > 0) {
    const auto& game = *in.game;
    auto lowest = [&](int k) {
      const int t = static_cast<int>(sc.w_seq.size());
      for (int j = 0; j < k; ++j) {
        if (t + j >= in.min_time && game.frames[j].contains(x)) return j;
      }
      return k;
    };
    int k = lowest(in.dual_start);
    while (k > 0) {
      const Vec v = plant.uncertainty().V.sample(x, rng);
      const Vec y = plant.measure(x, Vec::Zero(sys.nu()), v);
      const ctrl::ControlOutput out = controller.query(y);
      const int mode = resolve_mode(plant, out);
      const Vec u = plant.control().clamp(out.u);
      const dual::DualMove mv = dual::dual_strategy_step(plant, game, x, k, mode, u);
      record(y, out, u, mode, v, mv.w, mv.next, Phase::dual);
      k = lowest(k - 1);
    }
  }
  sc.T = static_cast<int>(sc.w_seq.size());
  return sc;
}

RunResult find_adversarial_scenario(const sys::Plant& plant, ctrl::Controller& controller, const HPolytope& X_init,
                                    const std::vector<sys::UnsafeTarget>& targets, const EngineConfig& cfg) {
  const auto t_run = Clock::now();
  RunResult best;
  double best_dist = lp::kInf;
  const Backend backend = resolve_backend(plant, cfg);
  dual::check_backend(plant, backend);
  const dual::BackendOptions bopt = backend_options(plant, cfg, backend);

  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    const auto& target = targets[ti];
    const auto t0 = Clock::now();
    TargetReport rep;
    rep.name = target.name;
    rep.backend = backend;
    try {
      dual::DualGameOptions dopt;
      static_cast<dual::BackendOptions&>(dopt) = bopt;
      dopt.k_stop = cfg.k_stop;
      dopt.invariant = target.invariant;
      dual::DualGameResult game = dual::expand(plant, ConvexSet(target.set), dopt);
      rep.dual_stop = game.stop_reason;
      const bool last = cfg.x0_choice == X0Choice::last_dual_frame;
      const int depth = last ? game.K : 0;
      rep.dual_depth = depth;
      AlternatingResult alt = alternating_backward(plant, controller, game.frames[depth], X_init, cfg, backend,
                                                   target.invariant, depth, target.min_time);
      rep.status = alt.status;
      rep.alternating_frames = static_cast<int>(alt.frames.size()) - 1;
      rep.rejections = alt.rejections;

      int start = static_cast<int>(alt.frames.size()) - 1;
      if (alt.status != AlternatingStatus::reached_init) {
        double d_best = lp::kInf;
        int chosen = -1;
        for (int j = 0; j < static_cast<int>(alt.frames.size()); ++j) {
          if (j + depth < target.min_time) continue;
          const double d = distance_to(alt.frames[j].X, X_init);
          if (d <= d_best) {
            d_best = d;
            chosen = j;
          }
        }
        start = chosen >= 0 ? chosen : start;
      }
      ForwardInput in{&alt.frames, start, &game, depth, target.min_time};
      Scenario sc = forward_expand(plant, controller, in, X_init, cfg.seed);
      sc.target = target.name;
      rep.from_init = sc.from_init;
      rep.seconds = seconds_since(t0);
      const double d = sc.from_init ? 0.0 : point_distance(sc.x0, X_init);
      best.targets.push_back(rep);
      if (!best.scenario || (sc.from_init && !best.scenario->from_init) || (!best.scenario->from_init && d < best_dist)) {
        best.scenario = std::move(sc);
        best.chosen = static_cast<int>(ti);
        best.frames = std::move(alt.frames);
        best.game = std::move(game);
        best_dist = d;
      }
      if (best.scenario->from_init) break;
    } catch (const Error& e) {
      rep.error = e.what();
      rep.seconds = seconds_since(t0);
      best.targets.push_back(rep);
    }
  }
  best.query_count = controller.query_count();
  if (best.scenario) best.scenario->query_count = best.query_count;
  best.seconds = seconds_since(t_run);
  return best;
}

}  // namespace falsify::engine
