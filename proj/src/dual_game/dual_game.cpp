#include "falsify/dual_game.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace falsify::dual {

namespace {

// Per-row worst case of H Qm q over the vertices of Q.
Vec worst_q_offset(const Mat& H, const sys::Plant& plant) {
  Vec off = Vec::Zero(H.rows());
  const auto& mm = plant.mismatch();
  if (!mm || mm->nq() == 0) return off;
  const Mat HQ = H * mm->Qm;
  off.setConstant(-lp::kInf);
  for (const Vec& q : mm->Q.vertices) off = off.cwiseMax(HQ * q);
  return off;
}

std::vector<Vec> p_vertices(const sys::Plant& plant) {
  const auto& mm = plant.mismatch();
  if (!mm || mm->np() == 0) return {Vec(0)};
  return mm->P.vertices;
}

Vec p_term(const sys::Plant& plant, const Vec& p) {
  const auto& mm = plant.mismatch();
  if (!mm || p.size() == 0) return Vec::Zero(plant.system().nx());
  return mm->Pm * p;
}

HPolytope epre_polytope(const sys::Plant& plant, const HPolytope& D, const BackendOptions& options,
                        int* combinations) {
  const auto& sys = plant.system();
  const auto& W = plant.uncertainty().W;
  const int nx = sys.nx(), nw = sys.nw();
  const Vec q_off = worst_q_offset(D.A, plant);
  std::vector<int> keep(nx);
  for (int i = 0; i < nx; ++i) keep[i] = i;

  std::vector<HPolytope> pieces;
  int count = 0;
  for (int s = 0; s < sys.num_modes(); ++s) {
    const auto& m = sys.mode(s);
    const Mat HA = D.A * m.A, HE = D.A * m.E;
    for (const Vec& u : plant.control().vertices().vertices) {
      for (const Vec& p : p_vertices(plant)) {
        ++count;
        geom::LinearSystem ls(nx + nw);
        Mat lhs(D.rows(), nx + nw);
        lhs << HA, HE;
        ls.add_ineq(lhs, D.b - D.A * (m.B * u + m.K + p_term(plant, p)) - q_off);
        Mat wl(W.Hz().rows(), nx + nw);
        wl << W.Hx(), W.Hz();
        ls.add_ineq(wl, W.h());
        auto proj = geom::project(ls, keep, options.projection);
        if (!proj) return HPolytope(Mat::Zero(1, nx), Vec::Constant(1, -1.0));
        pieces.push_back(std::move(*proj));
      }
    }
  }
  if (combinations) *combinations = count;
  HPolytope out = pieces.front();
  for (std::size_t k = 1; k < pieces.size(); ++k) out = out.intersect(pieces[k]);
  if (plant.domain()) out = out.intersect(HPolytope::from_box(*plant.domain()));
  if (out.is_empty()) return HPolytope(Mat::Zero(1, nx), Vec::Constant(1, -1.0));
  return geom::remove_redundancy(out);
}

std::optional<Zonotope> epre_zonotope(const sys::Plant& plant, const Zonotope& D, const BackendOptions& options,
                                      int* combinations) {
  const auto& sys = plant.system();
  const auto& Wz = plant.uncertainty().W.zonotope();
  const auto& Uz = plant.control().zonotope();
  const auto& mm = plant.mismatch();
  std::vector<Zonotope> per_mode;
  for (int s = 0; s < sys.num_modes(); ++s) {
    const auto& m = sys.mode(s);
    Zonotope Z = D;
    if (mm && mm->nq() > 0) {
      auto shrunk = geom::minkowski_difference_under(Z, geom::affine_map(*mm->Q_zonotope, mm->Qm, Vec::Zero(sys.nx())),
                                                     options.zonotope);
      if (!shrunk) return std::nullopt;
      Z = *shrunk;
    }
    Z = geom::minkowski_sum(Z, geom::affine_map(*Wz, -m.E, Vec::Zero(sys.nx())));
    Zonotope S = geom::affine_map(*Uz, m.B, Vec::Zero(sys.nx()));
    if (mm && mm->np() > 0) S = geom::minkowski_sum(S, geom::affine_map(*mm->P_zonotope, mm->Pm, Vec::Zero(sys.nx())));
    auto diff = geom::minkowski_difference_under(Z, S, options.zonotope);
    if (!diff) return std::nullopt;
    const Mat Ainv = m.A.inverse();
    per_mode.push_back(geom::affine_map(*diff, Ainv, -Ainv * m.K));
  }
  if (combinations) *combinations = sys.num_modes();
  if (per_mode.size() == 1) {
    if (options.zonotope.max_generators > 0) return geom::reduce_order_inner(per_mode.front(), options.zonotope.max_generators);
    return per_mode.front();
  }
  return geom::zonotope_intersection_under(per_mode, options.zonotope);
}

double max_support_change(const ConvexSet& a, const ConvexSet& b) {
  const int n = a.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (double sgn : {1.0, -1.0}) {
      Vec d = Vec::Zero(n);
      d(i) = sgn;
      const double sa = a.support(d), sb = b.support(d);
      if (std::isinf(sa) && std::isinf(sb) && sa == sb) continue;
      worst = std::max(worst, std::abs(sa - sb));
    }
  }
  return worst;
}

}  // namespace

const char* to_string(Backend b) { return b == Backend::polytope ? "polytope" : "zonotope"; }

void check_backend(const sys::Plant& plant, Backend backend) {
  if (backend == Backend::polytope) return;
  std::string why;
  if (!plant.system().zonotope_compatible(&why)) throw Error("zonotope backend: " + why);
  const auto& unc = plant.uncertainty();
  if (unc.W.is_state_dependent() || unc.V.is_state_dependent()) {
    throw Error("zonotope backend: W and V must not depend on the state");
  }
  if (!unc.W.zonotope() || !unc.V.zonotope()) throw Error("zonotope backend: W and V must be zonotopes or boxes");
  if (!plant.control().zonotope()) throw Error("zonotope backend: U must be a zonotope or a box");
  if (const auto& mm = plant.mismatch()) {
    if (mm->np() > 0 && !mm->P_zonotope) throw Error("zonotope backend: P must be a zonotope or a box");
    if (mm->nq() > 0 && !mm->Q_zonotope) throw Error("zonotope backend: Q must be a zonotope or a box");
  }
}

ConvexSet to_backend(const ConvexSet& S, Backend backend, const geom::ZonotopeOptions& options) {
  if (S.is_empty_marker()) return S;
  if (backend == Backend::polytope) {
    if (S.polytope()) return S;
    return ConvexSet(S.zonotope()->to_hpolytope());
  }
  if (S.zonotope()) return S;
  const HPolytope& P = *S.polytope();
  const auto box = P.bounding_box();
  if (!box) throw Error("zonotope backend: frames must be bounded");
  auto Z = geom::zonotope_polytope_intersection_under(Zonotope::box(box->lo, box->hi), P, options);
  if (!Z) return ConvexSet::empty(P.dim());
  return ConvexSet(*Z);
}

ConvexSet clip(const ConvexSet& S, const HPolytope& P, const geom::ZonotopeOptions& options) {
  if (S.is_empty_marker()) return S;
  if (const HPolytope* H = S.polytope()) {
    HPolytope out = H->intersect(P);
    if (out.is_empty()) return ConvexSet::empty(P.dim());
    return ConvexSet(geom::remove_redundancy(out));
  }
  auto Z = geom::zonotope_polytope_intersection_under(*S.zonotope(), P, options);
  if (!Z) return ConvexSet::empty(P.dim());
  return ConvexSet(*Z);
}

ConvexSet epre_under(const sys::Plant& plant, const ConvexSet& D, const BackendOptions& options, int* combinations) {
  const int nx = plant.system().nx();
  if (D.is_empty()) return ConvexSet::empty(nx);
  if (options.backend == Backend::polytope) {
    const ConvexSet Dp = to_backend(D, Backend::polytope);
    HPolytope out = epre_polytope(plant, *Dp.polytope(), options, combinations);
    if (out.is_empty()) return ConvexSet::empty(nx);
    return ConvexSet(std::move(out));
  }
  check_backend(plant, Backend::zonotope);
  const ConvexSet Dz = to_backend(D, Backend::zonotope, options.zonotope);
  if (Dz.is_empty_marker()) return Dz;
  auto Z = epre_zonotope(plant, *Dz.zonotope(), options, combinations);
  if (!Z) return ConvexSet::empty(nx);
  return ConvexSet(std::move(*Z));
}

DualGameResult expand(const sys::Plant& plant, const ConvexSet& X_unsafe, const DualGameOptions& options) {
  if (X_unsafe.is_empty()) throw Error("dual game: the unsafe set is empty");
  DualGameResult r;
  ConvexSet first = X_unsafe;
  if (first.polytope() && plant.domain()) first = clip(first, HPolytope::from_box(*plant.domain()));
  first = to_backend(first, options.backend, options.zonotope);
  if (options.invariant) first = clip(first, *options.invariant, options.zonotope);
  if (first.is_empty()) throw Error("dual game: the unsafe set misses the domain or its invariant");
  r.frames.push_back(first);
  r.combinations.push_back(0);
  r.stop_reason = "k_stop";
  for (int k = 0; k < options.k_stop; ++k) {
    int combos = 0;
    ConvexSet next = epre_under(plant, r.frames.back(), options, &combos);
    if (options.invariant && !next.is_empty()) next = clip(next, *options.invariant, options.zonotope);
    if (next.is_empty()) {
      r.stop_reason = "empty";
      break;
    }
    if (max_support_change(next, r.frames.back()) < options.fixpoint_tol) {
      r.stop_reason = "fixpoint";
      break;
    }
    r.frames.push_back(std::move(next));
    r.combinations.push_back(combos);
  }
  r.K = static_cast<int>(r.frames.size()) - 1;
  return r;
}

std::optional<Steering> steer_disturbance(const sys::Plant& plant, const ConvexSet& target, const Vec& x, int mode,
                                          const Vec& u, const Vec& p) {
  if (target.is_empty()) return std::nullopt;
  const auto& sys = plant.system();
  const auto& m = sys.mode(mode);
  const auto& W = plant.uncertainty().W;
  const int nw = sys.nw();
  const Vec base = m.A * x + m.B * u + m.K + p_term(plant, p);
  constexpr double kMarginCap = 1e3;

  lp::Builder b;
  const int w = b.add_variables(nw);
  const int t = b.add_variables(1, -lp::kInf, kMarginCap);
  b.set_objective(t, 1.0);
  if (W.Hz().rows() > 0) b.add_le_block({{w, W.Hz()}}, W.h() - W.Hx() * x);

  if (const HPolytope* H = target.polytope()) {
    const Vec q_off = worst_q_offset(H->A, plant);
    const Vec norms = H->A.rowwise().norm();
    b.add_le_block({{w, Mat(H->A * m.E)}, {t, Mat(norms)}}, H->b - H->A * base - q_off);
  } else {
    const Zonotope& Z = *target.zonotope();
    const int ng = Z.order();
    std::vector<Vec> qs{Vec::Zero(sys.nx())};
    if (const auto& mm = plant.mismatch(); mm && mm->nq() > 0) {
      qs.clear();
      for (const Vec& q : mm->Q.vertices) qs.push_back(mm->Qm * q);
    }
    for (const Vec& qq : qs) {
      const int th = b.add_variables(ng);
      // G theta - E w = base + Qm q - c,  |theta| <= 1 - t
      b.add_eq_block({{th, Z.G}, {w, Mat(-m.E)}}, base + qq - Z.c);
      if (ng > 0) {
        b.add_le_block({{th, Mat::Identity(ng, ng)}, {t, Mat::Ones(ng, 1)}}, Vec::Ones(ng));
        b.add_le_block({{th, Mat(-Mat::Identity(ng, ng))}, {t, Mat::Ones(ng, 1)}}, Vec::Ones(ng));
      }
    }
  }
  const auto s = b.solve(lp::Sense::maximize);
  if (!s.optimal() || s.point(t) < -1e-8) return std::nullopt;
  return Steering{s.point.segment(w, nw), s.point(t)};
}

DualMove dual_strategy_step(const sys::Plant& plant, const DualGameResult& game, const Vec& x, int k, int mode,
                            const Vec& u) {
  if (k < 1 || k > game.K) throw Error("dual strategy: frame index out of range");
  const Vec p = plant.injection(x, mode, u);
  const auto st = steer_disturbance(plant, game.frames[k - 1], x, mode, u, p);
  if (!st) {
    std::ostringstream msg;
    msg << "dual strategy: no disturbance reaches frame " << (k - 1) << " from x = " << x.transpose();
    throw Error(msg.str());
  }
  return DualMove{st->w, plant.concrete_step(x, mode, u, st->w)};
}

}  // namespace falsify::dual
