#include "falsify/system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace falsify::sys {

SwitchedAffineSystem::SwitchedAffineSystem(std::vector<Mode> modes, Mat C, Mat D, Mat F)
    : modes_(std::move(modes)), C_(std::move(C)), D_(std::move(D)), F_(std::move(F)) {
  if (modes_.empty()) throw Error("system: at least one mode is required");
  const Mode& m0 = modes_.front();
  nx_ = static_cast<int>(m0.A.rows());
  nu_ = static_cast<int>(m0.B.cols());
  nw_ = static_cast<int>(m0.E.cols());
  ny_ = static_cast<int>(C_.rows());
  nv_ = static_cast<int>(F_.cols());
  if (D_.size() == 0) D_ = Mat::Zero(ny_, nu_);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    const Mode& m = modes_[i];
    std::ostringstream where;
    where << "system: mode " << m.label << ": ";
    if (m.A.rows() != nx_ || m.A.cols() != nx_) throw Error(where.str() + "A must be nx x nx");
    if (m.B.rows() != nx_ || m.B.cols() != nu_) throw Error(where.str() + "B must be nx x nu");
    if (m.K.size() != nx_) throw Error(where.str() + "K must have nx entries");
    if (m.E.rows() != nx_ || m.E.cols() != nw_) throw Error(where.str() + "E must be nx x nw");
    for (std::size_t j = 0; j < i; ++j) {
      if (modes_[j].label == m.label) throw Error(where.str() + "duplicate mode label");
    }
  }
  if (C_.cols() != nx_) throw Error("system: C must have nx columns");
  if (D_.rows() != ny_ || D_.cols() != nu_) throw Error("system: D must be ny x nu");
  if (F_.rows() != ny_) throw Error("system: F must have ny rows");
}

int SwitchedAffineSystem::mode_index(int label) const {
  for (int i = 0; i < num_modes(); ++i) {
    if (modes_[i].label == label) return i;
  }
  throw Error("system: unknown mode label " + std::to_string(label));
}

Vec SwitchedAffineSystem::step(const Vec& x, int mode_index, const Vec& u, const Vec& w) const {
  const Mode& m = modes_.at(mode_index);
  return m.A * x + m.B * u + m.K + m.E * w;
}

Vec SwitchedAffineSystem::measure(const Vec& x, const Vec& u, const Vec& v) const {
  return C_ * x + D_ * u + F_ * v;
}

bool SwitchedAffineSystem::zonotope_compatible(std::string* why) const {
  auto fail = [why](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (ny_ != nx_ || !C_.isApprox(Mat::Identity(nx_, nx_))) return fail("C must be the identity");
  if (D_.size() > 0 && D_.cwiseAbs().maxCoeff() != 0.0) return fail("D must be zero");
  for (const Mode& m : modes_) {
    Eigen::FullPivLU<Mat> lu(m.A);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) return fail("A of mode " + std::to_string(m.label) + " is singular");
  }
  return true;
}

UncertaintySet UncertaintySet::from_polytope(const HPolytope& P, int nx) {
  UncertaintySet s;
  s.Hx_ = Mat::Zero(P.rows(), nx);
  s.Hz_ = P.A;
  s.h_ = P.b;
  return s;
}

UncertaintySet UncertaintySet::from_zonotope(const Zonotope& Z, int nx) {
  UncertaintySet s = from_polytope(Z.to_hpolytope(), nx);
  s.zonotope_ = Z;
  return s;
}

UncertaintySet UncertaintySet::from_box(const Vec& lo, const Vec& hi, int nx) {
  UncertaintySet s = from_polytope(HPolytope::box(lo, hi), nx);
  s.zonotope_ = Zonotope::box(lo, hi);
  return s;
}

UncertaintySet UncertaintySet::state_dependent(Mat Hx, Mat Hz, Vec h) {
  if (Hx.rows() != Hz.rows() || Hz.rows() != h.size()) throw Error("uncertainty: row count mismatch");
  UncertaintySet s;
  s.Hx_ = std::move(Hx);
  s.Hz_ = std::move(Hz);
  s.h_ = std::move(h);
  return s;
}

bool UncertaintySet::is_state_dependent() const {
  return Hx_.size() > 0 && Hx_.cwiseAbs().maxCoeff() != 0.0;
}

HPolytope UncertaintySet::at(const Vec& x) const { return HPolytope(Hz_, h_ - Hx_ * x); }

bool UncertaintySet::contains(const Vec& x, const Vec& z, double tol) const {
  return at(x).contains(z, tol);
}

std::optional<Box> UncertaintySet::bounding_box(const Vec& x) const {
  if (zonotope_) return zonotope_->bounding_box();
  return at(x).bounding_box();
}

Vec UncertaintySet::sample(const Vec& x, std::mt19937_64& rng, int max_tries) const {
  const auto box = bounding_box(x);
  if (!box) throw Error("uncertainty: cannot sample an unbounded set");
  const HPolytope slice = at(x);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < max_tries; ++k) {
    Vec z(dim());
    for (int i = 0; i < dim(); ++i) z(i) = box->lo(i) + (box->hi(i) - box->lo(i)) * unit(rng);
    if (slice.contains(z, 0.0)) return z;
  }
  return slice.chebyshev_center().center;
}

ControlSpace ControlSpace::from_box(const Vec& lo, const Vec& hi) {
  ControlSpace U;
  U.vertices_ = geom::VPolytope::box(lo, hi);
  U.zonotope_ = Zonotope::box(lo, hi);
  U.box_ = Box{lo, hi};
  return U;
}

ControlSpace ControlSpace::from_vertices(std::vector<Vec> vertices) {
  ControlSpace U;
  U.vertices_ = geom::VPolytope(std::move(vertices)).pruned();
  if (U.vertices_.vertices.empty()) throw Error("control space: no vertices");
  if (U.vertices_.vertices.size() == 1) {
    const Vec& p = U.vertices_.vertices.front();
    U.zonotope_ = Zonotope::point(p);
    U.box_ = Box{p, p};
  }
  return U;
}

ControlSpace ControlSpace::from_zonotope(const Zonotope& Z) {
  ControlSpace U;
  U.vertices_ = geom::VPolytope(Z.vertices());
  U.zonotope_ = Z;
  return U;
}

bool ControlSpace::contains(const Vec& u, double tol) const {
  if (box_) return box_->contains(u, tol);
  return vertices_.contains(u, tol);
}

Vec ControlSpace::clamp(const Vec& u) const {
  if (box_) return u.cwiseMax(box_->lo).cwiseMin(box_->hi);
  if (vertices_.contains(u, 0.0)) return u;
  const auto& V = vertices_.vertices;
  const int n = dim();
  const int m = static_cast<int>(V.size());
  lp::Builder b;
  const int lam = b.add_variables(m, 0.0, lp::kInf);
  const int t = b.add_variables(n, 0.0, lp::kInf);
  std::vector<lp::Builder::Term> sum;
  for (int k = 0; k < m; ++k) sum.push_back({lam + k, 1.0});
  b.add_eq(sum, 1.0);
  for (int i = 0; i < n; ++i) {
    std::vector<lp::Builder::Term> plus{{t + i, -1.0}}, minus{{t + i, -1.0}};
    for (int k = 0; k < m; ++k) {
      plus.push_back({lam + k, V[k](i)});
      minus.push_back({lam + k, -V[k](i)});
    }
    b.add_le(plus, u(i));
    b.add_le(minus, -u(i));
    b.set_objective(t + i, 1.0);
  }
  const auto s = b.solve(lp::Sense::minimize);
  if (!s.optimal()) throw Error("control space: clamp LP failed");
  Vec out = Vec::Zero(n);
  for (int k = 0; k < m; ++k) out += s.point(lam + k) * V[k];
  return out;
}

Plant::Plant(SwitchedAffineSystem sys, UncertaintyModel unc, ControlSpace U, std::optional<Box> domain)
    : sys_(std::move(sys)), unc_(std::move(unc)), U_(std::move(U)), domain_(std::move(domain)) {
  if (unc_.W.dim() != sys_.nw()) throw Error("plant: W dimension differs from nw");
  if (unc_.V.dim() != sys_.nv()) throw Error("plant: V dimension differs from nv");
  if (U_.dim() != sys_.nu()) throw Error("plant: U dimension differs from nu");
  if (unc_.W.Hx().cols() != sys_.nx() || unc_.V.Hx().cols() != sys_.nx()) {
    throw Error("plant: uncertainty state coupling must have nx columns");
  }
  if (domain_ && domain_->dim() != sys_.nx()) throw Error("plant: domain dimension differs from nx");
}

void Plant::set_mismatch(MismatchModel m) {
  if (m.Pm.rows() != sys_.nx() && m.Pm.size() > 0) throw Error("mismatch: Pm must have nx rows");
  if (m.Qm.rows() != sys_.nx() && m.Qm.size() > 0) throw Error("mismatch: Qm must have nx rows");
  if (m.Pm.size() == 0) m.Pm = Mat::Zero(sys_.nx(), 0);
  if (m.Qm.size() == 0) m.Qm = Mat::Zero(sys_.nx(), 0);
  if (!m.injection) throw Error("mismatch: an injection rule is required");
  if (!m.oracle) throw Error("mismatch: an oracle is required");
  if (m.P.vertices.empty()) m.P = geom::VPolytope({Vec::Zero(m.np())});
  if (m.Q.vertices.empty()) m.Q = geom::VPolytope({Vec::Zero(m.nq())});
  mismatch_ = std::move(m);
}

Vec Plant::abstract_step(const Vec& x, int mode, const Vec& u, const Vec& w, const Vec& p,
                         const Vec& q) const {
  Vec next = sys_.step(x, mode, u, w);
  if (mismatch_) {
    if (p.size() > 0) next += mismatch_->Pm * p;
    if (q.size() > 0) next += mismatch_->Qm * q;
  }
  return next;
}

Vec Plant::concrete_step(const Vec& x, int mode, const Vec& u, const Vec& w) const {
  if (mismatch_) return mismatch_->oracle(x, mode, u, w);
  return sys_.step(x, mode, u, w);
}

Vec Plant::injection(const Vec& x, int mode, const Vec& u) const {
  if (!mismatch_) return Vec(0);
  return mismatch_->injection(x, mode, u);
}

std::string Plant::validate_mismatch(int samples, double tol, std::uint64_t seed) const {
  if (!mismatch_) return {};
  if (!domain_) return "mismatch validation needs a declared state domain";
  const MismatchModel& m = *mismatch_;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_mode(0, sys_.num_modes() - 1);
  const auto& uv = U_.vertices().vertices;
  std::uniform_int_distribution<int> pick_vertex(0, static_cast<int>(uv.size()) - 1);
  for (int k = 0; k < samples; ++k) {
    Vec x(sys_.nx());
    for (int i = 0; i < x.size(); ++i) x(i) = domain_->lo(i) + (domain_->hi(i) - domain_->lo(i)) * unit(rng);
    const int mode = pick_mode(rng);
    const double a = unit(rng);
    const Vec u = a * uv[pick_vertex(rng)] + (1.0 - a) * uv[pick_vertex(rng)];
    const Vec w = unc_.W.sample(x, rng);
    const Vec p = m.injection(x, mode, u);
    if (p.size() != m.np()) return "injection rule returned a vector of the wrong size";
    if (m.np() > 0 && !m.P.contains(p, tol)) return "injected p leaves P";
    const Vec r = m.oracle(x, mode, u, w) - abstract_step(x, mode, u, w, p, Vec(0));
    if (m.nq() == 0) {
      if (r.cwiseAbs().maxCoeff() > tol) return "oracle differs from the abstraction at a sampled point";
      continue;
    }
    // min ||Qm sum_k lambda_k q_k - r||_inf over the simplex
    const auto& Qv = m.Q.vertices;
    lp::Builder b;
    const int lam = b.add_variables(static_cast<int>(Qv.size()), 0.0, lp::kInf);
    const int s = b.add_variables(1, 0.0, lp::kInf);
    std::vector<lp::Builder::Term> sum;
    for (std::size_t j = 0; j < Qv.size(); ++j) sum.push_back({lam + static_cast<int>(j), 1.0});
    b.add_eq(sum, 1.0);
    for (int i = 0; i < sys_.nx(); ++i) {
      std::vector<lp::Builder::Term> plus{{s, -1.0}}, minus{{s, -1.0}};
      for (std::size_t j = 0; j < Qv.size(); ++j) {
        const double c = m.Qm.row(i).dot(Qv[j]);
        plus.push_back({lam + static_cast<int>(j), c});
        minus.push_back({lam + static_cast<int>(j), -c});
      }
      b.add_le(plus, r(i));
      b.add_le(minus, -r(i));
    }
    b.set_objective(s, 1.0);
    const auto sol = b.solve(lp::Sense::minimize);
    if (!sol.optimal() || sol.objective_value > tol) return "no q in Q explains the oracle at a sampled point";
  }
  return {};
}

AugmentedState augmented_step(const Plant& plant, const AugmentedState& s, int mode, const Vec& u,
                              const Vec& w) {
  return AugmentedState{plant.concrete_step(s.x, mode, u, w), s.z + 1};
}

ReachAvoidAugmentation augment_time(const Plant& plant, const HPolytope& X_init,
                                    const std::vector<HPolytope>& X_unsafe, const HPolytope& X_target,
                                    int t_max, double margin) {
  if (!plant.domain()) throw Error("reach-avoid: a state domain is required");
  if (t_max < 0) throw Error("reach-avoid: t_max must be non-negative");
  ReachAvoidAugmentation out;
  out.xi_init = X_init;
  out.t_max = t_max;
  for (std::size_t k = 0; k < X_unsafe.size(); ++k) {
    out.targets.push_back({"unsafe[" + std::to_string(k) + "]", X_unsafe[k], std::nullopt, 0});
  }
  const HPolytope dom = HPolytope::from_box(*plant.domain());
  for (int i = 0; i < X_target.rows(); ++i) {
    const double nrm = X_target.A.row(i).norm();
    HPolytope outside(-X_target.A.row(i), Vec::Constant(1, -(X_target.b(i) + margin * nrm)));
    HPolytope piece = dom.intersect(outside);
    if (piece.is_empty()) continue;
    piece = geom::remove_redundancy(piece);
    out.targets.push_back({"deadline[" + std::to_string(i) + "]", piece, piece, t_max});
  }
  return out;
}

}  // namespace falsify::sys
