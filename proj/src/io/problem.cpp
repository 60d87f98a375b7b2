#include "falsify/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace falsify::io {

using geom::Box;
using geom::HPolytope;
using geom::Mat;
using geom::Vec;
using geom::Zonotope;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw SpecError(where + ": " + what); }

const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
  }
  fail(where, "expected a number");
}

Vec vec(const json& j, const std::string& where, int expected = -1) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
  if (expected >= 0 && v.size() != expected) {
    fail(where, "expected length " + std::to_string(expected) + ", got " + std::to_string(v.size()));
  }
  return v;
}

Mat mat(const json& j, const std::string& where, int rows = -1, int cols = -1) {
  if (!j.is_array()) fail(where, "expected a row-major matrix");
  const int r = static_cast<int>(j.size());
  int c = cols;
  if (r > 0) {
    if (!j[0].is_array()) fail(where, "expected a row-major matrix");
    c = static_cast<int>(j[0].size());
  }
  if (c < 0) c = 0;
  Mat M(r, c);
  for (int i = 0; i < r; ++i) {
    const Vec row = vec(j[i], where + "[" + std::to_string(i) + "]");
    if (row.size() != c) fail(where, "rows have different lengths");
    M.row(i) = row.transpose();
  }
  if ((rows >= 0 && M.rows() != rows) || (cols >= 0 && M.cols() != cols)) {
    fail(where, "expected shape " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                    std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  }
  return M;
}

Box box(const json& j, const std::string& where, int dim = -1) {
  const json& b = j.contains("box") ? j["box"] : j;
  const std::string w = j.contains("box") ? where + ".box" : where;
  Box out{vec(field(b, "lo", w), w + ".lo", dim), vec(field(b, "hi", w), w + ".hi", dim)};
  if (out.lo.size() != out.hi.size()) fail(w, "lo and hi differ in length");
  if ((out.lo.array() > out.hi.array()).any()) fail(w, "lo exceeds hi");
  return out;
}

bool is_box(const json& j) { return j.is_object() && (j.contains("box") || (j.contains("lo") && j.contains("hi"))); }

Vec json_vec_or_zero(const json& parent, const std::string& key, const std::string& where, int n) {
  if (!parent.contains(key)) return Vec::Zero(n);
  return vec(parent[key], where + "." + key, n);
}

sys::UncertaintySet uncertainty(const json& j, const std::string& where, int nx, int dim) {
  if (is_box(j)) {
    const Box b = box(j, where, dim);
    return sys::UncertaintySet::from_box(b.lo, b.hi, nx);
  }
  if (j.contains("zonotope")) {
    const json& z = j["zonotope"];
    const Vec c = vec(field(z, "c", where + ".zonotope"), where + ".zonotope.c", dim);
    return sys::UncertaintySet::from_zonotope(Zonotope(mat(field(z, "G", where + ".zonotope"), where + ".zonotope.G", dim), c), nx);
  }
  if (j.contains("polytope")) return sys::UncertaintySet::from_polytope(parse_polytope(j, where), nx);
  if (j.contains("state_dependent")) {
    const json& s = j["state_dependent"];
    const std::string w = where + ".state_dependent";
    const Mat Hz = mat(field(s, "Hz", w), w + ".Hz", -1, dim);
    return sys::UncertaintySet::state_dependent(mat(field(s, "Hx", w), w + ".Hx", static_cast<int>(Hz.rows()), nx), Hz,
                                                vec(field(s, "h", w), w + ".h", static_cast<int>(Hz.rows())));
  }
  fail(where, "expected box, polytope, zonotope or state_dependent");
}

sys::ControlSpace control_space(const json& j, const std::string& where, int nu) {
  if (is_box(j)) {
    const Box b = box(j, where, nu);
    return sys::ControlSpace::from_box(b.lo, b.hi);
  }
  if (j.contains("vertices")) {
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < j["vertices"].size(); ++i) {
      pts.push_back(vec(j["vertices"][i], where + ".vertices[" + std::to_string(i) + "]", nu));
    }
    if (pts.empty()) fail(where + ".vertices", "empty");
    return sys::ControlSpace::from_vertices(pts);
  }
  if (j.contains("zonotope")) {
    const json& z = j["zonotope"];
    return sys::ControlSpace::from_zonotope(
        Zonotope(mat(field(z, "G", where + ".zonotope"), where + ".zonotope.G", nu),
                 vec(field(z, "c", where + ".zonotope"), where + ".zonotope.c", nu)));
  }
  fail(where, "expected box, vertices or zonotope");
}

// Vertex set plus the zonotope form when given as a box.
void vertex_set(const json& j, const std::string& where, int dim, geom::VPolytope& V, std::optional<Zonotope>& Z) {
  if (is_box(j)) {
    const Box b = box(j, where, dim);
    V = geom::VPolytope::box(b.lo, b.hi);
    Z = Zonotope::box(b.lo, b.hi);
    return;
  }
  if (j.contains("vertices")) {
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < j["vertices"].size(); ++i) {
      pts.push_back(vec(j["vertices"][i], where + ".vertices[" + std::to_string(i) + "]", dim));
    }
    if (pts.empty()) fail(where + ".vertices", "empty");
    V = geom::VPolytope(pts);
    if (pts.size() == 1) Z = Zonotope::point(pts.front());
    return;
  }
  fail(where, "expected box or vertices");
}

ctrl::AffineLaw law(const json& j, const std::string& where, int nu, int ny) {
  ctrl::AffineLaw l;
  if (j.contains("mode")) l.mode_label = j["mode"].get<int>();
  l.gain = j.contains("gain") ? mat(j["gain"], where + ".gain", nu, ny) : Mat::Zero(nu, ny);
  l.offset = json_vec_or_zero(j, "offset", where, nu);
  if (j.contains("saturation")) l.saturation = box(j["saturation"], where + ".saturation", nu);
  return l;
}

std::shared_ptr<ctrl::LineProcess> spawn(const json& j, const std::string& where) {
  const json& cmd = field(j, "command", where);
  if (!cmd.is_array() || cmd.empty()) fail(where + ".command", "expected a non-empty argv array");
  std::vector<std::string> argv;
  for (const auto& a : cmd) argv.push_back(a.get<std::string>());
  const auto timeout = j.contains("timeout_ms") ? std::chrono::milliseconds(j["timeout_ms"].get<long>())
                                                : ctrl::default_timeout();
  return std::make_shared<ctrl::LineProcess>(argv, timeout);
}

json to_json_vec(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec reply_vec(const std::string& reply, const std::string& key, int n, const std::string& what) {
  json r;
  try {
    r = json::parse(reply);
  } catch (const json::exception&) {
    throw Error(what + ": malformed reply " + reply);
  }
  if (!r.contains(key)) throw Error(what + ": reply lacks \"" + key + "\"");
  Vec v = vec(r[key], what + "." + key, n);
  return v;
}

sys::MismatchModel mismatch(const json& j, const sys::SwitchedAffineSystem& s, const std::string& base_dir) {
  (void)base_dir;
  const std::string where = "mismatch";
  const int nx = s.nx();
  sys::MismatchModel m;
  m.Pm = j.contains("Pm") ? mat(j["Pm"], where + ".Pm", nx) : Mat(nx, 0);
  m.Qm = j.contains("Qm") ? mat(j["Qm"], where + ".Qm", nx) : Mat(nx, 0);
  if (m.np() > 0) vertex_set(field(j, "P", where), where + ".P", m.np(), m.P, m.P_zonotope);
  if (m.nq() > 0) vertex_set(field(j, "Q", where), where + ".Q", m.nq(), m.Q, m.Q_zonotope);

  const int np = m.np();
  if (np == 0) {
    m.injection = [](const Vec&, int, const Vec&) { return Vec(0); };
  } else {
    const json& inj = field(j, "injection", where);
    const std::string type = field(inj, "type", where + ".injection").get<std::string>();
    if (type == "quadratic") {
      // p_i = clamp(x' M_i x, -bound_i, bound_i)
      std::vector<Mat> Ms;
      const json& mj = field(inj, "M", where + ".injection");
      if (!mj.is_array() || static_cast<int>(mj.size()) != np) fail(where + ".injection.M", "expected one matrix per p");
      for (int i = 0; i < np; ++i) Ms.push_back(mat(mj[i], where + ".injection.M[" + std::to_string(i) + "]", nx, nx));
      const Vec bound = vec(field(inj, "bound", where + ".injection"), where + ".injection.bound", np);
      m.injection = [Ms, bound](const Vec& x, int, const Vec&) {
        Vec p(static_cast<int>(Ms.size()));
        for (int i = 0; i < p.size(); ++i) p(i) = std::clamp(x.dot(Ms[i] * x), -bound(i), bound(i));
        return p;
      };
    } else if (type == "command") {
      auto proc = spawn(inj, where + ".injection");
      std::vector<int> labels;
      for (const auto& md : s.modes()) labels.push_back(md.label);
      m.injection = [proc, np, labels](const Vec& x, int mode, const Vec& u) {
        json req{{"x", to_json_vec(x)}, {"s", labels.at(mode)}, {"u", to_json_vec(u)}};
        return reply_vec(proc->request(req.dump()), "p", np, "injection command");
      };
    } else {
      fail(where + ".injection.type", "unknown type " + type);
    }
  }

  const json oracle = j.contains("oracle") ? j["oracle"] : json("model");
  if (oracle.is_string() && oracle.get<std::string>() == "model") {
    const sys::SwitchedAffineSystem sys_copy = s;
    auto inj = m.injection;
    const Mat Pm = m.Pm;
    m.oracle = [sys_copy, inj, Pm](const Vec& x, int mode, const Vec& u, const Vec& w) {
      Vec next = sys_copy.step(x, mode, u, w);
      const Vec p = inj(x, mode, u);
      if (p.size() > 0) next += Pm * p;
      return next;
    };
  } else if (oracle.is_object()) {
    auto proc = spawn(oracle, where + ".oracle");
    std::vector<int> labels;
    for (const auto& md : s.modes()) labels.push_back(md.label);
    m.oracle = [proc, nx, labels](const Vec& x, int mode, const Vec& u, const Vec& w) {
      json req{{"x", to_json_vec(x)}, {"s", labels.at(mode)}, {"u", to_json_vec(u)}, {"w", to_json_vec(w)}};
      return reply_vec(proc->request(req.dump()), "x", nx, "oracle command");
    };
  } else {
    fail(where + ".oracle", "expected \"model\" or an object with a command");
  }
  return m;
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / path).string();
}

}  // namespace

HPolytope parse_polytope(const json& j, const std::string& where) {
  if (is_box(j)) return HPolytope::from_box(box(j, where));
  const json& p = j.contains("polytope") ? j["polytope"] : j;
  const std::string w = j.contains("polytope") ? where + ".polytope" : where;
  if (!p.is_object() || !p.contains("A")) fail(where, "expected a box or a polytope {A, b}");
  const Mat A = mat(p["A"], w + ".A");
  return HPolytope(A, vec(field(p, "b", w), w + ".b", static_cast<int>(A.rows())));
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path + ": cannot open");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw SpecError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

engine::EngineConfig parse_engine(const json& e, engine::EngineConfig c) {
  const std::string w = "engine";
  if (e.is_null()) return c;
  if (!e.is_object()) fail(w, "expected an object");
  for (const auto& [key, value] : e.items()) {
    const std::string f = w + "." + key;
    if (key == "beta") c.beta = number(value, f);
    else if (key == "k_max") c.k_max = value.get<int>();
    else if (key == "delta") c.delta = number(value, f);
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "k_stop") c.k_stop = value.get<int>();
    else if (key == "max_generators") c.max_generators = value.get<int>();
    else if (key == "max_total_dim") c.max_total_dim = value.get<int>();
    else if (key == "backend") {
      const std::string b = value.get<std::string>();
      if (b == "polytope") c.backend = engine::BackendChoice::polytope;
      else if (b == "zonotope") c.backend = engine::BackendChoice::zonotope;
      else if (b == "auto") c.backend = engine::BackendChoice::automatic;
      else fail(f, "expected polytope, zonotope or auto");
    } else if (key == "x0_choice") {
      const std::string b = value.get<std::string>();
      if (b == "last_dual_frame") c.x0_choice = engine::X0Choice::last_dual_frame;
      else if (b == "unsafe_set") c.x0_choice = engine::X0Choice::unsafe_set;
      else fail(f, "expected last_dual_frame or unsafe_set");
    } else if (key != "comment") {
      fail(f, "unknown field");
    }
  }
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) fail(w + ".beta", "must lie in [0, 1]");
  if (!(c.delta > 0.0)) fail(w + ".delta", "must be positive or inf");
  return c;
}

std::unique_ptr<ctrl::Controller> make_controller(const json& spec, const sys::SwitchedAffineSystem& s,
                                                  const std::string& base_dir) {
  const std::string w = "controller";
  const std::string type = field(spec, "type", w).get<std::string>();
  const int nu = s.nu(), ny = s.ny();
  if (type == "piecewise") {
    std::vector<ctrl::PiecewiseController::Piece> pieces;
    const json& pj = field(spec, "pieces", w);
    for (std::size_t i = 0; i < pj.size(); ++i) {
      const std::string pw = w + ".pieces[" + std::to_string(i) + "]";
      const json& r = field(pj[i], "region", pw);
      ctrl::Region region;
      region.H = mat(field(r, "H", pw + ".region"), pw + ".region.H", -1, ny);
      region.h = vec(field(r, "h", pw + ".region"), pw + ".region.h", static_cast<int>(region.H.rows()));
      region.strict.assign(region.H.rows(), false);
      if (r.contains("strict")) {
        const auto st = r["strict"].get<std::vector<bool>>();
        if (st.size() != region.strict.size()) fail(pw + ".region.strict", "one flag per row");
        region.strict = st;
      }
      pieces.push_back({region, law(field(pj[i], "law", pw), pw + ".law", nu, ny)});
    }
    std::optional<Box> clamp;
    if (spec.contains("clamp")) clamp = box(spec["clamp"], w + ".clamp", ny);
    return std::make_unique<ctrl::PiecewiseController>(pieces, law(field(spec, "fallback", w), w + ".fallback", nu, ny),
                                                       clamp);
  }
  if (type == "saturated_linear") {
    return std::make_unique<ctrl::SaturatedLinearController>(law(field(spec, "law", w), w + ".law", nu, ny));
  }
  if (type == "mlp") {
    const std::string file = resolve_path(base_dir, field(spec, "file", w).get<std::string>());
    if (!std::filesystem::exists(file)) fail(w + ".file", "no such file " + file);
    std::vector<int> labels;
    if (spec.contains("mode_labels")) {
      labels = spec["mode_labels"].get<std::vector<int>>();
    } else if (s.num_modes() > 1) {
      for (const auto& md : s.modes()) labels.push_back(md.label);
    }
    return std::make_unique<ctrl::MlpController>(ctrl::MlpController::load_layers(file), nu, labels);
  }
  if (type == "external") {
    const json& cmd = field(spec, "command", w);
    std::vector<std::string> argv;
    for (const auto& a : cmd) argv.push_back(a.get<std::string>());
    if (argv.empty()) fail(w + ".command", "empty");
    // Relative script paths resolve against the spec directory.
    for (auto& a : argv) {
      if (a.find('/') != std::string::npos && !std::filesystem::path(a).is_absolute()) {
        const std::string p = resolve_path(base_dir, a);
        if (std::filesystem::exists(p)) a = p;
      }
    }
    const auto timeout = spec.contains("timeout_ms") ? std::chrono::milliseconds(spec["timeout_ms"].get<long>())
                                                     : ctrl::default_timeout();
    return std::make_unique<ctrl::ExternalProcessController>(argv, timeout);
  }
  fail(w + ".type", "unknown controller type " + type);
}

std::unique_ptr<ctrl::Controller> Problem::make_controller() const {
  return io::make_controller(doc.at("controller"), plant.system(), base_dir);
}

replay::ViolationSpec Problem::violation() const {
  replay::ViolationSpec v;
  v.unsafe = X_unsafe;
  v.target = X_target;
  v.t_max = t_max;
  v.x_init = X_init;
  return v;
}

Problem parse_problem(const json& doc, const std::string& base_dir) {
  Problem pr;
  pr.doc = doc;
  pr.base_dir = base_dir;
  pr.name = doc.value("name", std::string("problem"));

  const json& sj = field(doc, "system", "");
  const json& modes = field(sj, "modes", "system");
  if (!modes.is_array() || modes.empty()) fail("system.modes", "expected a non-empty array");
  std::vector<sys::Mode> ms;
  int nx = -1, nu = -1, nw = -1;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string w = "system.modes[" + std::to_string(i) + "]";
    sys::Mode m;
    m.label = modes[i].value("label", static_cast<int>(i));
    m.A = mat(field(modes[i], "A", w), w + ".A");
    nx = static_cast<int>(m.A.rows());
    m.B = mat(field(modes[i], "B", w), w + ".B", nx);
    m.K = json_vec_or_zero(modes[i], "K", w, nx);
    m.E = mat(field(modes[i], "E", w), w + ".E", nx);
    if (nu < 0) nu = static_cast<int>(m.B.cols());
    if (nw < 0) nw = static_cast<int>(m.E.cols());
    ms.push_back(m);
  }
  const Mat C = mat(field(sj, "C", "system"), "system.C", -1, nx);
  const int ny = static_cast<int>(C.rows());
  const Mat D = sj.contains("D") ? mat(sj["D"], "system.D", ny, nu) : Mat::Zero(ny, nu);
  const Mat F = mat(field(sj, "F", "system"), "system.F", ny);
  sys::SwitchedAffineSystem system;
  try {
    system = sys::SwitchedAffineSystem(ms, C, D, F);
  } catch (const SpecError&) {
    throw;
  } catch (const Error& e) {
    fail("system", e.what());
  }

  const json& uj = field(doc, "uncertainty", "");
  sys::UncertaintyModel unc{uncertainty(field(uj, "W", "uncertainty"), "uncertainty.W", nx, system.nw()),
                            uncertainty(field(uj, "V", "uncertainty"), "uncertainty.V", nx, system.nv())};
  const sys::ControlSpace U = control_space(field(field(doc, "control", ""), "U", "control"), "control.U", nu);

  const json& sets = field(doc, "sets", "");
  std::optional<Box> domain;
  if (sets.contains("domain")) domain = box(sets["domain"], "sets.domain", nx);
  pr.plant = sys::Plant(system, unc, U, domain);
  if (doc.contains("mismatch") && !doc["mismatch"].is_null()) {
    pr.plant.set_mismatch(mismatch(doc["mismatch"], system, base_dir));
  }

  pr.X_init = parse_polytope(field(sets, "X_init", "sets"), "sets.X_init");
  if (pr.X_init.dim() != nx) fail("sets.X_init", "wrong dimension");
  if (sets.contains("X_unsafe")) {
    const json& xs = sets["X_unsafe"];
    if (!xs.is_array()) fail("sets.X_unsafe", "expected a list of sets");
    for (std::size_t i = 0; i < xs.size(); ++i) {
      pr.X_unsafe.push_back(parse_polytope(xs[i], "sets.X_unsafe[" + std::to_string(i) + "]"));
    }
  }
  if (sets.contains("X_safe")) {
    // The complement is covered by one piece per facet, pushed out by a small margin.
    const HPolytope safe = parse_polytope(sets["X_safe"], "sets.X_safe");
    for (int i = 0; i < safe.rows(); ++i) {
      const double margin = 1e-3 * safe.A.row(i).norm();
      HPolytope piece(Mat(-safe.A.row(i)), Vec::Constant(1, -safe.b(i) - margin));
      if (domain) piece = piece.intersect(HPolytope::from_box(*domain));
      if (!piece.is_empty()) pr.X_unsafe.push_back(piece);
    }
  }
  for (const auto& X : pr.X_unsafe) {
    if (X.dim() != nx) fail("sets.X_unsafe", "wrong dimension");
  }
  if (sets.contains("X_target")) {
    pr.X_target = parse_polytope(sets["X_target"], "sets.X_target");
    pr.t_max = field(sets, "t_max", "sets").get<int>();
    const auto aug = sys::augment_time(pr.plant, pr.X_init, pr.X_unsafe, *pr.X_target, pr.t_max);
    pr.targets = aug.targets;
  } else {
    for (std::size_t i = 0; i < pr.X_unsafe.size(); ++i) {
      pr.targets.push_back({"unsafe[" + std::to_string(i) + "]", pr.X_unsafe[i], std::nullopt, 0});
    }
  }
  if (pr.targets.empty()) fail("sets", "declare X_unsafe, X_safe or X_target");

  const json& cj = field(doc, "controller", "");
  if (field(cj, "type", "controller") != "external") make_controller(cj, system, base_dir);
  pr.engine = parse_engine(doc.value("engine", json::object()));
  if (doc.contains("plot") && doc["plot"].contains("axes")) {
    const auto ax = doc["plot"]["axes"].get<std::vector<int>>();
    if (ax.size() != 2 || ax[0] < 0 || ax[1] < 0 || ax[0] >= nx || ax[1] >= nx) fail("plot.axes", "two state indices");
    pr.axis_x = ax[0];
    pr.axis_y = ax[1];
  } else if (nx == 1) {
    pr.axis_y = 0;
  }
  return pr;
}

Problem load_problem(const std::string& path) {
  const json doc = read_json(path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_problem(doc, dir.empty() ? "." : dir);
}

std::string config_hash(const json& doc) {
  const std::string s = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace falsify::io
