#include "falsify/controllers.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace falsify::ctrl {

ControlOutput Controller::query(const Vec& y) {
  ++queries_;
  if (!y.allFinite()) throw ControllerError("controller queried with a non-finite observation");
  ControlOutput out = evaluate(y);
  if (!out.u.allFinite()) throw ControllerError(kind() + " controller returned a non-finite control");
  return out;
}

bool Region::contains(const Vec& y) const {
  for (int i = 0; i < H.rows(); ++i) {
    const double lhs = H.row(i).dot(y);
    const bool is_strict = i < static_cast<int>(strict.size()) && strict[i];
    if (is_strict ? !(lhs < h(i)) : !(lhs <= h(i))) return false;
  }
  return true;
}

Vec AffineLaw::apply(const Vec& y) const {
  Vec u = offset;
  if (gain.size() > 0) u += gain * y;
  if (saturation) u = u.cwiseMax(saturation->lo).cwiseMin(saturation->hi);
  return u;
}

PiecewiseController::PiecewiseController(std::vector<Piece> pieces, AffineLaw fallback,
                                         std::optional<geom::Box> clamp_box)
    : pieces_(std::move(pieces)), fallback_(std::move(fallback)), clamp_box_(std::move(clamp_box)) {}

ControlOutput PiecewiseController::evaluate(const Vec& y) {
  Vec yc = y;
  if (clamp_box_) yc = y.cwiseMax(clamp_box_->lo).cwiseMin(clamp_box_->hi);
  for (const Piece& p : pieces_) {
    if (p.region.contains(yc)) return {p.law.mode_label, p.law.apply(yc)};
  }
  return {fallback_.mode_label, fallback_.apply(yc)};
}

ControlOutput SaturatedLinearController::evaluate(const Vec& y) { return {law_.mode_label, law_.apply(y)}; }

MlpController::MlpController(std::vector<MlpLayer> layers, int nu, std::vector<int> mode_labels)
    : layers_(std::move(layers)), nu_(nu), mode_labels_(std::move(mode_labels)) {
  if (layers_.empty()) throw ControllerError("mlp: no layers");
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    if (layers_[k].W.cols() != layers_[k - 1].W.rows()) throw ControllerError("mlp: layer shapes do not chain");
  }
  const int expected = nu_ + (mode_labels_.size() > 1 ? static_cast<int>(mode_labels_.size()) : 0);
  if (layers_.back().W.rows() != expected) {
    throw ControllerError("mlp: output size " + std::to_string(layers_.back().W.rows()) + ", expected " +
                          std::to_string(expected));
  }
}

std::vector<MlpLayer> MlpController::parse_layers(const nlohmann::json& doc) {
  std::vector<MlpLayer> layers;
  for (const auto& L : doc.at("layers")) {
    MlpLayer layer;
    const auto& w = L.at("w");
    const int rows = static_cast<int>(w.size());
    const int cols = rows > 0 ? static_cast<int>(w.at(0).size()) : 0;
    layer.W.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(w.at(r).size()) != cols) throw ControllerError("mlp: ragged weight matrix");
      for (int c = 0; c < cols; ++c) layer.W(r, c) = w.at(r).at(c).get<double>();
    }
    const auto& b = L.at("b");
    if (static_cast<int>(b.size()) != rows) throw ControllerError("mlp: bias size differs from weight rows");
    layer.b.resize(rows);
    for (int r = 0; r < rows; ++r) layer.b(r) = b.at(r).get<double>();
    const std::string act = L.value("act", "id");
    if (act == "relu") layer.act = MlpLayer::Activation::relu;
    else if (act == "tanh") layer.act = MlpLayer::Activation::tanh;
    else if (act == "id") layer.act = MlpLayer::Activation::identity;
    else throw ControllerError("mlp: unknown activation '" + act + "'");
    layers.push_back(std::move(layer));
  }
  return layers;
}

std::vector<MlpLayer> MlpController::load_layers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ControllerError("mlp: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ControllerError("mlp: malformed weight file " + path + ": " + e.what());
  }
  return parse_layers(doc);
}

Vec MlpController::forward(const Vec& y) const {
  Vec a = y;
  for (const MlpLayer& L : layers_) {
    if (L.W.cols() != a.size()) throw ControllerError("mlp: input size mismatch");
    a = L.W * a + L.b;
    switch (L.act) {
      case MlpLayer::Activation::relu: a = a.cwiseMax(0.0); break;
      case MlpLayer::Activation::tanh: a = a.array().tanh().matrix(); break;
      case MlpLayer::Activation::identity: break;
    }
  }
  return a;
}

ControlOutput MlpController::evaluate(const Vec& y) {
  const Vec out = forward(y);
  ControlOutput r;
  r.u = out.head(nu_);
  if (mode_labels_.size() > 1) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(mode_labels_.size()); ++k) {
      if (out(nu_ + k) > out(nu_ + best)) best = k;
    }
    r.mode_label = mode_labels_[best];
  } else if (mode_labels_.size() == 1) {
    r.mode_label = mode_labels_.front();
  }
  return r;
}

std::chrono::milliseconds default_timeout() {
  if (const char* env = std::getenv("FALSIFY_CONTROLLER_TIMEOUT")) {
    char* end = nullptr;
    const double s = std::strtod(env, &end);
    if (end != env && s > 0.0) return std::chrono::milliseconds(static_cast<long>(s * 1000.0));
  }
  return std::chrono::milliseconds(10000);
}

ExternalProcessController::ExternalProcessController(std::vector<std::string> argv,
                                                     std::chrono::milliseconds timeout)
    : process_(std::move(argv), timeout) {}

ControlOutput ExternalProcessController::evaluate(const Vec& y) {
  nlohmann::json req;
  req["y"] = std::vector<double>(y.data(), y.data() + y.size());
  std::string reply;
  try {
    reply = process_.request(req.dump());
  } catch (const ControllerError& e) {
    throw ControllerError(std::string(e.what()) + " at y = " + req["y"].dump());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::exception&) {
    throw ControllerError("external controller replied with malformed JSON: " + reply);
  }
  if (!doc.is_object() || !doc.contains("u") || !doc["u"].is_array()) {
    throw ControllerError("external controller reply lacks a \"u\" array: " + reply);
  }
  ControlOutput out;
  const auto& u = doc["u"];
  out.u.resize(static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!u[i].is_number()) throw ControllerError("external controller returned a non-numeric control");
    out.u(static_cast<Eigen::Index>(i)) = u[i].get<double>();
  }
  if (doc.contains("s")) {
    if (!doc["s"].is_number_integer()) throw ControllerError("external controller returned a non-integer mode");
    out.mode_label = doc["s"].get<int>();
  }
  return out;
}

}  // namespace falsify::ctrl
