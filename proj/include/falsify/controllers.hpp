#pragma once

#include "falsify/geometry.hpp"

#include <json.hpp>

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace falsify::ctrl {

using geom::Mat;
using geom::Vec;

class ControllerError : public Error {
 public:
  using Error::Error;
};

struct ControlOutput {
  std::optional<int> mode_label;
  Vec u;
};

// Black-box observation-feedback policy. Every query is counted.
class Controller {
 public:
  virtual ~Controller() = default;
  ControlOutput query(const Vec& y);
  std::size_t query_count() const { return queries_; }
  virtual std::string kind() const = 0;

 protected:
  virtual ControlOutput evaluate(const Vec& y) = 0;

 private:
  std::size_t queries_ = 0;
};

// Conjunction of a_i y <= b_i (or < b_i when strict).
struct Region {
  Mat H;
  Vec h;
  std::vector<bool> strict;
  bool contains(const Vec& y) const;
};

// Affine law u = gain * y + offset, saturated to [lo, hi] when present.
struct AffineLaw {
  std::optional<int> mode_label;
  Mat gain;
  Vec offset;
  std::optional<geom::Box> saturation;
  Vec apply(const Vec& y) const;
};

// First matching region wins. The observation is clamped to clamp_box first.
class PiecewiseController : public Controller {
 public:
  struct Piece {
    Region region;
    AffineLaw law;
  };
  PiecewiseController(std::vector<Piece> pieces, AffineLaw fallback,
                      std::optional<geom::Box> clamp_box = std::nullopt);
  std::string kind() const override { return "piecewise"; }

 protected:
  ControlOutput evaluate(const Vec& y) override;

 private:
  std::vector<Piece> pieces_;
  AffineLaw fallback_;
  std::optional<geom::Box> clamp_box_;
};

class SaturatedLinearController : public Controller {
 public:
  explicit SaturatedLinearController(AffineLaw law) : law_(std::move(law)) {}
  std::string kind() const override { return "saturated_linear"; }

 protected:
  ControlOutput evaluate(const Vec& y) override;

 private:
  AffineLaw law_;
};

struct MlpLayer {
  enum class Activation { relu, tanh, identity };
  Mat W;
  Vec b;
  Activation act = Activation::identity;
};

// Outputs the first nu values as u; with several mode labels, a trailing logit
// block selects the mode by argmax (ties to the smaller index).
class MlpController : public Controller {
 public:
  MlpController(std::vector<MlpLayer> layers, int nu, std::vector<int> mode_labels);
  static std::vector<MlpLayer> parse_layers(const nlohmann::json& doc);
  static std::vector<MlpLayer> load_layers(const std::string& path);
  std::string kind() const override { return "mlp"; }
  Vec forward(const Vec& y) const;

 protected:
  ControlOutput evaluate(const Vec& y) override;

 private:
  std::vector<MlpLayer> layers_;
  int nu_;
  std::vector<int> mode_labels_;
};

// Long-lived child process speaking one JSON object per line.
class LineProcess {
 public:
  LineProcess(std::vector<std::string> argv, std::chrono::milliseconds timeout);
  ~LineProcess();
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  std::string request(const std::string& line);

 private:
  void start();
  void stop();

  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// Default reply timeout in milliseconds: FALSIFY_CONTROLLER_TIMEOUT (seconds) or 10 s.
std::chrono::milliseconds default_timeout();

// Request {"y":[...]}; reply {"s":int,"u":[...]} with "s" optional.
class ExternalProcessController : public Controller {
 public:
  ExternalProcessController(std::vector<std::string> argv, std::chrono::milliseconds timeout);
  std::string kind() const override { return "external"; }

 protected:
  ControlOutput evaluate(const Vec& y) override;

 private:
  LineProcess process_;
};

}  // namespace falsify::ctrl
