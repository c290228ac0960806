#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "fedauc/error.hpp"
#include "fedauc/rng.hpp"

namespace fedauc {

using ParamVector = std::vector<double>;

enum class ModelKind { kLinear, kMlp };

inline const char* to_string(ModelKind k) { return k == ModelKind::kLinear ? "linear" : "mlp"; }

// Scalar scoring function h(w; x) over a flat parameter vector.
//
// Parameter layout:
//   linear: [w (d), c]
//   mlp:    [W1 (H x d, row-major), b1 (H), out (H), c]
// with h = w.x + c and h = out . tanh(W1 x + b1) + c respectively.
class ScoringModel {
 public:
  static constexpr std::size_t kDefaultHidden = 16;

  ScoringModel() = default;

  static ScoringModel linear(std::size_t d) { return ScoringModel(ModelKind::kLinear, d, 0); }
  static ScoringModel mlp(std::size_t d, std::size_t hidden = kDefaultHidden) {
    detail::require(hidden >= 1, "mlp: hidden width must be >= 1");
    return ScoringModel(ModelKind::kMlp, d, hidden);
  }

  static std::size_t param_count_for(ModelKind kind, std::size_t d, std::size_t hidden) {
    return kind == ModelKind::kLinear ? d + 1 : hidden * d + 2 * hidden + 1;
  }

  ModelKind kind() const { return kind_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  // Bias sits last in both variants.
  double& bias() { return params_.back(); }
  double bias() const { return params_.back(); }

  bool same_shape(const ScoringModel& other) const {
    return kind_ == other.kind_ && input_dim_ == other.input_dim_ && hidden_ == other.hidden_;
  }

  bool operator==(const ScoringModel&) const = default;

 private:
  ScoringModel(ModelKind kind, std::size_t d, std::size_t hidden)
      : kind_(kind), input_dim_(d), hidden_(hidden), params_(param_count_for(kind, d, hidden), 0.0) {
    detail::require(d >= 1, "model: input dimension must be >= 1");
  }

  ModelKind kind_ = ModelKind::kLinear;
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  ParamVector params_;
};

inline ParamVector flatten(const ScoringModel& m) { return {m.params().begin(), m.params().end()}; }

inline ScoringModel unflatten(const ScoringModel& shape, std::span<const double> flat) {
  detail::require(flat.size() == shape.param_count(), "unflatten: length mismatch");
  ScoringModel m = shape;
  std::copy(flat.begin(), flat.end(), m.params().begin());
  return m;
}

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
inline void init_uniform(ScoringModel& m, RngStream rng) {
  auto p = m.params();
  auto fill = [&](std::size_t begin, std::size_t end, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (std::size_t i = begin; i < end; ++i) p[i] = (2.0 * rng.uniform() - 1.0) * bound;
  };
  const std::size_t d = m.input_dim();
  if (m.kind() == ModelKind::kLinear) {
    fill(0, d + 1, static_cast<double>(d));
  } else {
    const std::size_t h = m.hidden();
    fill(0, h * d + h, static_cast<double>(d));
    fill(h * d + h, p.size(), static_cast<double>(h));
  }
}

namespace detail {

inline void check_input(const ScoringModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim()) {
    throw ConfigError("score: input has dimension " + std::to_string(x.size()) + ", model expects " +
                      std::to_string(m.input_dim()));
  }
}

}  // namespace detail

inline double score(const ScoringModel& m, std::span<const double> x) {
  detail::check_input(m, x);
  const auto p = m.params();
  const std::size_t d = m.input_dim();
  if (m.kind() == ModelKind::kLinear) {
    double h = p[d];
    for (std::size_t k = 0; k < d; ++k) h += p[k] * x[k];
    return h;
  }
  const std::size_t hid = m.hidden();
  const double* w1 = p.data();
  const double* b1 = w1 + hid * d;
  const double* out = b1 + hid;
  double h = p.back();
  for (std::size_t j = 0; j < hid; ++j) {
    double z = b1[j];
    for (std::size_t k = 0; k < d; ++k) z += w1[j * d + k] * x[k];
    h += out[j] * std::tanh(z);
  }
  return h;
}

// Writes dh/dparams into `grad` (resized as needed) and returns h.
inline double score_grad_into(const ScoringModel& m, std::span<const double> x, ParamVector& grad) {
  detail::check_input(m, x);
  grad.resize(m.param_count());
  const auto p = m.params();
  const std::size_t d = m.input_dim();
  if (m.kind() == ModelKind::kLinear) {
    double h = p[d];
    for (std::size_t k = 0; k < d; ++k) {
      h += p[k] * x[k];
      grad[k] = x[k];
    }
    grad[d] = 1.0;
    return h;
  }
  const std::size_t hid = m.hidden();
  const double* w1 = p.data();
  const double* b1 = w1 + hid * d;
  const double* out = b1 + hid;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + hid * d;
  double* g_out = g_b1 + hid;
  double h = p.back();
  for (std::size_t j = 0; j < hid; ++j) {
    double z = b1[j];
    for (std::size_t k = 0; k < d; ++k) z += w1[j * d + k] * x[k];
    const double a = std::tanh(z);
    h += out[j] * a;
    g_out[j] = a;
    const double delta = out[j] * (1.0 - a * a);
    g_b1[j] = delta;
    for (std::size_t k = 0; k < d; ++k) g_w1[j * d + k] = delta * x[k];
  }
  grad.back() = 1.0;
  return h;
}

struct ScoreGrad {
  double h = 0.0;
  ParamVector g;
};

inline ScoreGrad score_grad(const ScoringModel& m, std::span<const double> x) {
  ScoreGrad out;
  out.h = score_grad_into(m, x, out.g);
  return out;
}

// params <- params - step * g
inline void axpy_update(ScoringModel& m, std::span<const double> g, double step) {
  detail::require(g.size() == m.param_count(), "axpy_update: gradient length mismatch");
  auto p = m.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * g[i];
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Text checkpoint; parameters are written as hex floats so reloading is exact.
inline void save_checkpoint(const ScoringModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_checkpoint: cannot open '" + path + "'");
  out << "fedauc-model 1\n"
      << "kind " << to_string(m.kind()) << "\n"
      << "input_dim " << m.input_dim() << "\n"
      << "hidden " << m.hidden() << "\n"
      << "params " << m.param_count() << "\n";
  char buf[64];
  for (double v : m.params()) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    out << buf;
  }
  if (!out) throw DataError("save_checkpoint: write failed for '" + path + "'");
}

inline ScoringModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_checkpoint: cannot open '" + path + "'");
  std::string magic, key, kind;
  int version = 0;
  std::size_t d = 0, hidden = 0, count = 0;
  in >> magic >> version;
  if (magic != "fedauc-model" || version != 1) throw DataError("load_checkpoint: bad header in '" + path + "'");
  in >> key >> kind;
  if (key != "kind" || (kind != "linear" && kind != "mlp")) throw DataError("load_checkpoint: bad kind");
  in >> key >> d;
  if (key != "input_dim") throw DataError("load_checkpoint: expected input_dim");
  in >> key >> hidden;
  if (key != "hidden") throw DataError("load_checkpoint: expected hidden");
  in >> key >> count;
  if (key != "params") throw DataError("load_checkpoint: expected params");

  ScoringModel m = kind == "linear" ? ScoringModel::linear(d) : ScoringModel::mlp(d, hidden);
  if (count != m.param_count()) throw DataError("load_checkpoint: parameter count does not match dims");
  std::string tok;
  for (auto& v : m.params()) {
    if (!(in >> tok)) throw DataError("load_checkpoint: truncated parameter list");
    char* end = nullptr;
    v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw DataError("load_checkpoint: malformed value '" + tok + "'");
  }
  return m;
}

}  // namespace fedauc
