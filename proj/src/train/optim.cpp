#include "gnp/train/optim.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace gnp::train {

Adam::Adam(const nd::ParamStore& store, AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be > 0");
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.value.shape());
    v_.emplace_back(e.value.shape());
  }
}

bool Adam::step(nd::ParamStore& store, const nd::Gradients& grads) {
  if (grads.size() != store.size() || m_.size() != store.size()) {
    throw std::invalid_argument(
        fmt::format("adam: {} gradients for {} parameters", grads.size(), store.size()));
  }
  for (const auto& g : grads) {
    for (double v : g.values()) {
      if (!std::isfinite(v)) {
        ++skipped_;
        return false;
      }
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t e = 0; e < store.size(); ++e) {
    if (!store.entry(e).trainable) continue;
    auto p = store.values(e);
    const auto g = grads[e].values();
    auto m = m_[e].values();
    auto v = v_[e].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      p[k] += config_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.epsilon);
    }
  }
  return true;
}

double global_norm(const nd::Gradients& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) sq += v * v;
  return std::sqrt(sq);
}

double clip_global_norm(nd::Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.values()) v *= s;
  }
  return norm;
}

}  // namespace gnp::train
