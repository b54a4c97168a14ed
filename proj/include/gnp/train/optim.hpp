#pragma once

#include <cstddef>
#include <vector>

#include "gnp/ndiff/params.hpp"

namespace gnp::train {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction, taking ascent steps on an objective to be
/// maximized. Non-trainable entries are never touched.
class Adam {
 public:
  Adam(const nd::ParamStore& store, AdamConfig config);

  /// Applies one update. Returns false, leaving parameters and moments
  /// unchanged, when any gradient entry is non-finite.
  bool step(nd::ParamStore& store, const nd::Gradients& grads);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t skipped() const noexcept { return skipped_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::vector<nd::Tensor> m_, v_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
};

/// Global L2 norm over all gradient tensors.
double global_norm(const nd::Gradients& grads);
/// Rescales `grads` in place so that their global norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_global_norm(nd::Gradients& grads, double max_norm);

}  // namespace gnp::train
