#pragma once

#include <cstdint>
#include <span>

#include "gnp/models/model_spec.hpp"
#include "gnp/models/predictive.hpp"
#include "gnp/models/setconv.hpp"
#include "gnp/models/unet.hpp"
#include "gnp/ndiff/params.hpp"
#include "gnp/ndiff/tape.hpp"
#include "gnp/tasks/task.hpp"

namespace gnp::models {

/// Encoded context set, ready to be queried at target inputs.
struct FunctionalRep {
  EncoderKind kind = EncoderKind::conv;
  /// deepset: 1 x width mean embedding.
  nd::Var summary;
  /// attentive: N x width embedded context inputs and N x attention_dim
  /// self-attended context embeddings (both invalid for an empty context).
  nd::Var keys;
  nd::Var values;
  /// conv: UNet output on `grid` (channels x grid length).
  ConvGrid grid;
  nd::Var grid_features;
};

/// A Gaussian neural process: permutation-invariant encoder, per-target
/// decoder, and a head turning decoder features into a GaussianPredictive.
///
/// Inputs are one-dimensional. Context outputs are point-major
/// (ctx_y[i * dim_y + a]); predictives are stacked output-major.
class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);
  /// Adopts existing parameters after checking every name and shape against
  /// a fresh initialization of `spec`. Throws std::invalid_argument on mismatch.
  Model(ModelSpec spec, nd::ParamStore params);

  const ModelSpec& spec() const noexcept { return spec_; }
  const nd::ParamStore& params() const noexcept { return params_; }
  nd::ParamStore& params() noexcept { return params_; }
  const UNetSpec& unet() const noexcept { return unet_; }

  /// Grid points kept beyond every input by the convolutional encoder so that
  /// predictions never see the grid boundary.
  std::size_t grid_margin() const;

  FunctionalRep encode(nd::Tape& tape, std::span<const double> ctx_x, std::span<const double> ctx_y,
                       std::span<const double> tgt_x) const;
  /// Raw decoder features at the targets (targets x total_features).
  nd::Var decode(nd::Tape& tape, const FunctionalRep& rep, std::span<const double> tgt_x) const;
  /// Applies the head transforms to raw features.
  PredictiveVars assemble(nd::Tape& tape, nd::Var features) const;

  PredictiveVars forward(nd::Tape& tape, std::span<const double> ctx_x, std::span<const double> ctx_y,
                         std::span<const double> tgt_x) const;
  PredictiveVars forward(nd::Tape& tape, const tasks::Task& task) const;

  GaussianPredictive predict(std::span<const double> ctx_x, std::span<const double> ctx_y,
                             std::span<const double> tgt_x) const;
  GaussianPredictive predict(const tasks::Task& task) const;

 private:
  void init(std::uint64_t seed);
  void check_inputs(std::span<const double> ctx_x, std::span<const double> ctx_y,
                    std::span<const double> tgt_x) const;
  nd::Var mlp(nd::Tape& tape, const std::string& prefix, std::size_t hidden, nd::Var x) const;

  ModelSpec spec_;
  UNetSpec unet_;
  nd::ParamStore params_;
};

/// Lower bound added to every observation-noise variance.
inline constexpr double kNoiseFloor = 1e-6;

}  // namespace gnp::models
