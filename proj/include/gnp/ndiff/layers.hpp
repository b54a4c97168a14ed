#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "gnp/ndiff/ops.hpp"
#include "gnp/ndiff/params.hpp"

namespace gnp::nd {

enum class Activation { none, relu };

/// y = W x + b, applied to each row of an (n x in) input.
struct DenseSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::relu;
};

/// Strided 1D convolution over a (channels x length) map. Padding is
/// (kernel-1)/2; transpose layers use output_padding = stride-1 so that the
/// output length is exactly stride * input length.
struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 5;
  std::size_t stride = 2;
  bool transpose = false;
  Activation activation = Activation::relu;

  ConvGeometry geometry() const {
    return ConvGeometry{kernel, stride, (kernel - 1) / 2, transpose ? stride - 1 : 0};
  }
};

/// Scaled dot-product attention softmax(Q K^T / sqrt(dim)) V with
/// Q = queries Wq^T, K = keys Wk^T, V = values Wv^T.
struct AttentionSpec {
  std::size_t query_in = 0;
  std::size_t key_in = 0;
  std::size_t value_in = 0;
  std::size_t dim = 128;
};

using LayerSpec = std::variant<DenseSpec, ConvSpec, AttentionSpec>;

/// Registers the parameters of `spec` under `prefix` (".w", ".b", or ".wq",
/// ".wk", ".wv"). Weights are uniform in +-sqrt(6 / (fan_in + fan_out)) and
/// biases start at zero.
void init_layer(ParamStore& store, const std::string& prefix, const LayerSpec& spec, std::uint64_t seed);

/// Dense and conv layers map `input` directly; attention layers treat the
/// input as queries, keys and values at once (self-attention).
Var layer_forward(Tape& tape, const ParamStore& store, const std::string& prefix, const LayerSpec& spec, Var input);

/// Cross-attention: queries from one set, keys/values from another. With an
/// empty key set every output row is zero.
Var attend(Tape& tape, const ParamStore& store, const std::string& prefix, const AttentionSpec& spec, Var queries,
           Var keys, Var values);

Var activate(Var x, Activation activation);

}  // namespace gnp::nd
