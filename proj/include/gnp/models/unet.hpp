#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gnp/ndiff/layers.hpp"

namespace gnp::models {

/// 1D UNet over a (channels x length) map: strided convolutions down, strided
/// transposed convolutions up, each up-step concatenated with the matching
/// down-step activation. The input length must be a multiple of
/// length_multiple().
struct UNetSpec {
  std::size_t in_channels = 8;
  std::size_t kernel = 5;
  std::size_t stride = 2;
  /// (in, out) channels of each down layer, from the input resolution down.
  std::vector<std::pair<std::size_t, std::size_t>> down;
  /// (in, out) channels of each up layer, from the coarsest resolution up.
  std::vector<std::pair<std::size_t, std::size_t>> up;

  /// The twelve-layer network used by the convolutional encoder.
  static UNetSpec standard();

  void validate() const;
  std::size_t out_channels() const;
  std::size_t length_multiple() const;
  /// Grid points on either side of an output that can influence it.
  std::size_t receptive_radius() const;
};

void init_unet(nd::ParamStore& store, const std::string& prefix, const UNetSpec& spec, std::uint64_t seed);
nd::Var unet_forward(nd::Tape& tape, const nd::ParamStore& store, const std::string& prefix, const UNetSpec& spec,
                     nd::Var x);

}  // namespace gnp::models
