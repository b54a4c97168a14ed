#include "gnp/models/unet.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace gnp::models {

namespace {

nd::ConvSpec down_layer(const UNetSpec& s, std::size_t i) {
  return nd::ConvSpec{s.down[i].first, s.down[i].second, s.kernel, s.stride, false, nd::Activation::relu};
}

nd::ConvSpec up_layer(const UNetSpec& s, std::size_t i) {
  return nd::ConvSpec{s.up[i].first, s.up[i].second, s.kernel, s.stride, true, nd::Activation::relu};
}

}  // namespace

UNetSpec UNetSpec::standard() {
  UNetSpec s;
  s.down = {{8, 8}, {8, 16}, {16, 16}, {16, 32}, {32, 32}, {32, 64}};
  s.up = {{64, 32}, {64, 32}, {64, 16}, {32, 16}, {32, 8}, {16, 8}};
  return s;
}

void UNetSpec::validate() const {
  if (down.empty() || down.size() != up.size()) {
    throw std::invalid_argument(
        fmt::format("unet: {} down layers and {} up layers; need equal, non-zero counts", down.size(), up.size()));
  }
  if (kernel % 2 == 0 || stride < 1) throw std::invalid_argument("unet: kernel must be odd and stride >= 1");
  if (down.front().first != in_channels) throw std::invalid_argument("unet: first layer does not match in_channels");
  for (std::size_t i = 1; i < down.size(); ++i) {
    if (down[i].first != down[i - 1].second) throw std::invalid_argument(fmt::format("unet: down layer {} mismatch", i));
  }
  // Up layer i consumes the previous level's output concatenated with its skip.
  const std::size_t n = down.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t expected = i == 0 ? down.back().second : up[i - 1].second + down[n - i - 1].second;
    if (up[i].first != expected) {
      throw std::invalid_argument(
          fmt::format("unet: up layer {} takes {} channels but receives {}", i, up[i].first, expected));
    }
  }
}

std::size_t UNetSpec::out_channels() const { return up.back().second + down.front().first; }

std::size_t UNetSpec::length_multiple() const {
  std::size_t m = 1;
  for (std::size_t i = 0; i < down.size(); ++i) m *= stride;
  return m;
}

std::size_t UNetSpec::receptive_radius() const {
  // Each strided layer at resolution level j reaches (kernel-1)/2 samples of
  // spacing stride^j, once on the way down and once on the way up.
  std::size_t r = 0, spacing = 1;
  for (std::size_t j = 0; j < down.size(); ++j, spacing *= stride) r += 2 * ((kernel - 1) / 2) * spacing;
  return r;
}

void init_unet(nd::ParamStore& store, const std::string& prefix, const UNetSpec& spec, std::uint64_t seed) {
  spec.validate();
  for (std::size_t i = 0; i < spec.down.size(); ++i)
    nd::init_layer(store, fmt::format("{}.down{}", prefix, i), down_layer(spec, i), seed);
  for (std::size_t i = 0; i < spec.up.size(); ++i)
    nd::init_layer(store, fmt::format("{}.up{}", prefix, i), up_layer(spec, i), seed);
}

nd::Var unet_forward(nd::Tape& tape, const nd::ParamStore& store, const std::string& prefix, const UNetSpec& spec,
                     nd::Var x) {
  if (x.cols() % spec.length_multiple() != 0) {
    throw nd::ShapeError(
        fmt::format("unet: input length {} is not a multiple of {}", x.cols(), spec.length_multiple()));
  }
  const std::size_t n = spec.down.size();
  std::vector<nd::Var> skips{x};
  for (std::size_t i = 0; i < n; ++i) {
    skips.push_back(nd::layer_forward(tape, store, fmt::format("{}.down{}", prefix, i), down_layer(spec, i),
                                      skips.back()));
  }
  nd::Var h = skips.back();
  for (std::size_t i = 0; i < n; ++i) {
    h = nd::layer_forward(tape, store, fmt::format("{}.up{}", prefix, i), up_layer(spec, i), h);
    const nd::Var parts[] = {h, skips[n - i - 1]};
    h = nd::concat_rows(parts);
  }
  return h;
}

}  // namespace gnp::models
