#pragma once

#include <span>
#include <string_view>

namespace gnp::cli::detail {

struct Preset {
  std::string_view name;
  std::string_view text;
};

/// Configurations from configs/, compiled in.
std::span<const Preset> bundled_presets();

}  // namespace gnp::cli::detail
