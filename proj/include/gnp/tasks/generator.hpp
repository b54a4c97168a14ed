#pragma once

#include <string>
#include <variant>

#include "gnp/gp/kernel.hpp"
#include "gnp/tasks/gaussian.hpp"
#include "gnp/tasks/lotka_volterra.hpp"

namespace gnp::tasks {

using GeneratorConfig = std::variant<GaussianTaskConfig, LvTaskConfig>;

Task generate(const GeneratorConfig& cfg, const TaskKey& key);
std::string generator_tag(const GeneratorConfig& cfg);
std::size_t generator_dim_y(const GeneratorConfig& cfg);
/// Non-null when the generator is a GP, so exact oracles exist.
const GaussianTaskConfig* as_gaussian(const GeneratorConfig& cfg);

}  // namespace gnp::tasks
