#include "gnp/tasks/generator.hpp"

namespace gnp::tasks {

namespace {
template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;
}  // namespace

Task generate(const GeneratorConfig& cfg, const TaskKey& key) {
  return std::visit(Overloaded{[&](const GaussianTaskConfig& g) { return sample_gaussian_task(g, key); },
                               [&](const LvTaskConfig& l) { return sample_lv_task(l, key); }},
                    cfg);
}

std::string generator_tag(const GeneratorConfig& cfg) {
  return std::visit([](const auto& c) { return c.tag(); }, cfg);
}

std::size_t generator_dim_y(const GeneratorConfig& cfg) {
  return std::visit(Overloaded{[](const GaussianTaskConfig&) -> std::size_t { return 1; },
                               [](const LvTaskConfig& l) { return l.dim_y(); }},
                    cfg);
}

const GaussianTaskConfig* as_gaussian(const GeneratorConfig& cfg) { return std::get_if<GaussianTaskConfig>(&cfg); }

}  // namespace gnp::tasks
