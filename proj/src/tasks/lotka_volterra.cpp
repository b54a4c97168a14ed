#include "gnp/tasks/lotka_volterra.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace gnp::tasks {

double LvRates::total(std::int64_t predators, std::int64_t prey) const {
  const double x = static_cast<double>(predators);
  const double y = static_cast<double>(prey);
  return predator_birth * x * y + predator_death * x + prey_birth * y + prey_death * x * y;
}

std::string_view to_string(Species s) {
  switch (s) {
    case Species::predator: return "predator";
    case Species::prey: return "prey";
    case Species::both: return "both";
  }
  return "?";
}

Species parse_species(std::string_view name) {
  for (auto s : {Species::predator, Species::prey, Species::both})
    if (to_string(s) == name) return s;
  throw std::invalid_argument(fmt::format("unknown species '{}'", name));
}

void LvTaskConfig::validate() const {
  const LvRates& r = rate_centres;
  if (!(r.predator_birth > 0 && r.predator_death > 0 && r.prey_birth > 0 && r.prey_death > 0)) {
    throw std::invalid_argument("generator rates must all be > 0");
  }
  if (!(rate_spread >= 0.0 && rate_spread < 1.0)) throw std::invalid_argument("generator.rate_spread must be in [0, 1)");
  if (sim.initial_predators < 0 || sim.initial_prey < 0) {
    throw std::invalid_argument("generator initial populations must be >= 0");
  }
  if (!(sim.t_max > 0.0)) throw std::invalid_argument("generator.t_max must be > 0");
  if (sim.max_events < 1) throw std::invalid_argument("generator.max_events must be >= 1");
  if (min_context < 1) throw std::invalid_argument("generator.min_context must be >= 1");
  if (max_context < min_context) throw std::invalid_argument("generator.max_context must be >= generator.min_context");
  if (num_targets < 1) throw std::invalid_argument("generator.num_targets must be >= 1");
  if (!(output_scale > 0.0)) throw std::invalid_argument("generator.output_scale must be > 0");
  if (!(output_offset > 0.0)) throw std::invalid_argument("generator.output_offset must be > 0");
}

std::string LvTaskConfig::tag() const { return fmt::format("lv-{}", to_string(species)); }

LvRates sample_lv_rates(const LvTaskConfig& cfg, CounterRng& rng) {
  const double lo = 1.0 - cfg.rate_spread, hi = 1.0 + cfg.rate_spread;
  LvRates r;
  r.predator_birth = cfg.rate_centres.predator_birth * rng.uniform(lo, hi);
  r.predator_death = cfg.rate_centres.predator_death * rng.uniform(lo, hi);
  r.prey_birth = cfg.rate_centres.prey_birth * rng.uniform(lo, hi);
  r.prey_death = cfg.rate_centres.prey_death * rng.uniform(lo, hi);
  return r;
}

LvSeries gillespie_simulate(const LvRates& rates, CounterRng& rng, const LvSimConfig& sim) {
  LvSeries s;
  std::int64_t x = sim.initial_predators, y = sim.initial_prey;
  double t = 0.0;
  auto push = [&](double time) {
    s.time.push_back(time);
    s.predators.push_back(x);
    s.prey.push_back(y);
  };
  push(t);
  for (std::size_t events = 0; events < sim.max_events; ++events) {
    const double xd = static_cast<double>(x), yd = static_cast<double>(y);
    const double w[4] = {rates.predator_birth * xd * yd, rates.predator_death * xd, rates.prey_birth * yd,
                         rates.prey_death * xd * yd};
    const double total = w[0] + w[1] + w[2] + w[3];
    if (total <= 0.0) {
      push(sim.t_max);
      return s;
    }
    const double dt = rng.exponential(1.0 / total);
    if (t + dt > sim.t_max) {
      push(sim.t_max);
      return s;
    }
    t += dt;
    double u = rng.uniform() * total;
    int event = 0;
    while (event < 3 && u >= w[event]) u -= w[event++];
    // Round-off can leave u past the last positive weight; step back to one.
    while (w[event] <= 0.0) --event;
    switch (event) {
      case 0: ++x; break;
      case 1: --x; break;
      case 2: ++y; break;
      default: --y; break;
    }
    push(t);
  }
  return s;
}

LvSeries gillespie_simulate(const LvRates& rates, std::uint64_t seed, const LvSimConfig& sim) {
  CounterRng rng(seed, 0, Purpose::lv_events);
  return gillespie_simulate(rates, rng, sim);
}

double interpolate(const LvSeries& series, bool predator, double t) {
  const auto& pop = predator ? series.predators : series.prey;
  if (t <= series.time.front()) return static_cast<double>(pop.front());
  if (t >= series.time.back()) return static_cast<double>(pop.back());
  // First knot strictly after t; knots can share a time only at t_max.
  const auto it = std::upper_bound(series.time.begin(), series.time.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - series.time.begin());
  const std::size_t lo = hi - 1;
  const double t0 = series.time[lo], t1 = series.time[hi];
  if (t == t0 || t1 <= t0) return static_cast<double>(pop[lo]);
  const double a = (t - t0) / (t1 - t0);
  return (1.0 - a) * static_cast<double>(pop[lo]) + a * static_cast<double>(pop[hi]);
}

Task make_lv_task(const LvSeries& series, const LvTaskConfig& cfg, CounterRng& rng) {
  if (series.size() < 2) {
    throw std::invalid_argument(fmt::format("make_lv_task: series has {} knot(s), need at least 2", series.size()));
  }
  const auto n = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(cfg.min_context), static_cast<std::int64_t>(cfg.max_context)));
  const double t_end = series.t_end();
  const std::size_t dim = cfg.dim_y();
  auto observe = [&](double t, std::vector<double>& ys) {
    if (cfg.species != Species::prey) ys.push_back(interpolate(series, true, t) * cfg.output_scale + cfg.output_offset);
    if (cfg.species != Species::predator) ys.push_back(interpolate(series, false, t) * cfg.output_scale + cfg.output_offset);
  };
  Task task;
  task.dim_y = dim;
  for (std::size_t i = 0; i < n; ++i) {
    task.ctx_x.push_back(rng.uniform(0.0, t_end));
    observe(task.ctx_x.back(), task.ctx_y);
  }
  for (std::size_t i = 0; i < cfg.num_targets; ++i) {
    task.tgt_x.push_back(rng.uniform(0.0, t_end));
    observe(task.tgt_x.back(), task.tgt_y);
  }
  task.meta.generator = cfg.tag();
  return task;
}

Task sample_lv_task(const LvTaskConfig& cfg, const TaskKey& key) {
  // Rates and events get their own streams, keyed by the task's stream so
  // train/validation/test draws never coincide.
  const std::uint64_t stream = CounterRng::mix(key.index ^ (static_cast<std::uint64_t>(key.purpose) << 56));
  CounterRng rates_stream(key.seed, stream, Purpose::lv_rates);
  CounterRng event_stream(key.seed, stream, Purpose::lv_events);
  const LvRates rates = sample_lv_rates(cfg, rates_stream);
  const LvSeries series = gillespie_simulate(rates, event_stream, cfg.sim);
  CounterRng rng(key.seed, key.index, key.purpose);
  Task task = make_lv_task(series, cfg, rng);
  task.meta = TaskMeta{cfg.tag(), key.seed, key.index, key.purpose};
  return task;
}

}  // namespace gnp::tasks
