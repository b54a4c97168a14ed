#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gnp/rng.hpp"
#include "gnp/tasks/task.hpp"

namespace gnp::tasks {

/// Event rates: predator birth (per X*Y), predator death (per X), prey birth
/// (per Y), prey death (per X*Y).
struct LvRates {
  double predator_birth = 0.01;
  double predator_death = 0.5;
  double prey_birth = 0.5;
  double prey_death = 0.01;

  /// Total event rate at populations (predators, prey).
  double total(std::int64_t predators, std::int64_t prey) const;
};

struct LvSimConfig {
  std::int64_t initial_predators = 50;
  std::int64_t initial_prey = 100;
  double t_max = 100.0;
  std::size_t max_events = 10000;
};

/// Piecewise-linear knots of a simulated trajectory.
struct LvSeries {
  std::vector<double> time;
  std::vector<std::int64_t> predators;
  std::vector<std::int64_t> prey;

  std::size_t size() const noexcept { return time.size(); }
  double t_end() const { return time.back(); }
};

enum class Species { predator, prey, both };
std::string_view to_string(Species s);
Species parse_species(std::string_view name);

struct LvTaskConfig {
  /// Rate centres; each rate is drawn as centre * Uniform(1 - spread, 1 + spread).
  LvRates rate_centres;
  double rate_spread = 0.1;
  LvSimConfig sim;
  std::size_t min_context = 1;
  std::size_t max_context = 50;
  std::size_t num_targets = 100;
  /// Outputs are population * output_scale + output_offset.
  double output_scale = 0.01;
  double output_offset = 0.01;
  Species species = Species::predator;

  void validate() const;
  std::string tag() const;
  std::size_t dim_y() const { return species == Species::both ? 2 : 1; }
};

LvRates sample_lv_rates(const LvTaskConfig& cfg, CounterRng& rng);

/// Gillespie simulation from (initial_predators, initial_prey) at t = 0.
/// Stops once the next event would fall past t_max (a final knot at t_max
/// holds the last state) or after max_events events. An extinct species
/// contributes no events; if both are extinct the state is held to t_max.
LvSeries gillespie_simulate(const LvRates& rates, CounterRng& rng, const LvSimConfig& sim = {});
LvSeries gillespie_simulate(const LvRates& rates, std::uint64_t seed, const LvSimConfig& sim = {});

/// Linear interpolation of a population series at time t (clamped to the
/// series' time range).
double interpolate(const LvSeries& series, bool predator, double t);

/// Builds an episode from a trajectory: N ~ Uniform{min..max} context and
/// num_targets target times uniform on [0, t_end]. Throws
/// std::invalid_argument if the series has fewer than two knots.
Task make_lv_task(const LvSeries& series, const LvTaskConfig& cfg, CounterRng& rng);

/// Rates, simulation and episode drawn from the stream for `key`.
Task sample_lv_task(const LvTaskConfig& cfg, const TaskKey& key);

}  // namespace gnp::tasks
