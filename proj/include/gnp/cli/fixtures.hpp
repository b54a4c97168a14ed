#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gnp/tasks/generator.hpp"

namespace gnp::cli {

struct FixtureSet {
  std::string file;  ///< e.g. "gp-eq.tasks"
  tasks::GeneratorConfig generator;
  std::size_t count = 0;
};

/// The pinned task files: one per GP kernel and two Lotka-Volterra variants.
std::vector<FixtureSet> fixture_sets();

/// Task i of a set is drawn from stream (seed, i, fixture).
std::string fixture_text(const FixtureSet& set, std::uint64_t seed);

void generate_fixtures(const std::filesystem::path& dir, std::uint64_t seed);

/// Regenerates every set and byte-compares it with the file on disk. Returns
/// one line per divergent record (or missing file); empty when all match.
std::vector<std::string> verify_fixtures(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace gnp::cli
