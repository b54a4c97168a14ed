#include "gnp/cli/fixtures.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gnp/tasks/task_io.hpp"

namespace gnp::cli {

namespace fs = std::filesystem;

namespace {

struct Record {
  std::string header;
  std::vector<std::string> lines;
};

/// Groups lines into records, each starting at a "task" line. Lines before
/// the first record form a headerless record.
std::vector<Record> split_records(const std::string& text) {
  std::vector<Record> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("task ", 0) == 0 || out.empty()) out.push_back({line.rfind("task ", 0) == 0 ? line : "", {}});
    out.back().lines.push_back(line);
  }
  return out;
}

std::string field_of(const std::string& line) { return line.substr(0, line.find(' ')); }

}  // namespace

std::vector<FixtureSet> fixture_sets() {
  std::vector<FixtureSet> sets;
  for (auto kind : {gp::KernelKind::eq, gp::KernelKind::matern52, gp::KernelKind::noisy_mixture,
                    gp::KernelKind::weakly_periodic}) {
    tasks::GaussianTaskConfig g;
    g.kernel = gp::KernelSpec::preset(kind);
    sets.push_back({g.tag() + ".tasks", g, 4});
  }
  tasks::LvTaskConfig lv;
  sets.push_back({lv.tag() + ".tasks", lv, 4});
  lv.species = tasks::Species::both;
  sets.push_back({lv.tag() + ".tasks", lv, 2});
  return sets;
}

std::string fixture_text(const FixtureSet& set, std::uint64_t seed) {
  std::vector<tasks::Task> ts;
  for (std::size_t i = 0; i < set.count; ++i) ts.push_back(tasks::generate(set.generator, {seed, i, Purpose::fixture}));
  std::ostringstream out;
  tasks::write_tasks(out, ts);
  return out.str();
}

void generate_fixtures(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  for (const auto& set : fixture_sets()) {
    std::ofstream out(dir / set.file, std::ios::binary | std::ios::trunc);
    out << fixture_text(set, seed);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / set.file).string()));
  }
}

std::vector<std::string> verify_fixtures(const fs::path& dir, std::uint64_t seed) {
  std::vector<std::string> problems;
  for (const auto& set : fixture_sets()) {
    const fs::path path = dir / set.file;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      problems.push_back(fmt::format("{}: missing", set.file));
      continue;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string actual = ss.str();
    const std::string expected = fixture_text(set, seed);
    if (actual == expected) continue;

    const auto want = split_records(expected);
    const auto got = split_records(actual);
    const std::size_t n = std::max(want.size(), got.size());
    for (std::size_t r = 0; r < n; ++r) {
      if (r >= want.size()) {
        problems.push_back(fmt::format("{}: record {} is unexpected ({})", set.file, r, got[r].header));
        continue;
      }
      if (r >= got.size()) {
        problems.push_back(fmt::format("{}: record {} is missing ({})", set.file, r, want[r].header));
        continue;
      }
      if (want[r].lines == got[r].lines) continue;
      std::string fields;
      for (std::size_t l = 0; l < std::max(want[r].lines.size(), got[r].lines.size()); ++l) {
        const bool same = l < want[r].lines.size() && l < got[r].lines.size() && want[r].lines[l] == got[r].lines[l];
        if (same) continue;
        const std::string f = field_of(l < want[r].lines.size() ? want[r].lines[l] : got[r].lines[l]);
        fields += (fields.empty() ? "" : ", ") + f;
      }
      problems.push_back(fmt::format("{}: record {} ({}) differs in {}", set.file, r, want[r].header, fields));
    }
  }
  return problems;
}

}  // namespace gnp::cli
