#include "gnp/tasks/task_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace gnp::tasks {

namespace {

constexpr std::pair<Purpose, std::string_view> kPurposeNames[] = {
    {Purpose::init, "init"},
    {Purpose::train_task, "train"},
    {Purpose::validation_task, "validation"},
    {Purpose::test_task, "test"},
    {Purpose::sample, "sample"},
    {Purpose::lv_rates, "lv_rates"},
    {Purpose::lv_events, "lv_events"},
    {Purpose::threshold, "threshold"},
    {Purpose::fixture, "fixture"},
    {Purpose::bench, "bench"},
};

void append_values(std::string& out, std::string_view label, const std::vector<double>& v) {
  out += label;
  for (double x : v) fmt::format_to(std::back_inserter(out), " {}", x);
  out += '\n';
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <class T>
T parse_number(std::string_view token, std::size_t line, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw TaskParseError(line, fmt::format("bad {} '{}'", what, token));
  }
  return value;
}

}  // namespace

std::string_view to_string(Purpose p) {
  for (const auto& [k, name] : kPurposeNames)
    if (k == p) return name;
  return "unknown";
}

Purpose parse_purpose(std::string_view name) {
  for (const auto& [k, n] : kPurposeNames)
    if (n == name) return k;
  throw std::invalid_argument(fmt::format("unknown stream purpose '{}'", name));
}

TaskParseError::TaskParseError(std::size_t line, const std::string& detail, const std::string& source)
    : std::runtime_error(source.empty() ? fmt::format("line {}: {}", line, detail)
                                        : fmt::format("{}:{}: {}", source, line, detail)),
      line_(line),
      detail_(detail) {}

std::string format_task(const Task& task) {
  task.check_shape();
  std::string out = fmt::format("task {} {} {} {} {} {} {}\n", task.meta.generator.empty() ? "-" : task.meta.generator,
                                task.meta.seed, task.meta.index, to_string(task.meta.purpose), task.dim_y,
                                task.ctx_x.size(), task.tgt_x.size());
  append_values(out, "ctx_x", task.ctx_x);
  append_values(out, "ctx_y", task.ctx_y);
  append_values(out, "tgt_x", task.tgt_x);
  append_values(out, "tgt_y", task.tgt_y);
  return out;
}

void write_tasks(std::ostream& out, const std::vector<Task>& tasks) {
  for (const Task& t : tasks) out << format_task(t);
}

std::vector<Task> read_tasks(std::istream& in) {
  std::vector<Task> tasks;
  std::string line;
  std::size_t line_no = 0;
  // 0: expect header; 1..4: expect the four arrays in order.
  int stage = 0;
  std::size_t n_ctx = 0, n_tgt = 0;
  static constexpr std::string_view kLabels[] = {"ctx_x", "ctx_y", "tgt_x", "tgt_y"};
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (stage == 0) {
      if (tokens[0] != "task" || tokens.size() != 8) {
        throw TaskParseError(line_no, "expected 'task <generator> <seed> <index> <purpose> <dim_y> <n_ctx> <n_tgt>'");
      }
      Task t;
      t.meta.generator = tokens[1] == "-" ? "" : std::string(tokens[1]);
      t.meta.seed = parse_number<std::uint64_t>(tokens[2], line_no, "seed");
      t.meta.index = parse_number<std::uint64_t>(tokens[3], line_no, "index");
      try {
        t.meta.purpose = parse_purpose(tokens[4]);
      } catch (const std::invalid_argument& e) {
        throw TaskParseError(line_no, e.what());
      }
      t.dim_y = parse_number<std::size_t>(tokens[5], line_no, "dim_y");
      if (t.dim_y == 0) throw TaskParseError(line_no, "dim_y must be >= 1");
      n_ctx = parse_number<std::size_t>(tokens[6], line_no, "context count");
      n_tgt = parse_number<std::size_t>(tokens[7], line_no, "target count");
      tasks.push_back(std::move(t));
      stage = 1;
      continue;
    }
    Task& t = tasks.back();
    const std::string_view label = kLabels[stage - 1];
    if (tokens[0] != label) throw TaskParseError(line_no, fmt::format("expected '{}' line", label));
    const bool is_ctx = stage <= 2;
    const bool is_y = stage % 2 == 0;
    const std::size_t expected = (is_ctx ? n_ctx : n_tgt) * (is_y ? t.dim_y : 1);
    if (tokens.size() - 1 != expected) {
      throw TaskParseError(line_no, fmt::format("'{}' has {} values, expected {}", label, tokens.size() - 1, expected));
    }
    std::vector<double>& dst = stage == 1 ? t.ctx_x : stage == 2 ? t.ctx_y : stage == 3 ? t.tgt_x : t.tgt_y;
    dst.reserve(expected);
    for (std::size_t i = 1; i < tokens.size(); ++i) dst.push_back(parse_number<double>(tokens[i], line_no, "value"));
    stage = stage == 4 ? 0 : stage + 1;
  }
  if (stage != 0) throw TaskParseError(line_no, "truncated task record");
  return tasks;
}

std::vector<Task> read_task_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open task file '{}'", path));
  try {
    return read_tasks(in);
  } catch (const TaskParseError& e) {
    throw TaskParseError(e.line(), e.detail(), path);
  }
}

void write_task_file(const std::string& path, const std::vector<Task>& tasks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write task file '{}'", path));
  write_tasks(out, tasks);
  if (!out) throw std::runtime_error(fmt::format("error writing task file '{}'", path));
}

}  // namespace gnp::tasks
