#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gnp/tasks/task.hpp"

namespace gnp::tasks {

// Line-oriented task records:
//
//   task <generator> <seed> <index> <purpose> <dim_y> <n_context> <n_targets>
//   ctx_x <n_context values>
//   ctx_y <n_context * dim_y values>
//   tgt_x <n_targets values>
//   tgt_y <n_targets * dim_y values>
//
// Values are whitespace separated and printed in shortest round-trip form,
// so a write/read cycle reproduces the doubles exactly. Blank lines and lines
// starting with '#' are ignored.

std::string_view to_string(Purpose p);
Purpose parse_purpose(std::string_view name);

std::string format_task(const Task& task);
void write_tasks(std::ostream& out, const std::vector<Task>& tasks);

class TaskParseError : public std::runtime_error {
 public:
  TaskParseError(std::size_t line, const std::string& detail, const std::string& source = "");
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

std::vector<Task> read_tasks(std::istream& in);
std::vector<Task> read_task_file(const std::string& path);
void write_task_file(const std::string& path, const std::vector<Task>& tasks);

}  // namespace gnp::tasks
