#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "neurphy/physics.hpp"

namespace neurphy {

/// One task as a single JSON object on one line. Reals are written with 17
/// significant digits so that parsing reproduces every bit.
std::string task_to_json_line(const physics::Task& task);
physics::Task task_from_json_line(const std::string& line);

void write_tasks_jsonl(std::ostream& out, const std::vector<physics::Task>& tasks);
std::vector<physics::Task> read_tasks_jsonl(std::istream& in);

/// File variants; writing goes through a temporary and a rename.
void save_tasks_jsonl(const std::filesystem::path& path, const std::vector<physics::Task>& tasks);
std::vector<physics::Task> load_tasks_jsonl(const std::filesystem::path& path);

}  // namespace neurphy
