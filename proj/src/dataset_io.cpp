#include "neurphy/dataset_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "neurphy/error.hpp"
#include "neurphy/io_util.hpp"

namespace neurphy {

using physics::Task;

std::string task_to_json_line(const Task& task) {
  // Hand-rolled so every real carries exactly 17 significant digits.
  std::string s;
  s += "{\"task_id\":" + std::to_string(task.task_id);
  s += ",\"system\":\"";
  s += physics::to_string(task.system);
  s += "\",\"globals\":{";
  for (std::size_t i = 0; i < task.globals.size(); ++i) {
    if (i) s += ',';
    s += nlohmann::json(task.globals[i].first).dump() + ":" + format_real(task.globals[i].second);
  }
  s += "},\"states\":[";
  for (std::size_t t = 0; t < task.states.size(); ++t) {
    if (t) s += ',';
    s += '[';
    for (std::size_t k = 0; k < task.states[t].size(); ++k) {
      if (k) s += ',';
      s += format_real(task.states[t][k]);
    }
    s += ']';
  }
  s += "],\"observations\":[";
  for (std::size_t t = 0; t < task.observations.size(); ++t) {
    if (t) s += ',';
    s += '[' + format_real(task.observations[t][0]) + ',' + format_real(task.observations[t][1]) + ']';
  }
  s += "],\"dt\":" + format_real(task.dt);
  s += ",\"seed\":" + std::to_string(task.seed) + "}";
  return s;
}

Task task_from_json_line(const std::string& line) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
    Task task;
    task.task_id = j.at("task_id").get<std::int64_t>();
    task.system = physics::system_from_string(j.at("system").get<std::string>());
    for (const auto& [key, value] : j.at("globals").items()) task.globals.emplace_back(key, value.get<double>());
    task.states = j.at("states").get<std::vector<std::vector<double>>>();
    for (const auto& obs : j.at("observations")) {
      if (obs.size() != 2) throw Error(ErrorCode::kCorrupt, "observation must have 2 components");
      task.observations.push_back({obs[0].get<double>(), obs[1].get<double>()});
    }
    task.dt = j.at("dt").get<double>();
    task.seed = j.at("seed").get<std::uint64_t>();
    if (task.states.size() != task.observations.size() || task.observations.size() < 2) {
      throw Error(ErrorCode::kCorrupt, "task " + std::to_string(task.task_id) + " has inconsistent lengths");
    }
    return task;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorrupt, std::string("malformed task line: ") + e.what());
  }
}

void write_tasks_jsonl(std::ostream& out, const std::vector<Task>& tasks) {
  for (const auto& t : tasks) out << task_to_json_line(t) << '\n';
}

std::vector<Task> read_tasks_jsonl(std::istream& in) {
  std::vector<Task> tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    tasks.push_back(task_from_json_line(line));
  }
  return tasks;
}

void save_tasks_jsonl(const std::filesystem::path& path, const std::vector<Task>& tasks) {
  std::ostringstream buf;
  write_tasks_jsonl(buf, tasks);
  write_file_atomic(path, buf.str());
}

std::vector<Task> load_tasks_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  return read_tasks_jsonl(in);
}

}  // namespace neurphy
