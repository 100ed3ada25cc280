#include <fstream>
#include <string>

#include "aop3d/optimizer.hpp"

namespace aop3d::bo {

nlohmann::ordered_json trial_to_json(const SearchSpace& space, const Trial& t) {
  nlohmann::ordered_json j;
  j["iteration"] = t.iteration;
  j["config"] = space.config_to_json(t.config);
  if (t.objective) {
    j["objective"] = *t.objective;
  } else {
    j["objective"] = nullptr;
  }
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

Trial trial_from_json(const SearchSpace& space, const nlohmann::json& j) {
  Trial t;
  try {
    t.iteration = j.at("iteration").get<std::size_t>();
    t.config = space.config_from_json(j.at("config"));
    if (!j.at("objective").is_null()) t.objective = j.at("objective").get<double>();
    if (j.contains("error")) t.error = j.at("error").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid trace line: ") + e.what());
  }
  return t;
}

void write_trace(const SearchSpace& space, const std::vector<Trial>& trials, std::ostream& out) {
  for (const auto& t : trials) out << trial_to_json(space, t).dump() << '\n';
}

void append_trial(const SearchSpace& space, const Trial& t, const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open trace file '" + path + "'");
  out << trial_to_json(space, t).dump() << '\n';
  out.flush();
  if (!out) throw IoError("cannot write trace file '" + path + "'");
}

std::vector<Trial> read_trace(const SearchSpace& space, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file '" + path + "'");
  std::vector<Trial> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      // A torn final line from an interrupted run is dropped.
      if (in.peek() == EOF) break;
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(trial_from_json(space, j));
  }
  return out;
}

}  // namespace aop3d::bo
