#include "aop3d/design.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace aop3d::design {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPlaceholder = "{config}";

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// mkstemp-backed temporary file removed on scope exit.
struct TempFile {
  explicit TempFile(const std::string& stem) {
    std::string tmpl = (fs::temp_directory_path() / (stem + "-XXXXXX")).string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw IoError("cannot create a temporary file");
    ::close(fd);
    path = tmpl;
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  fs::path path;
};

}  // namespace

DesignSpaceSpec spec_from_json(const nlohmann::ordered_json& j) {
  DesignSpaceSpec s;
  try {
    for (const auto& [name, choices] : j.at("dims").items()) s.dims.emplace_back(name, choices.get<std::vector<std::string>>());
    s.command = j.at("command").get<std::string>();
    s.budget = j.value("budget", std::size_t{0});
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid design space: ") + e.what());
  }
  return s;
}

DesignSpaceSpec read_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open design space '" + path.string() + "'");
  try {
    return spec_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("design space '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void validate(const DesignSpaceSpec& spec) {
  if (spec.dims.empty()) throw ParameterError("design space has no dimensions");
  for (const auto& [name, choices] : spec.dims)
    if (choices.empty()) throw ParameterError("design dimension '" + name + "' has no choices");
  if (spec.command.find(kPlaceholder) == std::string::npos)
    throw ParameterError("command template must contain the {config} placeholder");
  if (spec.budget < 1) throw ParameterError("budget must be at least 1");
}

bo::SearchSpace design_space(const DesignSpaceSpec& spec) {
  bo::SearchSpace s;
  for (const auto& [name, choices] : spec.dims) s.add_categorical(name, choices);
  s.validate();
  return s;
}

CommandResult run_command(const std::string& command) {
  TempFile err("aop3d-stderr");
  CommandResult r;
  FILE* pipe = ::popen(("{ " + command + "\n} 2>" + shell_quote(err.path.string())).c_str(), "r");
  if (!pipe) throw IoError("cannot start command: " + command);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  r.err = read_file(err.path);
  return r;
}

double parse_objective(const std::string& stdout_text) {
  std::stringstream ss(stdout_text);
  std::string line, last;
  while (std::getline(ss, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  if (last.empty()) throw bo::TrialFailed("command printed nothing");
  try {
    const auto j = nlohmann::json::parse(last);
    const auto& v = j.at("objective");
    if (!v.is_number()) throw bo::TrialFailed("objective is not a number: " + last);
    return v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw bo::TrialFailed("malformed objective output '" + last + "': " + e.what());
  }
}

bo::Trace optimize_design(const DesignSpaceSpec& spec, std::function<void(const bo::Trial&)> on_trial) {
  validate(spec);
  const auto space = design_space(spec);
  auto objective = [&](const bo::Config& c) {
    TempFile cfg("aop3d-config");
    {
      std::ofstream out(cfg.path);
      out << space.config_to_json(c).dump() << '\n';
      if (!out) throw IoError("cannot write config file '" + cfg.path.string() + "'");
    }
    std::string cmd;
    const std::string quoted = shell_quote(cfg.path.string());
    const std::string placeholder = kPlaceholder;
    std::size_t from = 0;
    for (auto pos = spec.command.find(placeholder); pos != std::string::npos; pos = spec.command.find(placeholder, from)) {
      cmd += spec.command.substr(from, pos - from) + quoted;
      from = pos + placeholder.size();
    }
    cmd += spec.command.substr(from);
    const auto r = run_command(cmd);
    if (r.exit_code != 0)
      throw bo::TrialFailed("command exited with status " + std::to_string(r.exit_code) + "; stderr: " + r.err);
    try {
      return parse_objective(r.out);
    } catch (const bo::TrialFailed& e) {
      throw bo::TrialFailed(std::string(e.what()) + "; stderr: " + r.err);
    }
  };
  bo::OptimizeOptions opts;
  opts.budget = spec.budget;
  opts.seed = spec.seed;
  opts.strategy = bo::Strategy::Bayes;
  opts.surrogate = bo::SurrogateKind::Forest;
  opts.on_trial = std::move(on_trial);
  return bo::optimize(space, objective, opts);
}

}  // namespace aop3d::design
