#include "opmodel/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "opmodel/error.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

namespace {

constexpr std::size_t kMaxRunnerOutput = 16 * 1024 * 1024;

bool known_status_word(std::string_view w) {
  return w == "ok" || w == "syntax_error" || w == "runtime_error" || w == "timeout" || w == "runner_error";
}

RunnerResult runner_error(std::string message, std::int64_t wall_ms = 0) {
  return RunnerResult{"runner_error", "", std::move(message), -1, wall_ms};
}

/// Last non-empty line: the exception summary of a traceback.
std::string summary_line(std::string_view stream) {
  const auto lines = text::split_lines(stream);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const auto t = text::trim(*it);
    if (!t.empty()) return std::string(t);
  }
  return {};
}

std::optional<double> numeric_token(std::string_view tok) {
  while (!tok.empty() && (tok.back() == ',' || tok.back() == ';' || tok.back() == ':')) tok.remove_suffix(1);
  if (tok.empty()) return std::nullopt;
  const std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || end == s.c_str() || errno == ERANGE || !std::isfinite(d)) return std::nullopt;
  // strtod accepts "nan", "inf", hex floats; keep plain decimals only
  for (char c : s) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '-' || c == '+' || c == 'e' ||
          c == 'E')) {
      return std::nullopt;
    }
  }
  return d;
}

std::optional<double> first_number_in(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])) != 0) ++i;
    std::size_t j = i;
    while (j < line.size() && std::isspace(static_cast<unsigned char>(line[j])) == 0) ++j;
    if (j > i) {
      if (auto d = numeric_token(line.substr(i, j - i))) return d;
    }
    i = j;
  }
  return std::nullopt;
}

void set_cloexec(int fd) { ::fcntl(fd, F_SETFD, FD_CLOEXEC); }

}  // namespace

void to_json(Json& j, const RunnerResult& v) {
  j = Json::object();
  j["status_word"] = v.status_word;
  j["stdout"] = v.stdout_text;
  j["stderr"] = v.stderr_text;
  j["exit_code"] = v.exit_code;
  j["wall_ms"] = v.wall_ms;
}

RunnerResult parse_runner_result(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(text::trim(json_text));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::SchemaError, std::string("runner output is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::SchemaError, "runner output must be a JSON object");
  const auto need = [&](const char* key) -> const Json& {
    auto it = j.find(key);
    if (it == j.end()) throw Error(Errc::SchemaError, std::string("runner output lacks \"") + key + "\"");
    return *it;
  };
  RunnerResult r;
  const auto& sw = need("status_word");
  const auto& out = need("stdout");
  const auto& err = need("stderr");
  const auto& code = need("exit_code");
  const auto& wall = need("wall_ms");
  if (!sw.is_string() || !out.is_string() || !err.is_string() || !code.is_number_integer() || !wall.is_number()) {
    throw Error(Errc::SchemaError, "runner output has a field of the wrong type");
  }
  r.status_word = sw.get<std::string>();
  if (!known_status_word(r.status_word)) throw Error(Errc::SchemaError, "unknown status_word '" + r.status_word + "'");
  r.stdout_text = out.get<std::string>();
  r.stderr_text = err.get<std::string>();
  r.exit_code = code.get<int>();
  r.wall_ms = static_cast<std::int64_t>(std::llround(wall.get<double>()));
  return r;
}

// ---------------------------------------------------------------------------

double parse_objective(std::string_view stdout_text) {
  for (auto line : text::split_lines(stdout_text)) {
    if (text::trim(line).empty()) continue;
    if (auto d = first_number_in(line)) return *d;
  }
  throw Error(Errc::NoObjective, "no parseable objective");
}

ExecutionOutcome classify(const RunnerResult& result, const ExecutorConfig& config) {
  ExecutionOutcome out;
  out.stdout_text = text::truncate_bytes(result.stdout_text, config.max_stream_bytes);
  out.stderr_text = text::truncate_bytes(result.stderr_text, config.max_stream_bytes);
  out.wall_ms = result.wall_ms;
  const auto message_or = [&](std::string fallback) {
    auto s = summary_line(result.stderr_text);
    return s.empty() ? fallback : s;
  };

  if (result.status_word == "ok") {
    if (result.exit_code != 0) {
      out.status = ExecStatus::RunnerError;
      out.error_message = "runner reported ok with exit code " + std::to_string(result.exit_code);
      return out;
    }
    for (const auto& marker : config.non_optimal_markers) {
      if (!marker.empty() && text::contains_ci(result.stdout_text, marker)) {
        out.status = ExecStatus::SolverNotOptimal;
        out.error_message = "solver reported " + marker;
        return out;
      }
    }
    try {
      out.objective = parse_objective(result.stdout_text);
      out.status = ExecStatus::Accept;
    } catch (const Error&) {
      out.status = ExecStatus::RuntimeFailure;
      out.error_message = "no parseable objective";
    }
  } else if (result.status_word == "syntax_error") {
    out.status = ExecStatus::SyntaxFailure;
    out.error_message = message_or("syntax error");
  } else if (result.status_word == "runtime_error") {
    out.status = ExecStatus::RuntimeFailure;
    out.error_message = message_or("runtime error");
  } else if (result.status_word == "timeout") {
    out.status = ExecStatus::Timeout;
    out.error_message = "execution timed out after " + std::to_string(result.wall_ms) + " ms";
  } else {
    out.status = ExecStatus::RunnerError;
    out.error_message = message_or("runner error");
  }
  return out;
}

// ---------------------------------------------------------------------------
// ExternalRunner

ExternalRunner::ExternalRunner(std::vector<std::string> command, std::chrono::milliseconds grace)
    : command_(std::move(command)), grace_(grace) {
  if (command_.empty() || command_.front().empty()) throw Error(Errc::InvalidArgument, "runner command is empty");
}

std::string ExternalRunner::id() const {
  std::string s = "external:";
  for (std::size_t i = 0; i < command_.size(); ++i) s += (i ? " " : "") + command_[i];
  return s;
}

RunnerResult ExternalRunner::run(const RunRequest& request, const std::filesystem::path& program_file) {
  std::vector<std::string> args = command_;
  args.insert(args.end(), {"--file", program_file.string(), "--timeout-ms", std::to_string(request.timeout_ms)});
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe(out_pipe) != 0) return runner_error(std::string("pipe failed: ") + std::strerror(errno));
  if (::pipe(err_pipe) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    return runner_error(std::string("pipe failed: ") + std::strerror(errno));
  }
  set_cloexec(out_pipe[0]);
  set_cloexec(err_pipe[0]);

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    return runner_error(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!request.workdir.empty()) {
      if (::chdir(request.workdir.c_str()) != 0) _exit(126);
    }
    ::execvp(argv[0], argv.data());
    _exit(127);
  }
  ::setpgid(pid, pid);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  const auto deadline = start + std::chrono::milliseconds(request.timeout_ms) + grace_;
  std::string out;
  std::string err;
  std::array<pollfd, 2> fds{pollfd{out_pipe[0], POLLIN, 0}, pollfd{err_pipe[0], POLLIN, 0}};
  bool killed = false;
  std::array<char, 8192> buf{};
  while (fds[0].fd >= 0 || fds[1].fd >= 0) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      ::kill(-pid, SIGKILL);
      killed = true;
      break;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(left, 1000)) + 1);
    if (rc < 0) {
      if (errno == EINTR) continue;
      ::kill(-pid, SIGKILL);
      killed = true;
      break;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
      const ssize_t n = ::read(fds[i].fd, buf.data(), buf.size());
      if (n <= 0) {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        continue;
      }
      auto& sink = i == 0 ? out : err;
      if (sink.size() < kMaxRunnerOutput) sink.append(buf.data(), static_cast<std::size_t>(n));
    }
  }
  for (auto& f : fds) {
    if (f.fd >= 0) ::close(f.fd);
  }
  int wstatus = 0;
  while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
  }
  // reap anything the runner left behind in its group
  ::kill(-pid, SIGKILL);
  const auto wall =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();

  if (killed) {
    return RunnerResult{"timeout", "", "runner exceeded " + std::to_string(request.timeout_ms) + " ms plus grace", -1,
                        wall};
  }
  if (WIFEXITED(wstatus) && WEXITSTATUS(wstatus) == 127 && text::trim(out).empty()) {
    return runner_error("cannot execute runner '" + command_.front() + "'", wall);
  }
  try {
    return parse_runner_result(out);
  } catch (const Error& e) {
    auto msg = std::string("runner protocol violation: ") + e.what();
    const auto tail = summary_line(err);
    if (!tail.empty()) msg += " (" + tail + ")";
    return runner_error(msg, wall);
  }
}

// ---------------------------------------------------------------------------
// StubRunner

void StubRunner::add_for_source(std::string source, RunnerResult result) {
  std::lock_guard lock(mutex_);
  by_source_.insert_or_assign(std::move(source), std::move(result));
}

void StubRunner::add_for_round(std::string task_id, int round, RunnerResult result) {
  std::lock_guard lock(mutex_);
  by_round_.insert_or_assign({std::move(task_id), round}, std::move(result));
}

RunnerResult StubRunner::run(const RunRequest& request, const std::filesystem::path&) {
  std::lock_guard lock(mutex_);
  if (auto it = by_source_.find(request.program.source); it != by_source_.end()) return it->second;
  if (auto it = by_round_.find({request.task_id, request.round}); it != by_round_.end()) return it->second;
  if (auto it = by_round_.find({"", request.round}); it != by_round_.end()) return it->second;
  return runner_error("stub runner has no result for task '" + request.task_id + "' round " +
                      std::to_string(request.round));
}

std::unique_ptr<StubRunner> load_stub_runner(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read stub runner script '" + path.string() + "'");
  auto stub = std::make_unique<StubRunner>();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.starts_with("#")) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = Json::parse(t);
      auto result = parse_runner_result(t);
      if (auto it = j.find("source"); it != j.end()) {
        stub->add_for_source(it->get<std::string>(), std::move(result));
      } else {
        stub->add_for_round(j.value("task", std::string{}), j.at("round").get<int>(), std::move(result));
      }
    } catch (const Error& e) {
      throw Error(Errc::SchemaError, where + e.what());
    } catch (const Json::exception& e) {
      throw Error(Errc::SchemaError, where + e.what());
    }
  }
  return stub;
}

// ---------------------------------------------------------------------------
// Executor

Executor::Executor(Runner& runner, ExecutorConfig config)
    : runner_(runner), config_(std::move(config)), permits_(std::max<std::ptrdiff_t>(1, config_.max_parallel)) {
  if (config_.work_root.empty()) config_.work_root = std::filesystem::temp_directory_path() / "opmodel-exec";
}

ExecutionOutcome Executor::execute(const RunRequest& request) {
  if (request.timeout_ms <= 0) throw Error(Errc::InvalidArgument, "timeout_ms must be positive");
  if (text::trim(request.program.source).empty()) throw Error(Errc::InvalidArgument, "program source is empty");

  std::filesystem::path dir = request.workdir;
  bool owned = false;
  if (dir.empty()) {
    dir = config_.work_root / ("run-" + std::to_string(::getpid()) + "-" + std::to_string(seq_.fetch_add(1)));
    owned = true;
  }

  permits_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{permits_};
  runs_.fetch_add(1);

  RunnerResult result;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto file = dir / "candidate";
  {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << request.program.source;
    if (!out) result = runner_error("cannot write candidate program to '" + file.string() + "'");
  }
  if (result.status_word.empty()) {
    RunRequest in_dir = request;
    in_dir.workdir = dir;
    result = runner_.run(in_dir, file);
  }
  if (owned && !config_.keep_workdirs) std::filesystem::remove_all(dir, ec);
  return classify(result, config_);
}

}  // namespace opmodel
