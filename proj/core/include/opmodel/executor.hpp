#pragma once

// Runs candidate programs through a runner process (or a stub), then turns
// the runner's report into an ExecutionOutcome.
//
// Runner protocol: the program is written to `<workdir>/candidate`, the runner
// is invoked as `<runner...> --file <path> --timeout-ms <n>` and prints one
// JSON object {status_word, stdout, stderr, exit_code, wall_ms}.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "opmodel/types.hpp"

namespace opmodel {

inline constexpr std::size_t kMaxStreamBytes = 64 * 1024;

struct RunnerResult {
  std::string status_word;  // ok | syntax_error | runtime_error | timeout | runner_error
  std::string stdout_text;
  std::string stderr_text;
  int exit_code = 0;
  std::int64_t wall_ms = 0;

  bool operator==(const RunnerResult&) const = default;
};

void to_json(Json& j, const RunnerResult& v);

/// Strict protocol parse: all five fields, known status word, ok => exit 0.
/// Throws SchemaError.
RunnerResult parse_runner_result(std::string_view json_text);

struct RunRequest {
  SolverProgram program;
  std::int64_t timeout_ms = 60'000;
  std::filesystem::path workdir;  // empty: a fresh directory per run
  std::string task_id;
  int round = 0;
};

class Runner {
 public:
  virtual ~Runner() = default;
  virtual RunnerResult run(const RunRequest& request, const std::filesystem::path& program_file) = 0;
  virtual std::string id() const = 0;
};

/// Spawns `command` plus the protocol arguments in its own process group. The
/// group is killed when the runner outlives timeout + grace; a runner that
/// exits without a valid protocol object yields runner_error.
class ExternalRunner : public Runner {
 public:
  explicit ExternalRunner(std::vector<std::string> command,
                          std::chrono::milliseconds grace = std::chrono::milliseconds(2000));

  RunnerResult run(const RunRequest& request, const std::filesystem::path& program_file) override;
  std::string id() const override;

 private:
  std::vector<std::string> command_;
  std::chrono::milliseconds grace_;
};

/// Scripted runner results. Lookup order: exact program source, then
/// (task, round), then (any task, round).
class StubRunner : public Runner {
 public:
  void add_for_source(std::string source, RunnerResult result);
  void add_for_round(std::string task_id, int round, RunnerResult result);

  RunnerResult run(const RunRequest& request, const std::filesystem::path& program_file) override;
  std::string id() const override { return "stub"; }

 private:
  std::mutex mutex_;
  std::map<std::string, RunnerResult> by_source_;
  std::map<std::pair<std::string, int>, RunnerResult> by_round_;
};

/// JSONL lines: {status_word, stdout, stderr, exit_code, wall_ms} plus either
/// "source" or "round" (and optionally "task"). Lines starting with "#" skip.
std::unique_ptr<StubRunner> load_stub_runner(const std::filesystem::path& path);

struct ExecutorConfig {
  std::ptrdiff_t max_parallel = 4;
  std::vector<std::string> non_optimal_markers{"infeasible", "unbounded"};
  std::size_t max_stream_bytes = kMaxStreamBytes;
  std::filesystem::path work_root;  // empty: <temp>/opmodel-exec
  bool keep_workdirs = false;
};

/// First finite numeric token of the first non-empty line, falling back to
/// later lines. Throws NoObjective.
double parse_objective(std::string_view stdout_text);

/// Maps a runner report to an outcome. Never yields WrongAnswer; Accept here
/// means "ran and printed an objective".
ExecutionOutcome classify(const RunnerResult& result, const ExecutorConfig& config = {});

class Executor {
 public:
  explicit Executor(Runner& runner, ExecutorConfig config = {});

  ExecutionOutcome execute(const RunRequest& request);

  std::int64_t runs() const noexcept { return runs_.load(); }
  const ExecutorConfig& config() const noexcept { return config_; }
  Runner& runner() const noexcept { return runner_; }

 private:
  Runner& runner_;
  ExecutorConfig config_;
  std::counting_semaphore<> permits_;
  std::atomic<std::int64_t> runs_{0};
  std::atomic<std::uint64_t> seq_{0};
};

}  // namespace opmodel
