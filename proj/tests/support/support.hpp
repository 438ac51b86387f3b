#pragma once

// Fixtures shared by the unit tests, the acceptance binary and the benchmarks.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "opmodel/embedding.hpp"
#include "opmodel/evalharness.hpp"
#include "opmodel/executor.hpp"
#include "opmodel/hrag.hpp"
#include "opmodel/llm.hpp"
#include "opmodel/orchestrator.hpp"
#include "opmodel/prompts.hpp"

namespace opmodel::testsupport {

std::filesystem::path data_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "opmodel-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

// ---------------------------------------------------------------------------
// Multi-product transportation case: two runtime errors, then the objective.

struct TransportCase {
  Task task;
  std::unique_ptr<ScriptedBackend> backend;
  std::unique_ptr<StubRunner> runner;
  std::unique_ptr<Executor> executor;
  std::unique_ptr<HashEmbedder> embedder;
  std::unique_ptr<Library> library;
  TemplateSet templates = TemplateSet::builtin();
  PipelineConfig config;

  static TransportCase load();
  Pipeline pipeline();
};

/// One fresh solve of the transportation case.
TaskTrace run_transport_case();

std::filesystem::path transport_golden_path();

// ---------------------------------------------------------------------------
// Ten-task scripted suite, split over two datasets ("alpha", "beta").
//
//   s0..s5  objective printed at round 0 and correct (s0 has y* = 0)
//   s6      objective at round 0 but wrong
//   s7      runtime error, fixed in round 1
//   s8      syntax error, runtime error, fixed in round 2
//   s9      runtime error in every round

inline constexpr std::size_t kSuiteSize = 10;

std::vector<Dataset> suite_datasets();
std::vector<ScriptEntry> suite_script();
std::unique_ptr<StubRunner> suite_runner();

/// Program text the scripted code agents emit for (task, round).
std::string suite_program(std::size_t task, int round);

/// Everything run_benchmark needs for the suite, owned in one place.
struct SuiteHarness {
  TemplateSet templates = TemplateSet::builtin();
  std::unique_ptr<StubRunner> runner = suite_runner();
  std::unique_ptr<Executor> executor;
  std::unique_ptr<HashEmbedder> embedder;
  std::unique_ptr<Library> library;

  SuiteHarness();
  BenchmarkDeps deps();
};

}  // namespace opmodel::testsupport
