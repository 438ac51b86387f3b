#pragma once

// Judging, pass@1 aggregation, error decomposition, dataset loading and the
// benchmark runner with its ablation matrix.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opmodel/orchestrator.hpp"
#include "opmodel/types.hpp"

namespace opmodel {

enum class Verdict { Correct, WrongAnswer, ExecutionFailure };

std::string_view to_string(Verdict v) noexcept;

struct Judgment {
  Verdict verdict = Verdict::ExecutionFailure;
  std::optional<double> rel_error;
  std::optional<double> abs_error;

  bool operator==(const Judgment&) const = default;
};

void to_json(Json& j, const Judgment& v);

inline constexpr double kRelTolerance = 1e-3;
inline constexpr double kAbsTolerance = 1e-1;

/// Correct iff |y*| > 0 and |y* - y|/|y*| < 1e-3, or y* = 0 and |y| < 1e-1.
Judgment judge_value(double y_star, double y_hat);

/// ExecutionFailure when the outcome carries no objective or failed.
Judgment judge_solution(double y_star, const ExecutionOutcome& outcome);

/// Percentages at full precision; round only for presentation.
double aggregate_pass1(std::span<const Judgment> judgments);
double macro_average(std::span<const double> per_dataset);

struct ErrorRates {
  double wrong_rate = 0.0;
  double compile_rate = 0.0;
};

ErrorRates decompose_errors(std::span<const Judgment> judgments);

/// Two decimals, half away from zero.
double round2(double pct);
std::string format_pct(double pct);

// ---------------------------------------------------------------------------
// Datasets

/// Field mapping from a dataset's JSONL schema to Task.
struct DatasetAdapter {
  std::string name;
  std::string question_field;
  std::string answer_field;
  std::string id_field;  // optional in records; falls back to <tag>-<line>
};

/// "generic" {question, answer, id}, "mamo" {Question, Answer},
/// "orlm" {en_question, en_answer}, or "custom:<question>,<answer>[,<id>]".
DatasetAdapter adapter_by_name(std::string_view name);

/// One Task per JSONL record; blank and "#" lines skip. The last `holdout`
/// records are dropped. Throws IoError, or SchemaError with the line number.
std::vector<Task> load_dataset(const std::filesystem::path& path, const DatasetAdapter& adapter,
                               std::size_t holdout = 0, std::string dataset_tag = {});

// ---------------------------------------------------------------------------
// Benchmark

struct Variant {
  std::string name;  // full | no-iar | no-hrag | neither
  bool enable_iar = true;
  bool enable_hrag = true;

  bool operator==(const Variant&) const = default;
};

/// "all" -> the four variants; "none" -> full; "no-iar"/"no-hrag"/"neither" -> that one.
std::vector<Variant> ablation_variants(std::string_view ablate);

struct Dataset {
  std::string name;
  std::vector<Task> tasks;
};

struct DatasetResult {
  std::string dataset;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t wrong = 0;
  std::size_t failed = 0;
  double accuracy = 0.0;
  double wrong_rate = 0.0;
  double compile_rate = 0.0;

  bool operator==(const DatasetResult&) const = default;
};

struct VariantRow {
  Variant variant;
  std::vector<DatasetResult> datasets;
  double macro_avg = 0.0;
  CallCounters counters;  // summed over tasks

  bool operator==(const VariantRow&) const = default;
};

struct Report {
  Json config;
  std::vector<std::string> dataset_names;
  std::vector<VariantRow> rows;

  bool operator==(const Report&) const = default;
};

struct TaskResult {
  TaskTrace trace;
  Judgment judgment;
};

/// Pure function of the judgments per dataset.
DatasetResult summarize(std::string dataset, std::span<const Judgment> judgments);

struct BenchmarkDeps {
  /// Called once per variant so scripted backends start fresh each time.
  std::function<std::unique_ptr<ChatBackend>()> make_backend;
  const TemplateSet& templates;
  Executor& executor;
  const Library* library = nullptr;
  Embedder* embedder = nullptr;
  GlobalMemory* global = nullptr;
};

struct BenchmarkOptions {
  std::vector<Variant> variants{Variant{"full", true, true}};
  std::size_t parallel = 1;
  std::optional<std::filesystem::path> trace_dir;  // <dir>/<variant>/<dataset>/<task>.trace.json
  Json config_echo;
};

/// Solves every task under every variant, judges against ground truth and
/// aggregates. Per-task failures become ExecutionFailure. Throws
/// InvalidArgument on setup problems (no tasks, task without ground truth).
Report run_benchmark(std::span<const Dataset> datasets, const PipelineConfig& base, BenchmarkDeps deps,
                     const BenchmarkOptions& options, std::vector<std::vector<TaskResult>>* results_out = nullptr);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

Json report_json(const Report& report);
std::string report_markdown(const Report& report);
std::string report_csv(const Report& report);

/// Writes report.json, report.md and report.csv into `dir`.
void write_report(const Report& report, const std::filesystem::path& dir);

}  // namespace opmodel
