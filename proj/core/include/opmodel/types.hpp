#pragma once

// Domain values shared across the pipeline. Every type here is a plain value:
// copyable, immutable once built, and safe to hand between worker threads.
// Each has a canonical JSON form (field names as declared) with to_json /
// from_json overloads so nlohmann's adl conversions pick them up.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace opmodel {

using Json = nlohmann::ordered_json;

/// Serializes with invalid UTF-8 replaced, since program output is captured raw.
std::string dump_json(const Json& j, int indent = -1);

struct Task {
  std::string id;
  std::string text;
  std::optional<double> ground_truth;
  std::optional<std::string> dataset_tag;

  bool operator==(const Task&) const = default;
};

/// Throws Errc::InvalidTask when the text is empty after trimming.
Task validate_task(Task task);

struct ParamEntry {
  std::string type_label;
  std::string definition;

  bool operator==(const ParamEntry&) const = default;
};

/// Parameter names in reply order. Names are unique.
struct ParamSpec {
  std::vector<std::pair<std::string, ParamEntry>> entries;

  bool operator==(const ParamSpec&) const = default;
  bool contains(std::string_view name) const;
};

enum class InsightCategory { DomainTerminology, ProblemKeyPoint, ProblemEssence };

std::string_view to_string(InsightCategory c) noexcept;
std::optional<InsightCategory> parse_insight_category(std::string_view s) noexcept;

struct Insight {
  InsightCategory category{};
  std::string insight;

  bool operator==(const Insight&) const = default;
};

struct Advisory {
  std::vector<Insight> insights;  // 1..3

  bool operator==(const Advisory&) const = default;
};

struct MathModel {
  std::string variables;
  std::vector<std::string> constraints;
  std::string objective;

  bool operator==(const MathModel&) const = default;
};

struct SolverProgram {
  std::string source;
  std::string language_tag;
  std::string solver_tag;

  bool operator==(const SolverProgram&) const = default;
};

enum class ExecStatus {
  Accept,
  WrongAnswer,
  SyntaxFailure,
  RuntimeFailure,
  Timeout,
  SolverNotOptimal,
  RunnerError,
};

std::string_view to_string(ExecStatus s) noexcept;
std::optional<ExecStatus> parse_exec_status(std::string_view s) noexcept;

/// True for every status other than Accept and WrongAnswer.
bool is_failure(ExecStatus s) noexcept;

struct ExecutionOutcome {
  ExecStatus status = ExecStatus::RunnerError;
  std::optional<double> objective;
  std::optional<std::string> error_message;
  std::string stdout_text;
  std::string stderr_text;
  std::int64_t wall_ms = 0;

  bool operator==(const ExecutionOutcome&) const = default;
  bool failed() const noexcept { return is_failure(status); }
};

enum class TipKind { Modeling, Code };

std::string_view to_string(TipKind k) noexcept;

struct RevisionTip {
  TipKind kind = TipKind::Modeling;
  std::string scenario;
  std::string error_statement;
  std::string correct_fragment;
  std::string incorrect_fragment;

  bool operator==(const RevisionTip&) const = default;
};

struct Exemplar {
  std::string prompt;
  std::string response;
  double answer = 0.0;
  std::string problem_type = "general";
  std::string problem_subtype = "general";
  std::int64_t source_line = 0;
  std::string source_path;

  bool operator==(const Exemplar&) const = default;
};

enum class RetrievalKind { Modeling, Code };

std::string_view to_string(RetrievalKind k) noexcept;

/// Exemplars delivered to one agent. Either non-empty or flagged empty.
struct RetrievedSet {
  static constexpr std::size_t kMaxItems = 2;

  RetrievalKind kind = RetrievalKind::Modeling;
  std::vector<Exemplar> items;
  bool empty_signal = true;

  static RetrievedSet empty(RetrievalKind kind) { return {kind, {}, true}; }

  bool operator==(const RetrievedSet&) const = default;
};

// ---------------------------------------------------------------------------
// Trace records

/// One prompt/reply exchange with a backend. A repaired parse has two replies.
struct ChatExchange {
  std::string system_text;
  std::string user_text;
  std::vector<std::string> replies;

  bool operator==(const ChatExchange&) const = default;
};

struct TraceStep {
  std::string role;
  int round = 0;
  std::optional<ChatExchange> exchange;  // absent for the executor
  Json output;

  bool operator==(const TraceStep&) const = default;
};

struct RetrievalRecord {
  RetrievalKind kind = RetrievalKind::Modeling;
  std::string query;
  std::optional<std::string> type_hint;
  std::vector<std::int64_t> candidate_lines;  // source lines of coarse candidates
  std::optional<ChatExchange> rerank;
  RetrievedSet selected;

  bool operator==(const RetrievalRecord&) const = default;
};

/// One generate-or-revise round held in local memory. Round 0 is generation.
struct RoundRecord {
  int round = 0;
  MathModel model;
  SolverProgram program;
  ExecutionOutcome outcome;
  std::optional<RevisionTip> model_tip;
  std::optional<RevisionTip> code_tip;

  bool operator==(const RoundRecord&) const = default;
};

struct CallCounters {
  std::int64_t llm_calls = 0;
  std::int64_t retrieval_calls = 0;
  std::int64_t embedding_calls = 0;

  bool operator==(const CallCounters&) const = default;
};

struct AbortedRound {
  int round = 0;
  std::string error;

  bool operator==(const AbortedRound&) const = default;
};

struct TaskTrace {
  Task task;
  Json config;
  std::vector<TraceStep> steps;
  std::optional<ParamSpec> params;
  std::optional<Advisory> advisory;
  std::vector<RetrievalRecord> retrievals;
  std::vector<RoundRecord> rounds;
  int revision_count = 0;
  ExecStatus final_status = ExecStatus::RunnerError;
  std::optional<double> final_objective;
  std::optional<std::string> pipeline_error;
  std::optional<AbortedRound> aborted_round;
  CallCounters counters;

  bool operator==(const TaskTrace&) const = default;
};

// ---------------------------------------------------------------------------
// JSON forms

void to_json(Json& j, const Task& v);
void from_json(const Json& j, Task& v);
void to_json(Json& j, const ParamSpec& v);
void from_json(const Json& j, ParamSpec& v);
void to_json(Json& j, const Advisory& v);
void from_json(const Json& j, Advisory& v);
void to_json(Json& j, const MathModel& v);
void from_json(const Json& j, MathModel& v);
void to_json(Json& j, const SolverProgram& v);
void from_json(const Json& j, SolverProgram& v);
void to_json(Json& j, const ExecutionOutcome& v);
void from_json(const Json& j, ExecutionOutcome& v);
void to_json(Json& j, const RevisionTip& v);
void from_json(const Json& j, RevisionTip& v);
void to_json(Json& j, const Exemplar& v);
void from_json(const Json& j, Exemplar& v);
void to_json(Json& j, const RetrievedSet& v);
void from_json(const Json& j, RetrievedSet& v);
void to_json(Json& j, const ChatExchange& v);
void from_json(const Json& j, ChatExchange& v);
void to_json(Json& j, const TraceStep& v);
void from_json(const Json& j, TraceStep& v);
void to_json(Json& j, const RetrievalRecord& v);
void from_json(const Json& j, RetrievalRecord& v);
void to_json(Json& j, const RoundRecord& v);
void from_json(const Json& j, RoundRecord& v);
void to_json(Json& j, const CallCounters& v);
void from_json(const Json& j, CallCounters& v);
void to_json(Json& j, const TaskTrace& v);
void from_json(const Json& j, TaskTrace& v);

/// Pretty-printed trace document, newline terminated.
std::string serialize_trace(const TaskTrace& trace);

}  // namespace opmodel
