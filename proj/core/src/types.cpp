#include "opmodel/types.hpp"

#include <array>

#include "opmodel/error.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidTask: return "InvalidTask";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::ScriptExhausted: return "ScriptExhausted";
    case Errc::ReplyParseError: return "ReplyParseError";
    case Errc::CategoryError: return "CategoryError";
    case Errc::NoCodeBlock: return "NoCodeBlock";
    case Errc::SplitFormatError: return "SplitFormatError";
    case Errc::UnboundPlaceholder: return "UnboundPlaceholder";
    case Errc::IoError: return "IoError";
    case Errc::EmptyLibrary: return "EmptyLibrary";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::OrderViolation: return "OrderViolation";
    case Errc::NoObjective: return "NoObjective";
    case Errc::SchemaError: return "SchemaError";
    case Errc::EmptySet: return "EmptySet";
  }
  return "Unknown";
}

std::string dump_json(const Json& j, int indent) {
  return j.dump(indent, ' ', false, Json::error_handler_t::replace);
}

Task validate_task(Task task) {
  if (text::trim(task.text).empty()) {
    throw Error(Errc::InvalidTask, "task '" + task.id + "' has an empty problem statement");
  }
  return task;
}

bool ParamSpec::contains(std::string_view name) const {
  for (const auto& [key, _] : entries) {
    if (key == name) return true;
  }
  return false;
}

namespace {

constexpr std::array<std::pair<InsightCategory, std::string_view>, 3> kCategories{{
    {InsightCategory::DomainTerminology, "Domain Terminology"},
    {InsightCategory::ProblemKeyPoint, "Problem Key Point"},
    {InsightCategory::ProblemEssence, "Problem Essence"},
}};

constexpr std::array<std::pair<ExecStatus, std::string_view>, 7> kStatuses{{
    {ExecStatus::Accept, "Accept"},
    {ExecStatus::WrongAnswer, "WrongAnswer"},
    {ExecStatus::SyntaxFailure, "SyntaxFailure"},
    {ExecStatus::RuntimeFailure, "RuntimeFailure"},
    {ExecStatus::Timeout, "Timeout"},
    {ExecStatus::SolverNotOptimal, "SolverNotOptimal"},
    {ExecStatus::RunnerError, "RunnerError"},
}};

template <class T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

template <class T>
void get_optional(const Json& j, const char* key, std::optional<T>& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    out.reset();
  } else {
    out = it->template get<T>();
  }
}

RetrievalKind parse_retrieval_kind(const std::string& s) {
  if (s == "Modeling") return RetrievalKind::Modeling;
  if (s == "Code") return RetrievalKind::Code;
  throw Error(Errc::SchemaError, "unknown retrieval kind '" + s + "'");
}

}  // namespace

std::string_view to_string(InsightCategory c) noexcept {
  for (const auto& [k, name] : kCategories) {
    if (k == c) return name;
  }
  return "";
}

std::optional<InsightCategory> parse_insight_category(std::string_view s) noexcept {
  for (const auto& [k, name] : kCategories) {
    if (name == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(ExecStatus s) noexcept {
  for (const auto& [k, name] : kStatuses) {
    if (k == s) return name;
  }
  return "";
}

std::optional<ExecStatus> parse_exec_status(std::string_view s) noexcept {
  for (const auto& [k, name] : kStatuses) {
    if (name == s) return k;
  }
  return std::nullopt;
}

bool is_failure(ExecStatus s) noexcept {
  return s != ExecStatus::Accept && s != ExecStatus::WrongAnswer;
}

std::string_view to_string(TipKind k) noexcept {
  return k == TipKind::Modeling ? "Modeling" : "Code";
}

std::string_view to_string(RetrievalKind k) noexcept {
  return k == RetrievalKind::Modeling ? "Modeling" : "Code";
}

// --- Task -------------------------------------------------------------------

void to_json(Json& j, const Task& v) {
  j = Json::object();
  j["id"] = v.id;
  j["text"] = v.text;
  put_optional(j, "ground_truth", v.ground_truth);
  put_optional(j, "dataset_tag", v.dataset_tag);
}

void from_json(const Json& j, Task& v) {
  v.id = j.value("id", std::string{});
  j.at("text").get_to(v.text);
  get_optional(j, "ground_truth", v.ground_truth);
  get_optional(j, "dataset_tag", v.dataset_tag);
}

// --- ParamSpec --------------------------------------------------------------

void to_json(Json& j, const ParamSpec& v) {
  j = Json::object();
  for (const auto& [name, entry] : v.entries) {
    j[name] = Json{{"Type", entry.type_label}, {"Definition", entry.definition}};
  }
}

void from_json(const Json& j, ParamSpec& v) {
  v.entries.clear();
  for (auto it = j.begin(); it != j.end(); ++it) {
    v.entries.emplace_back(it.key(), ParamEntry{it->at("Type").get<std::string>(),
                                                it->at("Definition").get<std::string>()});
  }
}

// --- Advisory ---------------------------------------------------------------

void to_json(Json& j, const Advisory& v) {
  j = Json::array();
  for (const auto& ins : v.insights) {
    j.push_back(Json{{"category", std::string(to_string(ins.category))}, {"insight", ins.insight}});
  }
}

void from_json(const Json& j, Advisory& v) {
  v.insights.clear();
  for (const auto& item : j) {
    const auto name = item.at("category").get<std::string>();
    auto cat = parse_insight_category(name);
    if (!cat) throw Error(Errc::CategoryError, "unknown insight category '" + name + "'");
    v.insights.push_back({*cat, item.at("insight").get<std::string>()});
  }
}

// --- MathModel / SolverProgram ---------------------------------------------

void to_json(Json& j, const MathModel& v) {
  j = Json::object();
  j["VARIABLES"] = v.variables;
  j["CONSTRAINTS"] = v.constraints;
  j["OBJECTIVE"] = v.objective;
}

void from_json(const Json& j, MathModel& v) {
  j.at("VARIABLES").get_to(v.variables);
  j.at("CONSTRAINTS").get_to(v.constraints);
  j.at("OBJECTIVE").get_to(v.objective);
}

void to_json(Json& j, const SolverProgram& v) {
  j = Json::object();
  j["source"] = v.source;
  j["language_tag"] = v.language_tag;
  j["solver_tag"] = v.solver_tag;
}

void from_json(const Json& j, SolverProgram& v) {
  j.at("source").get_to(v.source);
  j.at("language_tag").get_to(v.language_tag);
  j.at("solver_tag").get_to(v.solver_tag);
}

// --- ExecutionOutcome -------------------------------------------------------

void to_json(Json& j, const ExecutionOutcome& v) {
  j = Json::object();
  j["status"] = std::string(to_string(v.status));
  put_optional(j, "objective", v.objective);
  put_optional(j, "error_message", v.error_message);
  j["stdout"] = v.stdout_text;
  j["stderr"] = v.stderr_text;
  j["wall_ms"] = v.wall_ms;
}

void from_json(const Json& j, ExecutionOutcome& v) {
  const auto name = j.at("status").get<std::string>();
  auto st = parse_exec_status(name);
  if (!st) throw Error(Errc::SchemaError, "unknown execution status '" + name + "'");
  v.status = *st;
  get_optional(j, "objective", v.objective);
  get_optional(j, "error_message", v.error_message);
  j.at("stdout").get_to(v.stdout_text);
  j.at("stderr").get_to(v.stderr_text);
  j.at("wall_ms").get_to(v.wall_ms);
}

// --- RevisionTip ------------------------------------------------------------

void to_json(Json& j, const RevisionTip& v) {
  j = Json::object();
  j["kind"] = std::string(to_string(v.kind));
  j["scenario"] = v.scenario;
  j["error_statement"] = v.error_statement;
  j["correct_fragment"] = v.correct_fragment;
  j["incorrect_fragment"] = v.incorrect_fragment;
}

void from_json(const Json& j, RevisionTip& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "Modeling") {
    v.kind = TipKind::Modeling;
  } else if (kind == "Code") {
    v.kind = TipKind::Code;
  } else {
    throw Error(Errc::SchemaError, "unknown tip kind '" + kind + "'");
  }
  j.at("scenario").get_to(v.scenario);
  j.at("error_statement").get_to(v.error_statement);
  j.at("correct_fragment").get_to(v.correct_fragment);
  j.at("incorrect_fragment").get_to(v.incorrect_fragment);
}

// --- Exemplar / RetrievedSet ------------------------------------------------

void to_json(Json& j, const Exemplar& v) {
  j = Json::object();
  j["prompt"] = v.prompt;
  j["response"] = v.response;
  j["answer"] = v.answer;
  j["problem_type"] = v.problem_type;
  j["problem_subtype"] = v.problem_subtype;
  j["source_line"] = v.source_line;
  j["source_path"] = v.source_path;
}

void from_json(const Json& j, Exemplar& v) {
  j.at("prompt").get_to(v.prompt);
  j.at("response").get_to(v.response);
  j.at("answer").get_to(v.answer);
  j.at("problem_type").get_to(v.problem_type);
  j.at("problem_subtype").get_to(v.problem_subtype);
  j.at("source_line").get_to(v.source_line);
  j.at("source_path").get_to(v.source_path);
}

void to_json(Json& j, const RetrievedSet& v) {
  j = Json::object();
  j["kind"] = std::string(to_string(v.kind));
  j["items"] = v.items;
  j["empty_signal"] = v.empty_signal;
}

void from_json(const Json& j, RetrievedSet& v) {
  v.kind = parse_retrieval_kind(j.at("kind").get<std::string>());
  j.at("items").get_to(v.items);
  j.at("empty_signal").get_to(v.empty_signal);
}

// --- trace records ----------------------------------------------------------

void to_json(Json& j, const ChatExchange& v) {
  j = Json::object();
  j["system"] = v.system_text;
  j["user"] = v.user_text;
  j["replies"] = v.replies;
}

void from_json(const Json& j, ChatExchange& v) {
  j.at("system").get_to(v.system_text);
  j.at("user").get_to(v.user_text);
  j.at("replies").get_to(v.replies);
}

void to_json(Json& j, const TraceStep& v) {
  j = Json::object();
  j["role"] = v.role;
  j["round"] = v.round;
  put_optional(j, "exchange", v.exchange);
  j["output"] = v.output;
}

void from_json(const Json& j, TraceStep& v) {
  j.at("role").get_to(v.role);
  j.at("round").get_to(v.round);
  get_optional(j, "exchange", v.exchange);
  v.output = j.at("output");
}

void to_json(Json& j, const RetrievalRecord& v) {
  j = Json::object();
  j["kind"] = std::string(to_string(v.kind));
  j["query"] = v.query;
  put_optional(j, "type_hint", v.type_hint);
  j["candidate_lines"] = v.candidate_lines;
  put_optional(j, "rerank", v.rerank);
  j["selected"] = v.selected;
}

void from_json(const Json& j, RetrievalRecord& v) {
  v.kind = parse_retrieval_kind(j.at("kind").get<std::string>());
  j.at("query").get_to(v.query);
  get_optional(j, "type_hint", v.type_hint);
  j.at("candidate_lines").get_to(v.candidate_lines);
  get_optional(j, "rerank", v.rerank);
  j.at("selected").get_to(v.selected);
}

void to_json(Json& j, const RoundRecord& v) {
  j = Json::object();
  j["round"] = v.round;
  j["model"] = v.model;
  j["program"] = v.program;
  j["outcome"] = v.outcome;
  put_optional(j, "model_tip", v.model_tip);
  put_optional(j, "code_tip", v.code_tip);
}

void from_json(const Json& j, RoundRecord& v) {
  j.at("round").get_to(v.round);
  j.at("model").get_to(v.model);
  j.at("program").get_to(v.program);
  j.at("outcome").get_to(v.outcome);
  get_optional(j, "model_tip", v.model_tip);
  get_optional(j, "code_tip", v.code_tip);
}

void to_json(Json& j, const CallCounters& v) {
  j = Json::object();
  j["llm_calls"] = v.llm_calls;
  j["retrieval_calls"] = v.retrieval_calls;
  j["embedding_calls"] = v.embedding_calls;
}

void from_json(const Json& j, CallCounters& v) {
  j.at("llm_calls").get_to(v.llm_calls);
  j.at("retrieval_calls").get_to(v.retrieval_calls);
  j.at("embedding_calls").get_to(v.embedding_calls);
}

void to_json(Json& j, const TaskTrace& v) {
  j = Json::object();
  j["task"] = v.task;
  j["config"] = v.config;
  j["steps"] = v.steps;
  put_optional(j, "params", v.params);
  put_optional(j, "advisory", v.advisory);
  j["retrievals"] = v.retrievals;
  j["rounds"] = v.rounds;
  j["revision_count"] = v.revision_count;
  j["final_status"] = std::string(to_string(v.final_status));
  put_optional(j, "final_objective", v.final_objective);
  put_optional(j, "pipeline_error", v.pipeline_error);
  if (v.aborted_round) {
    j["aborted_round"] = Json{{"round", v.aborted_round->round}, {"error", v.aborted_round->error}};
  } else {
    j["aborted_round"] = nullptr;
  }
  j["counters"] = v.counters;
}

void from_json(const Json& j, TaskTrace& v) {
  j.at("task").get_to(v.task);
  v.config = j.at("config");
  j.at("steps").get_to(v.steps);
  get_optional(j, "params", v.params);
  get_optional(j, "advisory", v.advisory);
  j.at("retrievals").get_to(v.retrievals);
  j.at("rounds").get_to(v.rounds);
  j.at("revision_count").get_to(v.revision_count);
  const auto name = j.at("final_status").get<std::string>();
  auto st = parse_exec_status(name);
  if (!st) throw Error(Errc::SchemaError, "unknown final status '" + name + "'");
  v.final_status = *st;
  get_optional(j, "final_objective", v.final_objective);
  get_optional(j, "pipeline_error", v.pipeline_error);
  const auto& ab = j.at("aborted_round");
  if (ab.is_null()) {
    v.aborted_round.reset();
  } else {
    v.aborted_round = AbortedRound{ab.at("round").get<int>(), ab.at("error").get<std::string>()};
  }
  j.at("counters").get_to(v.counters);
}

std::string serialize_trace(const TaskTrace& trace) {
  return dump_json(Json(trace), 2) + "\n";
}

}  // namespace opmodel
