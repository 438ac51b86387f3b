#include "opmodel/orchestrator.hpp"

#include "opmodel/error.hpp"
#include "opmodel/prompts.hpp"

namespace opmodel {

namespace {

constexpr std::string_view kNoComment = "None";

Json revision_output(const RevisionReply& r) {
  Json j = Json::object();
  j["tip"] = r.tip;
  if (r.model) j["model"] = *r.model;
  if (r.program) j["program"] = *r.program;
  return j;
}

}  // namespace

void PipelineConfig::validate() const {
  if (max_revisions < 0) throw Error(Errc::InvalidArgument, "max_revisions must be >= 0");
  if (timeout_ms <= 0) throw Error(Errc::InvalidArgument, "timeout must be positive");
  if (agent.temperature < 0) throw Error(Errc::InvalidArgument, "temperature must be >= 0");
  if (agent.max_retries < 0) throw Error(Errc::InvalidArgument, "max_retries must be >= 0");
  mmr.validate();
}

void to_json(Json& j, const PipelineConfig& v) {
  j = Json::object();
  j["max_revisions"] = v.max_revisions;
  j["enable_iar"] = v.enable_iar;
  j["enable_hrag"] = v.enable_hrag;
  j["timeout_ms"] = v.timeout_ms;
  j["mmr"] = v.mmr;
  j["exemplar_cap"] = v.exemplar_cap;
  j["model_name"] = v.agent.model_name;
  j["temperature"] = v.agent.temperature;
  j["max_retries"] = v.agent.max_retries;
  j["language"] = v.agent.language_tag;
  j["solver"] = v.agent.solver_tag;
}

Pipeline::Pipeline(PipelineDeps deps, PipelineConfig config)
    : deps_(deps), config_(std::move(config)), agents_(deps.backend, deps.templates, config_.agent) {
  config_.validate();
  config_.exemplar_cap = std::min(config_.exemplar_cap, RetrievedSet::kMaxItems);
  if (config_.enable_hrag && (deps_.library == nullptr || deps_.embedder == nullptr)) {
    throw Error(Errc::InvalidArgument, "retrieval is enabled but no library or embedder was provided");
  }
}

void Pipeline::record_step(TaskTrace& trace, std::string_view role, int round, const CallRecord* rec,
                           Json output) const {
  TraceStep step;
  step.role = std::string(role);
  step.round = round;
  if (rec != nullptr) {
    step.exchange = rec->exchange;
    trace.counters.llm_calls += static_cast<std::int64_t>(rec->exchange.replies.size());
  }
  step.output = output;
  if (deps_.global != nullptr) deps_.global->append(GlobalRecord{trace.task.id, step.role, round, {}, std::move(output)});
  trace.steps.push_back(std::move(step));
}

RetrievedSet Pipeline::retrieve(const Task& task, std::string query, RetrievalKind kind,
                                const std::optional<std::string>& type_hint, TaskTrace& trace) const {
  RetrievalRecord record;
  record.kind = kind;
  record.query = query;
  record.type_hint = type_hint;
  trace.counters.retrieval_calls += 1;
  trace.counters.embedding_calls += 1;
  const auto idx = coarse_indices(*deps_.library, *deps_.embedder, query, config_.mmr, type_hint);
  std::vector<Exemplar> candidates;
  for (auto i : idx) {
    candidates.push_back(deps_.library->exemplars()[i]);
    record.candidate_lines.push_back(candidates.back().source_line);
  }
  CallRecord rec;
  record.selected = rerank(agents_, task, query, candidates, kind, config_.exemplar_cap, rec);
  if (!rec.exchange.replies.empty()) {
    record.rerank = rec.exchange;
    trace.counters.llm_calls += static_cast<std::int64_t>(rec.exchange.replies.size());
  }
  auto selected = record.selected;
  trace.retrievals.push_back(std::move(record));
  return selected;
}

ExecutionOutcome Pipeline::execute(const Task& task, const SolverProgram& program, int round,
                                   TaskTrace& trace) const {
  RunRequest req;
  req.program = program;
  req.timeout_ms = config_.timeout_ms;
  req.task_id = task.id;
  req.round = round;
  auto outcome = deps_.executor.execute(req);
  record_step(trace, role::kExecutor, round, nullptr, Json(outcome));
  trace.final_status = outcome.status;
  trace.final_objective = outcome.objective;
  return outcome;
}

TaskTrace Pipeline::run_generation(const Task& task, LocalMemory& mem) const {
  TaskTrace trace;
  trace.task = task;
  trace.final_status = ExecStatus::RunnerError;
  std::optional<CallRecord> pending;
  std::string pending_role;
  try {
    const auto valid = validate_task(task);

    pending.emplace();
    pending_role = role::kParamExtractor;
    auto params = agents_.extract_parameters(valid, kNoComment, *pending);
    record_step(trace, pending_role, 0, &*pending, Json(params));
    trace.params = params;

    pending.emplace();
    pending_role = role::kModelingAdvisor;
    auto advisory = agents_.advise(valid, dump_json(Json(params), 2), *pending);
    record_step(trace, pending_role, 0, &*pending, Json(advisory));
    trace.advisory = advisory;
    pending.reset();

    const auto hint = type_hint_from_advisory(advisory);
    auto model_exemplars = config_.enable_hrag ? retrieve(valid, valid.text, RetrievalKind::Modeling, hint, trace)
                                               : RetrievedSet::empty(RetrievalKind::Modeling);

    pending.emplace();
    pending_role = role::kModelingExpert;
    auto model = agents_.formulate(valid, params, advisory, model_exemplars, *pending);
    record_step(trace, pending_role, 0, &*pending, Json(model));
    pending.reset();

    auto code_exemplars =
        config_.enable_hrag
            ? retrieve(valid, valid.text + "\n\n" + dump_json(Json(model), 2), RetrievalKind::Code, hint, trace)
            : RetrievedSet::empty(RetrievalKind::Code);

    pending.emplace();
    pending_role = role::kCodeExpert;
    auto program = agents_.generate_code(valid, model, code_exemplars, *pending);
    record_step(trace, pending_role, 0, &*pending, Json(program));
    pending.reset();

    auto outcome = execute(valid, program, 0, trace);
    mem.record_round(RoundRecord{0, std::move(model), std::move(program), std::move(outcome), {}, {}});
  } catch (const std::exception& e) {
    if (pending) {
      Json err = Json::object();
      err["error"] = e.what();
      record_step(trace, pending_role, 0, &*pending, std::move(err));
    }
    trace.final_status = ExecStatus::RunnerError;
    trace.final_objective.reset();
    trace.pipeline_error = e.what();
  }
  trace.rounds = mem.rounds();
  return trace;
}

void Pipeline::run_iar(TaskTrace& trace, LocalMemory& mem) const {
  if (!config_.enable_iar || trace.pipeline_error || mem.size() == 0) return;
  for (int r = 1; r <= config_.max_revisions; ++r) {
    const auto& prior = mem.rounds().back();
    if (!prior.outcome.failed()) break;
    const auto error_text = render_execution_error(prior.outcome, r);
    const auto [model_tip, code_tip] = mem.last_tips();

    CallRecord rec{r, {}};
    std::string_view active = role::kModelingRevision;
    try {
      auto model_reply = agents_.revise_model(trace.task, prior.model, error_text, model_tip, rec);
      record_step(trace, active, r, &rec, revision_output(model_reply));

      rec = CallRecord{r, {}};
      active = role::kCodeRevision;
      auto code_reply = agents_.revise_code(trace.task, prior.program, *model_reply.model, error_text, code_tip, rec);
      record_step(trace, active, r, &rec, revision_output(code_reply));

      auto outcome = execute(trace.task, *code_reply.program, r, trace);
      mem.record_round(RoundRecord{r, *model_reply.model, *code_reply.program, std::move(outcome),
                                   model_reply.tip, code_reply.tip});
      trace.revision_count = r;
    } catch (const std::exception& e) {
      Json err = Json::object();
      err["error"] = e.what();
      record_step(trace, active, r, &rec, std::move(err));
      trace.aborted_round = AbortedRound{r, e.what()};
      const auto* typed = dynamic_cast<const Error*>(&e);
      if (typed == nullptr || !is_repairable(typed->code())) trace.pipeline_error = e.what();
      break;
    }
  }
  trace.rounds = mem.rounds();
}

TaskTrace Pipeline::solve(const Task& task) const {
  LocalMemory mem(task.id);
  auto trace = run_generation(task, mem);
  run_iar(trace, mem);
  trace.rounds = mem.rounds();
  return trace;
}

std::string trace_document(TaskTrace trace, const Json& config) {
  trace.config = config;
  return serialize_trace(trace);
}

}  // namespace opmodel
