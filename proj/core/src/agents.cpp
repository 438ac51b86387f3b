#include "opmodel/agents.hpp"

#include "opmodel/reply_parsing.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

namespace {

constexpr std::string_view kParamSchema =
    R"({"<ParameterName>": {"Type": "<type or shape>", "Definition": "<meaning>"}, ...})";
constexpr std::string_view kAdvisorySchema =
    R"([{"category": "Domain Terminology" | "Problem Key Point" | "Problem Essence", "insight": "<sentence>"}] with 1 to 3 entries)";
constexpr std::string_view kModelSchema =
    R"({"VARIABLES": "<text>", "CONSTRAINTS": ["<constraint>", ...], "OBJECTIVE": "<objective>"})";
constexpr std::string_view kCodeSchema = "one complete program inside a single ``` fenced code block";
constexpr std::string_view kModelRevisionSchema =
    R"({"tip_type": "modeling", "scenario": "...", "error_statement": "...", "correct_component": "...", "incorrect_model": "..."}
<split>
{"VARIABLES": "...", "CONSTRAINTS": ["..."], "OBJECTIVE": "..."})";
constexpr std::string_view kCodeRevisionSchema =
    R"({"tip_type": "code", "scenario": "...", "error_statement": "...", "correct_code_snippet": "...", "incorrect_code_snippet": "..."}
<split>
```
<full corrected program>
```)";

std::string_view status_label(ExecStatus s) {
  switch (s) {
    case ExecStatus::Accept: return "Accepted";
    case ExecStatus::WrongAnswer: return "Wrong Answer";
    case ExecStatus::SyntaxFailure: return "Syntax Error";
    case ExecStatus::RuntimeFailure: return "Runtime Error";
    case ExecStatus::Timeout: return "Time Limit Exceeded";
    case ExecStatus::SolverNotOptimal: return "Solver Not Optimal";
    case ExecStatus::RunnerError: return "Runner Error";
  }
  return "Unknown";
}

Json exemplar_model_json(const reply::ExemplarParts& parts) {
  if (parts.model) {
    Json m = Json::object();
    for (const char* key : {"VARIABLES", "CONSTRAINTS", "OBJECTIVE"}) {
      if (auto it = parts.model->find(key); it != parts.model->end()) m[key] = *it;
    }
    return m.empty() ? *parts.model : m;
  }
  return parts.model_text;
}

}  // namespace

bool is_repairable(Errc code) noexcept {
  switch (code) {
    case Errc::ReplyParseError:
    case Errc::CategoryError:
    case Errc::NoCodeBlock:
    case Errc::SplitFormatError:
      return true;
    default:
      return false;
  }
}

std::string repair_instruction(std::string_view error, std::string_view schema) {
  std::string out = "\n\nYour previous reply could not be used: ";
  out += error;
  out += "\nReply again using exactly this format and nothing else:\n";
  out += schema;
  out += '\n';
  return out;
}

std::string render_exemplars(const RetrievedSet& set) {
  if (set.empty_signal || set.items.empty()) return std::string(kNoExemplar);
  std::string out;
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const auto& ex = set.items[i];
    const auto parts = reply::split_exemplar_response(ex.response);
    Json j = Json::object();
    j["Problem description"] = ex.prompt;
    j["Mathematical Model"] = exemplar_model_json(parts);
    if (set.kind == RetrievalKind::Code) j["Code"] = parts.code;
    if (i > 0) out += "\n";
    out += "Exemplar " + std::to_string(i + 1) + ":\n" + dump_json(j, 2) + "\n";
  }
  return out;
}

std::string render_execution_error(const ExecutionOutcome& outcome, int round) {
  Json j = Json::object();
  j["iter_" + std::to_string(round)] = outcome.error_message.value_or(std::string{});
  j["status"] = status_label(outcome.status);
  return dump_json(j);
}

std::string render_last_tip(const std::optional<RevisionTip>& tip) {
  if (!tip) return std::string(kNoTip);
  return dump_json(reply::tip_wire_json(*tip), 2);
}

// ---------------------------------------------------------------------------

Agents::Agents(ChatBackend& backend, const TemplateSet& templates, AgentConfig config)
    : backend_(backend), templates_(templates), config_(std::move(config)) {}

std::pair<std::string, std::string> Agents::render(std::string_view role, Bindings bindings) const {
  bindings.try_emplace("language", config_.language_tag);
  bindings.try_emplace("solver", config_.solver_tag);
  const auto& prompt = templates_.get(role);
  return {prompt.role_description.render(bindings), prompt.task.render(bindings)};
}

std::string Agents::complete(std::string_view role, const Task& task, const std::string& system,
                             const std::string& user, CallRecord& rec) const {
  ChatRequest req;
  req.system_text = system;
  req.user_text = user;
  req.model_name = config_.model_name;
  req.temperature = config_.temperature;
  req.max_retries = config_.max_retries;
  req.key = CallKey{task.id, std::string(role), rec.round};
  auto reply = backend_.complete(req);
  rec.exchange.replies.push_back(reply);
  return reply;
}

std::string Agents::ask(std::string_view role, const Task& task, Bindings bindings, CallRecord& rec) const {
  auto [system, user] = render(role, std::move(bindings));
  rec.exchange = ChatExchange{system, user, {}};
  return complete(role, task, system, user, rec);
}

ParamSpec Agents::extract_parameters(const Task& task, std::string_view comment, CallRecord& rec) const {
  const auto valid = validate_task(task);
  return ask_parsed(role::kParamExtractor, valid,
                    {{"problem_description", valid.text}, {"comment_text", std::string(comment)}}, kParamSchema, rec,
                    [](std::string_view r) { return reply::parse_param_spec(r); });
}

Advisory Agents::advise(const Task& task, std::string_view param_comment, CallRecord& rec) const {
  const auto valid = validate_task(task);
  return ask_parsed(role::kModelingAdvisor, valid,
                    {{"problem_description", valid.text}, {"comment_text", std::string(param_comment)}},
                    kAdvisorySchema, rec, [](std::string_view r) { return reply::parse_advisory(r); });
}

MathModel Agents::formulate(const Task& task, const ParamSpec& params, const Advisory& advisory,
                            const RetrievedSet& exemplars, CallRecord& rec) const {
  const auto valid = validate_task(task);
  std::string comments = "### Parameters\n" + dump_json(Json(params), 2) + "\n### Modeling advisor insights\n" +
                         dump_json(Json(advisory), 2) + "\n### Reference modeling exemplars\n" +
                         render_exemplars(exemplars);
  return ask_parsed(role::kModelingExpert, valid,
                    {{"problem_description", valid.text}, {"comments_text", std::move(comments)}}, kModelSchema, rec,
                    [](std::string_view r) { return reply::parse_math_model(r); });
}

SolverProgram Agents::generate_code(const Task& task, const MathModel& model, const RetrievedSet& exemplars,
                                    CallRecord& rec) const {
  const auto valid = validate_task(task);
  std::string comments =
      dump_json(Json(model), 2) + "\n### Reference code exemplars\n" + render_exemplars(exemplars);
  auto source = ask_parsed(role::kCodeExpert, valid,
                           {{"problem_description", valid.text}, {"comments_text", std::move(comments)}},
                           kCodeSchema, rec, [](std::string_view r) { return reply::extract_code_block(r); });
  return SolverProgram{std::move(source), config_.language_tag, config_.solver_tag};
}

RevisionReply Agents::revise_model(const Task& task, const MathModel& prior, std::string_view error,
                                   const std::optional<RevisionTip>& last_tip, CallRecord& rec) const {
  const auto valid = validate_task(task);
  Bindings b{{"problem_description", valid.text},
             {"original_model", dump_json(Json(prior), 2)},
             {"error_message", std::string(error)},
             {"last_tip", render_last_tip(last_tip)}};
  return ask_parsed(role::kModelingRevision, valid, std::move(b), kModelRevisionSchema, rec, [](std::string_view r) {
    auto [tip_text, model_text] = reply::split_revision_reply(r);
    RevisionReply out;
    out.tip = reply::parse_tip(tip_text, TipKind::Modeling);
    out.model = reply::parse_math_model(model_text);
    return out;
  });
}

RevisionReply Agents::revise_code(const Task& task, const SolverProgram& prior, const MathModel& corrected_model,
                                  std::string_view error, const std::optional<RevisionTip>& last_tip,
                                  CallRecord& rec) const {
  const auto valid = validate_task(task);
  Bindings b{{"problem_description", valid.text},
             {"initial_code", prior.source},
             {"error_message", std::string(error)},
             {"last_tip", render_last_tip(last_tip)},
             {"corrected_model", dump_json(Json(corrected_model), 2)}};
  return ask_parsed(role::kCodeRevision, valid, std::move(b), kCodeRevisionSchema, rec,
                    [this](std::string_view r) {
                      auto [tip_text, code_text] = reply::split_revision_reply(r);
                      RevisionReply out;
                      out.tip = reply::parse_tip(tip_text, TipKind::Code);
                      out.program = SolverProgram{reply::parse_code_payload(code_text), config_.language_tag,
                                                  config_.solver_tag};
                      return out;
                    });
}

}  // namespace opmodel
