#pragma once

// The six pipeline agents. Each renders its template, calls the backend, and
// parses the reply strictly; a parse failure earns exactly one repair
// reprompt before the typed error surfaces.

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "opmodel/error.hpp"
#include "opmodel/llm.hpp"
#include "opmodel/prompts.hpp"
#include "opmodel/types.hpp"

namespace opmodel {

struct AgentConfig {
  std::string model_name = kDefaultModelName;
  double temperature = 0.0;
  int max_retries = 2;
  std::string language_tag = "python";
  std::string solver_tag = "gurobipy";
};

/// Per-call input (round) and output (the recorded exchange).
struct CallRecord {
  int round = 0;
  ChatExchange exchange;
};

struct RevisionReply {
  RevisionTip tip;
  std::optional<MathModel> model;       // set by revise_model
  std::optional<SolverProgram> program;  // set by revise_code
};

inline constexpr std::string_view kNoTip = "No tip for reference";
inline constexpr std::string_view kNoExemplar =
    "No reference exemplar is available for this problem (empty retrieval signal); work from the problem "
    "description alone.";

class Agents {
 public:
  Agents(ChatBackend& backend, const TemplateSet& templates, AgentConfig config = {});

  ParamSpec extract_parameters(const Task& task, std::string_view comment, CallRecord& rec) const;
  Advisory advise(const Task& task, std::string_view param_comment, CallRecord& rec) const;
  MathModel formulate(const Task& task, const ParamSpec& params, const Advisory& advisory,
                      const RetrievedSet& exemplars, CallRecord& rec) const;
  SolverProgram generate_code(const Task& task, const MathModel& model, const RetrievedSet& exemplars,
                              CallRecord& rec) const;
  RevisionReply revise_model(const Task& task, const MathModel& prior, std::string_view error,
                             const std::optional<RevisionTip>& last_tip, CallRecord& rec) const;
  RevisionReply revise_code(const Task& task, const SolverProgram& prior, const MathModel& corrected_model,
                            std::string_view error, const std::optional<RevisionTip>& last_tip,
                            CallRecord& rec) const;

  /// Renders `role`'s templates with `bindings` plus the language/solver tags.
  std::pair<std::string, std::string> render(std::string_view role, Bindings bindings) const;

  /// One backend call, no parsing.
  std::string ask(std::string_view role, const Task& task, Bindings bindings, CallRecord& rec) const;

  /// Backend call + parse, with a single repair reprompt on a parse failure.
  template <class Parse>
  auto ask_parsed(std::string_view role, const Task& task, Bindings bindings, std::string_view schema,
                  CallRecord& rec, Parse&& parse) const -> decltype(parse(std::string_view{}));

  const AgentConfig& config() const noexcept { return config_; }
  ChatBackend& backend() const noexcept { return backend_; }

 private:
  std::string complete(std::string_view role, const Task& task, const std::string& system,
                       const std::string& user, CallRecord& rec) const;

  ChatBackend& backend_;
  const TemplateSet& templates_;
  AgentConfig config_;
};

/// Error classes the agents repair once before giving up.
bool is_repairable(Errc code) noexcept;

/// Text appended to the user prompt on the repair reprompt.
std::string repair_instruction(std::string_view error, std::string_view schema);

/// Exemplars in the structure the modeling or code agent expects, or the
/// explicit no-exemplar notice when the set is empty.
std::string render_exemplars(const RetrievedSet& set);

/// `{"iter_<round>": "<message>", "status": "<label>"}` as the revision agents see it.
std::string render_execution_error(const ExecutionOutcome& outcome, int round);

std::string render_last_tip(const std::optional<RevisionTip>& tip);

// ---------------------------------------------------------------------------

template <class Parse>
auto Agents::ask_parsed(std::string_view role, const Task& task, Bindings bindings, std::string_view schema,
                        CallRecord& rec, Parse&& parse) const -> decltype(parse(std::string_view{})) {
  auto [system, user] = render(role, std::move(bindings));
  rec.exchange = ChatExchange{system, user, {}};
  const auto first = complete(role, task, system, user, rec);
  try {
    return parse(std::string_view(first));
  } catch (const Error& e) {
    if (!is_repairable(e.code())) throw;
    const auto repaired = complete(role, task, system, user + repair_instruction(e.what(), schema), rec);
    return parse(std::string_view(repaired));
  }
}

}  // namespace opmodel
