#pragma once

// The per-task state machine: parameters, advisory, (retrieval,) model,
// (retrieval,) code, execution, then revision rounds while execution fails.

#include <cstdint>
#include <optional>

#include "opmodel/agents.hpp"
#include "opmodel/embedding.hpp"
#include "opmodel/executor.hpp"
#include "opmodel/hrag.hpp"
#include "opmodel/memory.hpp"
#include "opmodel/types.hpp"

namespace opmodel {

struct PipelineConfig {
  int max_revisions = 3;
  bool enable_iar = true;
  bool enable_hrag = true;
  std::int64_t timeout_ms = 60'000;
  MmrParams mmr;
  std::size_t exemplar_cap = RetrievedSet::kMaxItems;
  AgentConfig agent;

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
};

void to_json(Json& j, const PipelineConfig& v);

struct PipelineDeps {
  ChatBackend& backend;
  const TemplateSet& templates;
  Executor& executor;
  const Library* library = nullptr;  // required when HRAG is enabled
  Embedder* embedder = nullptr;      // required when HRAG is enabled
  GlobalMemory* global = nullptr;    // optional
};

class Pipeline {
 public:
  Pipeline(PipelineDeps deps, PipelineConfig config);

  /// Generation phase through the first execution; records round 0.
  TaskTrace run_generation(const Task& task, LocalMemory& mem) const;

  /// Revision rounds while the last execution failed. No-op when IAR is off
  /// or round 0 succeeded.
  void run_iar(TaskTrace& trace, LocalMemory& mem) const;

  /// Both phases. Errors never escape: they end up in the trace. The trace's
  /// config field is left null so traces compare across configurations.
  TaskTrace solve(const Task& task) const;

  const PipelineConfig& config() const noexcept { return config_; }
  const Agents& agents() const noexcept { return agents_; }

 private:
  RetrievedSet retrieve(const Task& task, std::string query, RetrievalKind kind,
                        const std::optional<std::string>& type_hint, TaskTrace& trace) const;
  ExecutionOutcome execute(const Task& task, const SolverProgram& program, int round, TaskTrace& trace) const;
  void record_step(TaskTrace& trace, std::string_view role, int round, const CallRecord* rec, Json output) const;

  PipelineDeps deps_;
  PipelineConfig config_;
  Agents agents_;
};

/// Trace document as written to disk: the trace with `config` filled in.
std::string trace_document(TaskTrace trace, const Json& config);

}  // namespace opmodel
