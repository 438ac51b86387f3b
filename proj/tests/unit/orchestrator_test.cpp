#include <gtest/gtest.h>

#include <cstdlib>

#include "opmodel/error.hpp"
#include "opmodel/orchestrator.hpp"
#include "support.hpp"

using namespace opmodel;
namespace ts = opmodel::testsupport;

namespace {

std::vector<std::pair<std::string, int>> step_keys(const TaskTrace& t) {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& s : t.steps) out.emplace_back(s.role, s.round);
  return out;
}

const TraceStep& step(const TaskTrace& t, std::string_view role, int round) {
  for (const auto& s : t.steps) {
    if (s.role == role && s.round == round) return s;
  }
  throw std::runtime_error("no step " + std::string(role));
}

}  // namespace

TEST(Pipeline, TransportCaseRecoversInTwoRevisions) {
  const auto t = ts::run_transport_case();
  ASSERT_FALSE(t.pipeline_error) << *t.pipeline_error;
  const std::vector<std::pair<std::string, int>> want{
      {"param_extractor", 0},   {"modeling_advisor", 0}, {"modeling_expert", 0}, {"code_expert", 0},
      {"executor", 0},          {"modeling_revision", 1}, {"code_revision", 1},  {"executor", 1},
      {"modeling_revision", 2}, {"code_revision", 2},     {"executor", 2}};
  EXPECT_EQ(step_keys(t), want);
  EXPECT_EQ(t.revision_count, 2);
  EXPECT_EQ(t.final_status, ExecStatus::Accept);
  EXPECT_EQ(t.final_objective, 10.0);
  ASSERT_EQ(t.rounds.size(), 3u);
  EXPECT_EQ(t.rounds[0].outcome.error_message, "IndexError: list index out of range");
  EXPECT_EQ(t.rounds[1].outcome.error_message, "TypeError: can't multiply sequence by non-int of type 'Var'");
  EXPECT_FALSE(t.rounds[0].model_tip);
  ASSERT_TRUE(t.rounds[1].code_tip);
  EXPECT_EQ(t.rounds[1].code_tip->correct_fragment,
            "ShipmentCost[link_to_idx[(Cities[i], Cities[j])]][p] * flow[i, j, p]");
  // 4 generation replies, 2 rerank replies, 4 revision replies.
  EXPECT_EQ(t.counters, (CallCounters{10, 2, 2}));
  EXPECT_FALSE(t.aborted_round);
  EXPECT_TRUE(t.config.is_null());
}

TEST(Pipeline, RevisionPromptsCarryErrorAndLastTip) {
  const auto t = ts::run_transport_case();
  const auto& r1 = step(t, "modeling_revision", 1).exchange->user_text;
  EXPECT_NE(r1.find(R"({"iter_1":"IndexError: list index out of range","status":"Runtime Error"})"), std::string::npos);
  EXPECT_NE(r1.find("No tip for reference"), std::string::npos);
  const auto& r2 = step(t, "modeling_revision", 2).exchange->user_text;
  EXPECT_NE(r2.find("\"iter_2\":\"TypeError"), std::string::npos);
  EXPECT_NE(r2.find("\"correct_component\""), std::string::npos);
  const auto& c2 = step(t, "code_revision", 2).exchange->user_text;
  EXPECT_NE(c2.find("ShipmentCost[link_to_idx[(Cities[i], Cities[j])]][p] * flow[i, j, p]"), std::string::npos);
  // The code reviser sees the model corrected in the same round.
  EXPECT_NE(c2.find("link_index corresponds to the position"), std::string::npos);
}

TEST(Pipeline, RetrievalQueriesAndHint) {
  const auto t = ts::run_transport_case();
  ASSERT_EQ(t.retrievals.size(), 2u);
  EXPECT_EQ(t.retrievals[0].kind, RetrievalKind::Modeling);
  EXPECT_EQ(t.retrievals[0].query, t.task.text);
  EXPECT_EQ(t.retrievals[0].type_hint, "LP");
  EXPECT_EQ(t.retrievals[1].query.rfind(t.task.text + "\n\n{", 0), 0u);
  for (const auto& r : t.retrievals) {
    EXPECT_FALSE(r.selected.empty_signal);
    EXPECT_LE(r.selected.items.size(), 2u);
    EXPECT_TRUE(r.rerank);
  }
  const auto& expert = step(t, "modeling_expert", 0).exchange->user_text;
  EXPECT_NE(expert.find("Exemplar 1:"), std::string::npos);
}

TEST(Pipeline, TraceIsDeterministicAndMatchesGolden) {
  const auto a = serialize_trace(ts::run_transport_case());
  const auto b = serialize_trace(ts::run_transport_case());
  EXPECT_EQ(a, b);
  if (std::getenv("OPMODEL_UPDATE_GOLDEN") != nullptr) ts::write_file(ts::transport_golden_path(), a);
  EXPECT_EQ(a, ts::read_file(ts::transport_golden_path()));
}

TEST(Pipeline, IarOffStopsAfterFirstExecution) {
  auto c = ts::TransportCase::load();
  c.config.enable_iar = false;
  const auto t = c.pipeline().solve(c.task);
  EXPECT_EQ(t.revision_count, 0);
  EXPECT_EQ(t.rounds.size(), 1u);
  EXPECT_EQ(t.final_status, ExecStatus::RuntimeFailure);
  EXPECT_FALSE(t.final_objective);
}

TEST(Pipeline, MaxRevisionsBoundsTheLoop) {
  auto c = ts::TransportCase::load();
  c.config.max_revisions = 1;
  const auto t = c.pipeline().solve(c.task);
  EXPECT_EQ(t.revision_count, 1);
  EXPECT_EQ(t.final_status, ExecStatus::RuntimeFailure);
  EXPECT_FALSE(t.pipeline_error);
}

TEST(Pipeline, HragOffMakesNoRetrievalCalls) {
  auto c = ts::TransportCase::load();
  c.config.enable_hrag = false;
  const auto before = c.embedder->call_count();
  const auto t = Pipeline(PipelineDeps{*c.backend, c.templates, *c.executor, nullptr, nullptr, nullptr}, c.config)
                     .solve(c.task);
  EXPECT_EQ(c.embedder->call_count(), before);
  EXPECT_TRUE(t.retrievals.empty());
  EXPECT_EQ(t.counters, (CallCounters{8, 0, 0}));
  EXPECT_NE(step(t, "modeling_expert", 0).exchange->user_text.find(kNoExemplar), std::string::npos);
  EXPECT_EQ(t.final_status, ExecStatus::Accept);
}

TEST(Pipeline, HragWithoutLibraryIsRejected) {
  auto c = ts::TransportCase::load();
  try {
    Pipeline(PipelineDeps{*c.backend, c.templates, *c.executor, nullptr, nullptr, nullptr}, c.config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidArgument);
  }
  c.config.max_revisions = -1;
  EXPECT_THROW(c.pipeline(), Error);
}

TEST(Pipeline, ExemplarCapOfOne) {
  auto c = ts::TransportCase::load();
  c.config.exemplar_cap = 1;
  const auto t = c.pipeline().solve(c.task);
  for (const auto& r : t.retrievals) EXPECT_LE(r.selected.items.size(), 1u);
}

TEST(Pipeline, GenerationFailureEndsInTrace) {
  auto c = ts::TransportCase::load();
  c.backend = std::make_unique<ScriptedBackend>();
  c.backend->add("param_extractor", 0, R"({"P": {"Type": "int", "Definition": "p"}})");
  c.config.enable_hrag = false;
  const auto t = Pipeline(PipelineDeps{*c.backend, c.templates, *c.executor, nullptr, nullptr, nullptr}, c.config)
                     .solve(c.task);
  ASSERT_TRUE(t.pipeline_error);
  EXPECT_NE(t.pipeline_error->find("ScriptExhausted"), std::string::npos);
  EXPECT_EQ(t.final_status, ExecStatus::RunnerError);
  EXPECT_TRUE(t.rounds.empty());
  ASSERT_EQ(t.steps.size(), 2u);
  EXPECT_EQ(t.steps[1].role, "modeling_advisor");
  EXPECT_TRUE(t.steps[1].output.contains("error"));
  EXPECT_EQ(c.executor->runs(), 0);
}

TEST(Pipeline, BlankTaskNeverCallsTheBackend) {
  auto c = ts::TransportCase::load();
  const auto t = c.pipeline().solve(Task{"blank", "   ", std::nullopt, std::nullopt});
  ASSERT_TRUE(t.pipeline_error);
  EXPECT_NE(t.pipeline_error->find("InvalidTask"), std::string::npos);
  EXPECT_EQ(c.backend->call_count(), 0u);
}

TEST(Pipeline, RepairableRevisionFailureAbortsRound) {
  auto c = ts::TransportCase::load();
  auto script = load_script(ts::data_dir() / "transport_case" / "replay.jsonl");
  c.backend = std::make_unique<ScriptedBackend>();
  for (auto& e : script) {
    if (e.role == "code_revision" && e.round == 2) continue;
    c.backend->add(e);
  }
  c.backend->add("code_revision", 2, "still no split marker");
  c.backend->add("code_revision", 2, "and again no split marker");
  const auto t = c.pipeline().solve(c.task);
  ASSERT_TRUE(t.aborted_round);
  EXPECT_EQ(t.aborted_round->round, 2);
  EXPECT_NE(t.aborted_round->error.find("SplitFormatError"), std::string::npos);
  EXPECT_FALSE(t.pipeline_error);
  EXPECT_EQ(t.revision_count, 1);
  EXPECT_EQ(t.final_status, ExecStatus::RuntimeFailure);  // last execution's status
  EXPECT_EQ(t.steps.back().role, "code_revision");
  EXPECT_EQ(t.steps.back().exchange->replies.size(), 2u);
}

TEST(Pipeline, BackendOutageInRevisionIsPipelineError) {
  auto c = ts::TransportCase::load();
  auto script = load_script(ts::data_dir() / "transport_case" / "replay.jsonl");
  c.backend = std::make_unique<ScriptedBackend>();
  for (auto& e : script) {
    if (e.round < 2) c.backend->add(e);
  }
  const auto t = c.pipeline().solve(c.task);
  ASSERT_TRUE(t.aborted_round);
  ASSERT_TRUE(t.pipeline_error);
  EXPECT_EQ(t.final_status, ExecStatus::RuntimeFailure);
}

TEST(Pipeline, GlobalMemoryGetsEveryStep) {
  auto c = ts::TransportCase::load();
  GlobalMemory g;
  const auto t = Pipeline(PipelineDeps{*c.backend, c.templates, *c.executor, c.library.get(), c.embedder.get(), &g},
                          c.config)
                     .solve(c.task);
  const auto recs = g.read();
  ASSERT_EQ(recs.size(), t.steps.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].role, t.steps[i].role);
    EXPECT_EQ(recs[i].round, t.steps[i].round);
    EXPECT_EQ(recs[i].task_id, "transport_case");
  }
}

TEST(Pipeline, TraceDocumentFillsConfig) {
  const auto t = ts::run_transport_case();
  Json cfg = PipelineConfig{};
  const auto doc = Json::parse(trace_document(t, cfg));
  EXPECT_EQ(doc["config"]["max_revisions"], 3);
  EXPECT_EQ(doc["config"]["mmr"]["fetch_k"], 10);
}

TEST(PipelineConfig, DefaultsAndValidation) {
  PipelineConfig c;
  EXPECT_EQ(c.max_revisions, 3);
  EXPECT_EQ(c.timeout_ms, 60000);
  EXPECT_EQ(c.exemplar_cap, 2u);
  EXPECT_NO_THROW(c.validate());
  c.timeout_ms = 0;
  EXPECT_THROW(c.validate(), Error);
}
