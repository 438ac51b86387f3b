#include <gtest/gtest.h>

#include "opmodel/agents.hpp"
#include "opmodel/error.hpp"

using namespace opmodel;

namespace {

const Task kTask{"t", "Maximize profit from two products subject to machine hours.", 10.0, std::nullopt};

struct Fixture {
  ScriptedBackend backend;
  TemplateSet templates = TemplateSet::builtin();
  Agents agents{backend, templates};
};

}  // namespace

TEST(Agents, ParameterExtractionRecordsExchange) {
  Fixture f;
  f.backend.add("param_extractor", 0, R"({"Hours": {"Type": "scalar", "Definition": "machine hours"}})");
  CallRecord rec;
  const auto spec = f.agents.extract_parameters(kTask, "None", rec);
  EXPECT_TRUE(spec.contains("Hours"));
  EXPECT_EQ(rec.exchange.replies.size(), 1u);
  EXPECT_NE(rec.exchange.user_text.find(kTask.text), std::string::npos);
  EXPECT_FALSE(rec.exchange.system_text.empty());
}

TEST(Agents, OneRepairThenSuccess) {
  Fixture f;
  f.backend.add("modeling_advisor", 0, R"([{"category": "Weather", "insight": "x"}])");
  f.backend.add("modeling_advisor", 0, R"([{"category": "Problem Essence", "insight": "an LP"}])");
  CallRecord rec;
  const auto adv = f.agents.advise(kTask, "{}", rec);
  EXPECT_EQ(adv.insights.size(), 1u);
  ASSERT_EQ(rec.exchange.replies.size(), 2u);
  const auto log = f.backend.request_log();
  ASSERT_EQ(log.size(), 2u);
}

TEST(Agents, RepairPromptCarriesErrorAndSchema) {
  class Capture : public ChatBackend {
   public:
    std::vector<std::string> users;
    std::string id() const override { return "capture"; }

   protected:
    std::string do_complete(const ChatRequest& r) override {
      users.push_back(r.user_text);
      return "no code at all";
    }
  } backend;
  const auto templates = TemplateSet::builtin();
  const Agents agents(backend, templates);
  CallRecord rec;
  try {
    agents.generate_code(kTask, MathModel{"x", {"x <= 1"}, "max x"}, RetrievedSet::empty(RetrievalKind::Code), rec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoCodeBlock);
  }
  ASSERT_EQ(backend.users.size(), 2u);  // exactly one repair
  EXPECT_EQ(backend.users[1].rfind(backend.users[0], 0), 0u);
  EXPECT_NE(backend.users[1].find("NoCodeBlock"), std::string::npos);
  EXPECT_NE(backend.users[1].find("fenced code block"), std::string::npos);
}

TEST(Agents, NonRepairableErrorsSurfaceImmediately) {
  Fixture f;
  CallRecord rec;
  try {
    f.agents.extract_parameters(kTask, "None", rec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ScriptExhausted);
  }
  EXPECT_EQ(f.backend.call_count(), 1u);
}

TEST(Agents, BlankTaskRejectedBeforeAnyCall) {
  Fixture f;
  CallRecord rec;
  EXPECT_THROW(f.agents.extract_parameters(Task{"t", " ", {}, {}}, "None", rec), Error);
  EXPECT_EQ(f.backend.call_count(), 0u);
}

TEST(Agents, FormulatePromptCarriesParamsAdvisoryAndExemplars) {
  Fixture f;
  f.backend.add("modeling_expert", 0, R"({"VARIABLES": "x", "CONSTRAINTS": ["x <= 4"], "OBJECTIVE": "max 3x"})");
  ParamSpec params;
  params.entries.push_back({"Hours", ParamEntry{"scalar", "machine hours"}});
  const Advisory adv{{{InsightCategory::ProblemKeyPoint, "hours bind"}}};
  Exemplar ex;
  ex.prompt = "Similar problem";
  ex.response = "## Mathematical Model:\n```{\"VARIABLES\": \"y\", \"CONSTRAINTS\": [\"y<=2\"], \"OBJECTIVE\": \"max y\"}```";
  CallRecord rec;
  const auto m = f.agents.formulate(kTask, params, adv, RetrievedSet{RetrievalKind::Modeling, {ex}, false}, rec);
  EXPECT_EQ(m.objective, "max 3x");
  const auto& u = rec.exchange.user_text;
  EXPECT_NE(u.find("### Parameters"), std::string::npos);
  EXPECT_NE(u.find("machine hours"), std::string::npos);
  EXPECT_NE(u.find("hours bind"), std::string::npos);
  EXPECT_NE(u.find("Exemplar 1:"), std::string::npos);
  EXPECT_NE(u.find("Similar problem"), std::string::npos);
}

TEST(Agents, EmptySignalRendersNotice) {
  EXPECT_EQ(render_exemplars(RetrievedSet::empty(RetrievalKind::Code)), kNoExemplar);
  Exemplar ex;
  ex.prompt = "p";
  ex.response = "## Mathematical Model:\n```{\"VARIABLES\": \"v\", \"CONSTRAINTS\": [\"c\"], \"OBJECTIVE\": \"o\"}```\n\n\n"
                "## Python Code:\n```python\nprint(2)\n```";
  const auto code = render_exemplars(RetrievedSet{RetrievalKind::Code, {ex, ex}, false});
  EXPECT_NE(code.find("Exemplar 2:"), std::string::npos);
  EXPECT_NE(code.find("\"Code\": \"print(2)\""), std::string::npos);
  const auto model = render_exemplars(RetrievedSet{RetrievalKind::Modeling, {ex}, false});
  EXPECT_EQ(model.find("\"Code\""), std::string::npos);
}

TEST(Agents, ExecutionErrorRendering) {
  ExecutionOutcome o;
  o.status = ExecStatus::RuntimeFailure;
  o.error_message = "IndexError: list index out of range";
  EXPECT_EQ(render_execution_error(o, 1), R"({"iter_1":"IndexError: list index out of range","status":"Runtime Error"})");
  o.status = ExecStatus::Timeout;
  EXPECT_NE(render_execution_error(o, 3).find("Time Limit Exceeded"), std::string::npos);
  EXPECT_EQ(render_last_tip(std::nullopt), kNoTip);
  const auto tip = render_last_tip(RevisionTip{TipKind::Code, "s", "e", "good", "bad"});
  EXPECT_NE(tip.find("\"correct_code_snippet\": \"good\""), std::string::npos);
}

TEST(Agents, RevisionRepliesParse) {
  Fixture f;
  f.backend.add("modeling_revision", 1,
                R"({"tip_type": "modeling", "scenario": "s", "error_statement": "e", "correct_component": "c", "incorrect_model": "i"}
<split>
{"VARIABLES": "x", "CONSTRAINTS": ["x <= 2"], "OBJECTIVE": "max x"})");
  f.backend.add("code_revision", 1,
                "{\"tip_type\": \"code\", \"scenario\": \"s\", \"error_statement\": \"e\", \"correct_code_snippet\": "
                "\"a\", \"incorrect_code_snippet\": \"b\"}\n<split>\n```python\nprint(2)\n```");
  const MathModel prior{"x", {"x <= 1"}, "max x"};
  CallRecord rec{1, {}};
  const auto m = f.agents.revise_model(kTask, prior, "{\"iter_1\": \"boom\"}", std::nullopt, rec);
  ASSERT_TRUE(m.model);
  EXPECT_EQ(m.model->constraints.front(), "x <= 2");
  EXPECT_EQ(m.tip.kind, TipKind::Modeling);
  EXPECT_NE(rec.exchange.user_text.find("boom"), std::string::npos);
  EXPECT_NE(rec.exchange.user_text.find(kNoTip), std::string::npos);

  CallRecord rec2{1, {}};
  const auto c = f.agents.revise_code(kTask, SolverProgram{"print(1)", "python", "gurobipy"}, *m.model, "err",
                                      m.tip, rec2);
  ASSERT_TRUE(c.program);
  EXPECT_EQ(c.program->source, "print(2)");
  EXPECT_EQ(c.tip.correct_fragment, "a");
  EXPECT_NE(rec2.exchange.user_text.find("print(1)"), std::string::npos);
  EXPECT_NE(rec2.exchange.user_text.find("x <= 2"), std::string::npos);
}

TEST(Agents, ConfigTagsReachPrompts) {
  ScriptedBackend backend;
  const auto templates = TemplateSet::builtin();
  AgentConfig cfg;
  cfg.solver_tag = "pyomo";
  const Agents agents(backend, templates, cfg);
  const auto [system, user] = agents.render("code_expert", {{"problem_description", "p"}, {"comments_text", "c"}});
  EXPECT_NE((system + user).find("pyomo"), std::string::npos);
}
