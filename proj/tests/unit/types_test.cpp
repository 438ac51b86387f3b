#include <gtest/gtest.h>

#include "opmodel/error.hpp"
#include "opmodel/types.hpp"
#include "support.hpp"

using namespace opmodel;

TEST(Task, ValidateRejectsBlankText) {
  EXPECT_THROW(validate_task(Task{"a", "  \n\t", std::nullopt, std::nullopt}), Error);
  try {
    validate_task(Task{"a", "", std::nullopt, std::nullopt});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidTask);
  }
  EXPECT_NO_THROW(validate_task(Task{"a", "maximize x", 1.0, std::nullopt}));
}

TEST(Task, JsonRoundTrip) {
  const Task t{"t1", "min x", 4.5, "nl4opt"};
  const Json j = t;
  EXPECT_EQ(j.at("ground_truth").get<double>(), 4.5);
  EXPECT_EQ(j.get<Task>(), t);
}

TEST(ExecStatus, NamesRoundTrip) {
  for (auto s : {ExecStatus::Accept, ExecStatus::WrongAnswer, ExecStatus::SyntaxFailure, ExecStatus::RuntimeFailure,
                 ExecStatus::Timeout, ExecStatus::SolverNotOptimal, ExecStatus::RunnerError}) {
    EXPECT_EQ(parse_exec_status(to_string(s)), s);
  }
  EXPECT_FALSE(parse_exec_status("Bogus"));
  EXPECT_FALSE(is_failure(ExecStatus::Accept));
  EXPECT_FALSE(is_failure(ExecStatus::WrongAnswer));
  EXPECT_TRUE(is_failure(ExecStatus::Timeout));
  EXPECT_TRUE(is_failure(ExecStatus::RunnerError));
}

TEST(InsightCategory, ParsesDisplayNames) {
  EXPECT_EQ(parse_insight_category("Domain Terminology"), InsightCategory::DomainTerminology);
  EXPECT_EQ(parse_insight_category("Problem Key Point"), InsightCategory::ProblemKeyPoint);
  EXPECT_EQ(parse_insight_category("Problem Essence"), InsightCategory::ProblemEssence);
  EXPECT_FALSE(parse_insight_category("Vibes"));
}

TEST(Types, ValueJsonRoundTrips) {
  MathModel m{"x >= 0", {"x <= 3", "x + y <= 4"}, "max x"};
  EXPECT_EQ(Json(m).get<MathModel>(), m);

  ExecutionOutcome o;
  o.status = ExecStatus::RuntimeFailure;
  o.error_message = "KeyError";
  o.stderr_text = "Traceback\nKeyError";
  o.wall_ms = 12;
  EXPECT_EQ(Json(o).get<ExecutionOutcome>(), o);

  RevisionTip tip{TipKind::Code, "scheduling", "bad index", "a[i]", "a[i+1]"};
  EXPECT_EQ(Json(tip).get<RevisionTip>(), tip);

  Exemplar ex;
  ex.prompt = "p";
  ex.response = "r";
  ex.answer = 2.5;
  EXPECT_EQ(Json(ex).get<Exemplar>(), ex);
}

TEST(Types, FullTraceRoundTrips) {
  const auto trace = testsupport::run_transport_case();
  const Json j = trace;
  const auto back = j.get<TaskTrace>();
  EXPECT_EQ(back, trace);
  EXPECT_EQ(serialize_trace(back), serialize_trace(trace));
}

TEST(Types, DumpReplacesInvalidUtf8) {
  Json j = std::string("ok \xff\xfe end");
  std::string out;
  ASSERT_NO_THROW(out = dump_json(j));
  EXPECT_NE(out.find("ok"), std::string::npos);
}
