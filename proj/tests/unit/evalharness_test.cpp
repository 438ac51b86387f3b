#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "opmodel/error.hpp"
#include "opmodel/evalharness.hpp"
#include "support.hpp"

using namespace opmodel;
namespace ts = opmodel::testsupport;

namespace {

std::vector<Judgment> verdicts(std::initializer_list<Verdict> vs) {
  std::vector<Judgment> out;
  for (auto v : vs) out.push_back(Judgment{v, std::nullopt, std::nullopt});
  return out;
}

}  // namespace

TEST(Judge, Boundaries) {
  EXPECT_EQ(judge_value(1000.0, 1001.0).verdict, Verdict::WrongAnswer);
  EXPECT_EQ(judge_value(1000.0, 1000.5).verdict, Verdict::Correct);
  EXPECT_EQ(judge_value(-50.0, -50.04).verdict, Verdict::Correct);
  EXPECT_EQ(judge_value(0.0, 0.0999).verdict, Verdict::Correct);
  EXPECT_EQ(judge_value(0.0, 0.1).verdict, Verdict::WrongAnswer);
  EXPECT_EQ(judge_value(0.0, -0.1).verdict, Verdict::WrongAnswer);
  const auto j = judge_value(200.0, 201.0);
  EXPECT_DOUBLE_EQ(*j.rel_error, 0.005);
  EXPECT_DOUBLE_EQ(*j.abs_error, 1.0);
  EXPECT_FALSE(judge_value(0.0, 1.0).rel_error);
}

TEST(Judge, SolutionNeedsAcceptedObjective) {
  ExecutionOutcome o;
  o.status = ExecStatus::RuntimeFailure;
  o.objective = 5.0;
  EXPECT_EQ(judge_solution(5.0, o).verdict, Verdict::ExecutionFailure);
  o.status = ExecStatus::Accept;
  EXPECT_EQ(judge_solution(5.0, o).verdict, Verdict::Correct);
  o.objective.reset();
  EXPECT_EQ(judge_solution(5.0, o).verdict, Verdict::ExecutionFailure);
  o.objective = std::nan("");
  EXPECT_EQ(judge_solution(5.0, o).verdict, Verdict::ExecutionFailure);
}

TEST(Aggregate, Pass1AndDecomposition) {
  const auto js = verdicts({Verdict::Correct, Verdict::Correct, Verdict::WrongAnswer, Verdict::ExecutionFailure});
  EXPECT_DOUBLE_EQ(aggregate_pass1(js), 50.0);
  const auto e = decompose_errors(js);
  EXPECT_DOUBLE_EQ(e.wrong_rate, 25.0);
  EXPECT_DOUBLE_EQ(e.compile_rate, 25.0);
  EXPECT_THROW(aggregate_pass1({}), Error);
  EXPECT_THROW(macro_average({}), Error);
}

TEST(Aggregate, RatesSumToHundred) {
  std::mt19937 rng(3);
  for (int n = 1; n <= 200; ++n) {
    std::vector<Judgment> js(static_cast<std::size_t>(n));
    for (auto& j : js) j.verdict = static_cast<Verdict>(rng() % 3);
    const auto d = summarize("d", js);
    EXPECT_NEAR(d.accuracy + d.wrong_rate + d.compile_rate, 100.0, 1e-9);
    EXPECT_EQ(d.correct + d.wrong + d.failed, d.total);
  }
}

TEST(Aggregate, PublishedMacroAverages) {
  const std::vector<double> full{86.50, 87.30, 67.50, 57.00, 61.11};
  EXPECT_EQ(format_pct(macro_average(full)), "71.88");
  const std::vector<double> neither{84.10, 86.50, 62.05, 52.00, 44.44};
  EXPECT_EQ(format_pct(macro_average(neither)), "65.82");
}

TEST(Rounding, HalfAwayFromZero) {
  EXPECT_EQ(round2(71.875), 71.88);
  EXPECT_EQ(round2(2.675), 2.68);  // binary 2.67499999... still rounds up
  EXPECT_EQ(round2(-1.005), -1.01);
  EXPECT_EQ(format_pct(-0.001), "0.00");
  EXPECT_EQ(format_pct(100.0), "100.00");
  EXPECT_EQ(format_pct(100.0 / 3.0), "33.33");
}

TEST(Adapters, NamedAndCustom) {
  EXPECT_EQ(adapter_by_name("mamo").question_field, "Question");
  EXPECT_EQ(adapter_by_name("orlm").answer_field, "en_answer");
  const auto c = adapter_by_name("custom:prompt,target,uid");
  EXPECT_EQ(c.question_field, "prompt");
  EXPECT_EQ(c.answer_field, "target");
  EXPECT_EQ(c.id_field, "uid");
  EXPECT_THROW(adapter_by_name("custom:onlyone"), Error);
  EXPECT_THROW(adapter_by_name("unknown"), Error);
}

TEST(Datasets, LoadWithAdapters) {
  const auto dir = ts::data_dir() / "datasets";
  const auto g = load_dataset(dir / "generic.jsonl", adapter_by_name("generic"));
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].id, "g1");
  EXPECT_EQ(g[1].id, "generic-3");
  EXPECT_EQ(g[1].ground_truth, 2.5);
  EXPECT_EQ(g[2].id, "7");
  EXPECT_EQ(g[2].dataset_tag, "generic");
  const auto m = load_dataset(dir / "mamo.jsonl", adapter_by_name("mamo"), 0, "EasyLP");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].ground_truth, 540.0);
  EXPECT_EQ(m[1].id, "EasyLP-2");
  EXPECT_EQ(load_dataset(dir / "orlm.jsonl", adapter_by_name("orlm"))[0].id, "n1");
}

TEST(Datasets, HoldoutAndErrors) {
  const auto dir = ts::data_dir() / "datasets";
  EXPECT_EQ(load_dataset(dir / "generic.jsonl", adapter_by_name("generic"), 1).size(), 2u);
  EXPECT_THROW(load_dataset(dir / "generic.jsonl", adapter_by_name("generic"), 4), Error);
  try {
    load_dataset(dir / "bad_answer.jsonl", adapter_by_name("generic"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaError);
    EXPECT_NE(std::string(e.what()).find("bad_answer.jsonl:2"), std::string::npos);
  }
  EXPECT_THROW(load_dataset(dir / "generic.jsonl", adapter_by_name("mamo")), Error);
  EXPECT_THROW(load_dataset(dir / "nope.jsonl", adapter_by_name("generic")), Error);
}

TEST(Variants, Names) {
  EXPECT_EQ(ablation_variants("all").size(), 4u);
  EXPECT_EQ(ablation_variants("none"), (std::vector<Variant>{{"full", true, true}}));
  EXPECT_EQ(ablation_variants("neither").front(), (Variant{"neither", false, false}));
  EXPECT_THROW(ablation_variants("most"), Error);
}

TEST(ParallelFor, CoversEveryIndexAndPropagatesErrors) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 8, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) {
                 if (i == 5) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Benchmark, SuiteResultsPerVariant) {
  ts::SuiteHarness h;
  BenchmarkOptions opts;
  opts.variants = ablation_variants("all");
  std::vector<std::vector<TaskResult>> results;
  const auto report = run_benchmark(ts::suite_datasets(), PipelineConfig{}, h.deps(), opts, &results);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.dataset_names, (std::vector<std::string>{"alpha", "beta"}));
  // full: alpha all correct; beta s5 correct, s6 wrong, s7/s8 repaired, s9 fails.
  EXPECT_EQ(report.rows[0].datasets[0], (DatasetResult{"alpha", 5, 5, 0, 0, 100.0, 0.0, 0.0}));
  EXPECT_EQ(report.rows[0].datasets[1], (DatasetResult{"beta", 5, 3, 1, 1, 60.0, 20.0, 20.0}));
  EXPECT_DOUBLE_EQ(report.rows[0].macro_avg, 80.0);
  // no-iar: s7, s8, s9 fail.
  EXPECT_EQ(report.rows[1].datasets[1], (DatasetResult{"beta", 5, 1, 1, 3, 20.0, 20.0, 60.0}));
  EXPECT_EQ(results[0][9].trace.revision_count, 3);
  EXPECT_EQ(results[0][8].trace.revision_count, 2);
  EXPECT_EQ(report.rows[2].counters.retrieval_calls, 0);
  EXPECT_EQ(report.rows[0].counters.retrieval_calls, 20);
  EXPECT_EQ(report.rows[0].counters.embedding_calls, 20);
}

TEST(Benchmark, ParallelMatchesSerial) {
  ts::SuiteHarness h;
  BenchmarkOptions serial;
  serial.variants = ablation_variants("all");
  BenchmarkOptions par = serial;
  par.parallel = 6;
  std::vector<std::vector<TaskResult>> a, b;
  EXPECT_EQ(run_benchmark(ts::suite_datasets(), PipelineConfig{}, h.deps(), serial, &a),
            run_benchmark(ts::suite_datasets(), PipelineConfig{}, h.deps(), par, &b));
  for (std::size_t v = 0; v < a.size(); ++v) {
    for (std::size_t i = 0; i < a[v].size(); ++i) EXPECT_EQ(serialize_trace(a[v][i].trace), serialize_trace(b[v][i].trace));
  }
}

TEST(Benchmark, WritesTracesAndReports) {
  ts::SuiteHarness h;
  ts::TempDir dir;
  BenchmarkOptions opts;
  opts.variants = ablation_variants("no-iar");
  opts.trace_dir = dir / "traces";
  opts.config_echo = Json{{"command", "bench"}};
  const auto report = run_benchmark(ts::suite_datasets(), PipelineConfig{}, h.deps(), opts);
  const auto doc = Json::parse(ts::read_file(dir / "traces" / "no-iar" / "beta" / "s7.trace.json"));
  EXPECT_EQ(doc["config"]["variant"], "no-iar");
  EXPECT_EQ(doc["config"]["pipeline"]["enable_iar"], false);
  EXPECT_EQ(doc["config"]["command"], "bench");
  write_report(report, dir / "out");
  const auto j = Json::parse(ts::read_file(dir / "out" / "report.json"));
  EXPECT_EQ(j["rows"][0]["datasets"][1]["accuracy"], 20.0);
  const auto csv = ts::read_file(dir / "out" / "report.csv");
  EXPECT_NE(csv.find("no-iar,beta,5,1,1,3,20.00,20.00,60.00"), std::string::npos);
  const auto md = ts::read_file(dir / "out" / "report.md");
  EXPECT_NE(md.find("| no-iar | 100.00 | 20.00 | 60.00 |"), std::string::npos);
}

TEST(Benchmark, SetupErrorsThrow) {
  ts::SuiteHarness h;
  EXPECT_THROW(run_benchmark({}, PipelineConfig{}, h.deps(), BenchmarkOptions{}), Error);
  auto ds = ts::suite_datasets();
  ds[0].tasks[0].ground_truth.reset();
  EXPECT_THROW(run_benchmark(ds, PipelineConfig{}, h.deps(), BenchmarkOptions{}), Error);
}
