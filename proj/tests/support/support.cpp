#include "support.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "opmodel/error.hpp"

#ifndef OPMODEL_TEST_DATA_DIR
#error "OPMODEL_TEST_DATA_DIR must point at tests/data"
#endif

namespace opmodel::testsupport {

namespace fs = std::filesystem;

fs::path data_dir() { return fs::path(OPMODEL_TEST_DATA_DIR); }

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<int> seq{0};
  path_ = fs::temp_directory_path() /
          (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(seq.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

// ---------------------------------------------------------------------------

TransportCase TransportCase::load() {
  const auto dir = data_dir() / "transport_case";
  TransportCase c;
  c.task = validate_task(Json::parse(read_file(dir / "task.json")).get<Task>());
  c.backend = make_replay_backend(dir / "replay.jsonl");
  c.runner = load_stub_runner(dir / "runner_stub.jsonl");
  c.executor = std::make_unique<Executor>(*c.runner);
  c.embedder = std::make_unique<HashEmbedder>(256);
  c.library = std::make_unique<Library>(Library::build(load_library(dir / "library.jsonl"), *c.embedder));
  return c;
}

Pipeline TransportCase::pipeline() {
  return Pipeline(PipelineDeps{*backend, templates, *executor, library.get(), embedder.get(), nullptr}, config);
}

TaskTrace run_transport_case() {
  auto c = TransportCase::load();
  return c.pipeline().solve(c.task);
}

fs::path transport_golden_path() { return data_dir() / "transport_case" / "expected.trace.json"; }

// ---------------------------------------------------------------------------

namespace {

std::string suite_id(std::size_t i) { return "s" + std::to_string(i); }

double suite_truth(std::size_t i) { return i == 0 ? 0.0 : 100.0 + 10.0 * static_cast<double>(i); }

// Rounds in which each task's program fails, and how.
std::string suite_failure(std::size_t task, int round) {
  if (task == 7 && round == 0) return "runtime_error";
  if (task == 8 && round == 0) return "syntax_error";
  if (task == 8 && round == 1) return "runtime_error";
  if (task == 9) return "runtime_error";
  return {};
}

int suite_last_round(std::size_t task) {
  if (task == 7) return 1;
  if (task == 8) return 2;
  if (task == 9) return 3;
  return 0;
}

std::string fenced(const std::string& lang, const std::string& body) { return "```" + lang + "\n" + body + "\n```"; }

std::string model_json(std::size_t task, int round) {
  Json m = Json::object();
  m["VARIABLES"] = "x >= 0, the production level of task " + suite_id(task);
  m["CONSTRAINTS"] = Json::array({"x <= " + std::to_string(100 + task), "x >= " + std::to_string(round)});
  m["OBJECTIVE"] = "minimize cost(x)";
  return m.dump(2);
}

std::string tip_json(const char* kind, std::size_t task, int round) {
  Json t = Json::object();
  t["tip_type"] = kind;
  t["scenario"] = "production planning";
  t["error_statement"] = "round " + std::to_string(round) + " of " + suite_id(task) + " failed";
  if (std::string(kind) == "modeling") {
    t["correct_component"] = "x >= " + std::to_string(round);
    t["incorrect_model"] = "x >= " + std::to_string(round - 1);
  } else {
    t["correct_code_snippet"] = "print(m.objVal)";
    t["incorrect_code_snippet"] = "print(m.objval)";
  }
  return t.dump(2);
}

}  // namespace

std::string suite_program(std::size_t task, int round) {
  return "import gurobipy as gp\n# " + suite_id(task) + " round " + std::to_string(round) +
         "\nm = gp.Model()\nm.optimize()\nprint(m.objVal)";
}

std::vector<Dataset> suite_datasets() {
  std::vector<Dataset> out{{"alpha", {}}, {"beta", {}}};
  for (std::size_t i = 0; i < kSuiteSize; ++i) {
    Task t;
    t.id = suite_id(i);
    t.text = "A plant makes product " + std::to_string(i) + " with a linear cost per unit and a capacity of " +
             std::to_string(100 + i) + " units. Choose the production level minimizing total cost.";
    t.ground_truth = suite_truth(i);
    t.dataset_tag = i < 5 ? "alpha" : "beta";
    out[i < 5 ? 0 : 1].tasks.push_back(std::move(t));
  }
  return out;
}

std::vector<ScriptEntry> suite_script() {
  std::vector<ScriptEntry> s;
  const auto add = [&](std::size_t task, std::string_view role, int round, std::string reply) {
    s.push_back(ScriptEntry{suite_id(task), std::string(role), round, std::move(reply), false});
  };
  for (std::size_t i = 0; i < kSuiteSize; ++i) {
    add(i, role::kParamExtractor, 0,
        fenced("json", R"({"Capacity": {"Type": "scalar", "Definition": "units the plant can make"}})"));
    add(i, role::kModelingAdvisor, 0,
        R"([{"category": "Problem Essence", "insight": "A single-variable linear program."}])");
    add(i, role::kRerankModeling, 0, "[0]");
    add(i, role::kRerankCode, 0, "[1, 0]");
    add(i, role::kModelingExpert, 0, fenced("json", model_json(i, 0)));
    add(i, role::kCodeExpert, 0, fenced("python", suite_program(i, 0)));
    for (int r = 1; r <= suite_last_round(i); ++r) {
      add(i, role::kModelingRevision, r, tip_json("modeling", i, r) + "\n<split>\n" + model_json(i, r));
      add(i, role::kCodeRevision, r, tip_json("code", i, r) + "\n<split>\n" + fenced("python", suite_program(i, r)));
    }
  }
  return s;
}

std::unique_ptr<StubRunner> suite_runner() {
  auto r = std::make_unique<StubRunner>();
  for (std::size_t i = 0; i < kSuiteSize; ++i) {
    for (int round = 0; round <= suite_last_round(i); ++round) {
      RunnerResult res;
      res.wall_ms = 100 + static_cast<std::int64_t>(i);
      const auto failure = suite_failure(i, round);
      if (failure.empty()) {
        double y = suite_truth(i);
        if (i == 0) y = 0.05;         // |y| < 0.1 against y* = 0
        if (i == 6) y = y * 1.5;      // wrong answer
        std::ostringstream o;
        o.precision(17);
        o << y << "\n";
        res.status_word = "ok";
        res.stdout_text = o.str();
      } else {
        res.status_word = failure;
        res.exit_code = 1;
        res.stderr_text = failure == "syntax_error" ? "  File \"candidate\", line 3\nSyntaxError: invalid syntax\n"
                                                    : "Traceback (most recent call last):\nKeyError: 'cost'\n";
      }
      r->add_for_source(suite_program(i, round), res);
    }
  }
  return r;
}

SuiteHarness::SuiteHarness() {
  executor = std::make_unique<Executor>(*runner);
  embedder = std::make_unique<HashEmbedder>(256);
  library = std::make_unique<Library>(
      Library::build(load_library(data_dir() / "transport_case" / "library.jsonl"), *embedder));
}

BenchmarkDeps SuiteHarness::deps() {
  return BenchmarkDeps{[] { return std::make_unique<ScriptedBackend>(suite_script()); },
                       templates,
                       *executor,
                       library.get(),
                       embedder.get(),
                       nullptr};
}

}  // namespace opmodel::testsupport
