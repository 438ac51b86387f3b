#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opmodel/curation.hpp"
#include "opmodel/embedding.hpp"
#include "opmodel/error.hpp"
#include "opmodel/evalharness.hpp"
#include "opmodel/executor.hpp"
#include "opmodel/hrag.hpp"
#include "opmodel/llm.hpp"
#include "opmodel/memory.hpp"
#include "opmodel/orchestrator.hpp"
#include "opmodel/prompts.hpp"
#include "opmodel/text.hpp"

namespace opmodel::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string backend = "http";
  std::string endpoint;
  std::string api_key_env = kDefaultApiKeyEnv;
  std::string model = kDefaultModelName;
  double temperature = 0.0;
  int max_retries = 2;
  double llm_timeout_secs = 120.0;
  int max_revisions = 3;
  double timeout_secs = 60.0;
  std::size_t exemplar_cap = 2;
  std::string templates_dir;
  std::string global_journal;
  std::string runner = "external:opmodel-runner";
  std::size_t exec_parallel = 4;
  std::string library;
  std::string embedder = "hash";
  std::string embedding_model = "text-embedding-v4";
  std::size_t embedding_dim = 1024;
  std::string vector_cache;
  std::string record;
  bool no_iar = false;
  bool no_hrag = false;
  std::size_t k = 3;
  std::size_t fetch_k = 10;
  double lambda = 0.5;
  std::string language = "python";
  std::string solver = "gurobipy";
};

Json options_json(const Options& o) {
  Json j = Json::object();
  j["backend"] = o.backend;
  j["endpoint"] = o.endpoint;
  j["api_key_env"] = o.api_key_env;
  j["model"] = o.model;
  j["temperature"] = o.temperature;
  j["max_retries"] = o.max_retries;
  j["llm_timeout_secs"] = o.llm_timeout_secs;
  j["max_revisions"] = o.max_revisions;
  j["timeout_secs"] = o.timeout_secs;
  j["exemplar_cap"] = o.exemplar_cap;
  j["templates_dir"] = o.templates_dir;
  j["global_journal"] = o.global_journal;
  j["runner"] = o.runner;
  j["exec_parallel"] = o.exec_parallel;
  j["library"] = o.library;
  j["embedder"] = o.embedder;
  j["embedding_model"] = o.embedding_model;
  j["embedding_dim"] = o.embedding_dim;
  j["vector_cache"] = o.vector_cache;
  j["record"] = o.record;
  j["no_iar"] = o.no_iar;
  j["no_hrag"] = o.no_hrag;
  j["k"] = o.k;
  j["fetch_k"] = o.fetch_k;
  j["lambda"] = o.lambda;
  j["language"] = o.language;
  j["solver"] = o.solver;
  return j;
}

/// Prefix before the first ':' and the rest.
std::pair<std::string, std::string> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, {}};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

std::vector<std::string> split_words(std::string_view s) {
  std::istringstream in{std::string(s)};
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

std::string read_all(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  out << body;
}

std::string safe_name(std::string_view s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.' ? c : '_');
  }
  return out.empty() || out == "." || out == ".." ? "_" + out : out;
}

/// A task file is a JSON object {id, text, ground_truth} or plain problem text.
Task read_task(const std::string& path) {
  const auto body = read_all(path);
  Task t;
  try {
    const auto j = Json::parse(body);
    if (j.is_object()) {
      t = j.get<Task>();
      if (t.id.empty()) t.id = path == "-" ? "task" : fs::path(path).stem().string();
      return validate_task(t);
    }
  } catch (const Json::parse_error&) {
  } catch (const Json::exception& e) {
    throw Error(Errc::SchemaError, "task file '" + path + "': " + e.what());
  }
  t.id = path == "-" ? "task" : fs::path(path).stem().string();
  t.text = body;
  return validate_task(t);
}

/// Owns an inner backend and records every reply it returns.
class RecordedBackend : public ChatBackend {
 public:
  RecordedBackend(std::unique_ptr<ChatBackend> inner, fs::path out)
      : inner_(std::move(inner)), recorder_(*inner_, std::move(out)) {}
  std::string id() const override { return recorder_.id(); }

 protected:
  std::string do_complete(const ChatRequest& request) override { return recorder_.complete(request); }

 private:
  std::unique_ptr<ChatBackend> inner_;
  RecordingBackend recorder_;
};

/// Everything a command needs, built from the options.
struct Env {
  Options opts;
  TemplateSet templates;
  std::unique_ptr<Runner> runner;
  std::unique_ptr<Executor> executor;
  std::unique_ptr<Embedder> embedder;
  std::optional<Library> library;
  std::unique_ptr<GlobalMemory> global;
  PipelineConfig config;

  std::unique_ptr<ChatBackend> make_backend() const {
    const auto [kind, arg] = split_spec(opts.backend);
    std::unique_ptr<ChatBackend> b;
    if (kind == "scripted" || kind == "replay") {
      if (arg.empty()) throw Error(Errc::InvalidArgument, "--backend " + kind + ":<path> needs a path");
      b = std::make_unique<ScriptedBackend>(load_script(arg));
    } else if (kind == "http") {
      HttpBackendConfig c;
      c.endpoint = !arg.empty() ? arg : opts.endpoint;
      if (c.endpoint.empty()) throw Error(Errc::InvalidArgument, "the http backend needs --endpoint");
      c.api_key_env = opts.api_key_env;
      c.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(opts.llm_timeout_secs * 1000));
      b = std::make_unique<HttpBackend>(c);
    } else {
      throw Error(Errc::InvalidArgument, "unknown backend '" + opts.backend + "'");
    }
    if (!opts.record.empty()) return std::make_unique<RecordedBackend>(std::move(b), opts.record);
    return b;
  }

  Json echo(std::string_view command) const {
    Json j = Json::object();
    j["command"] = command;
    j["options"] = options_json(opts);
    j["pipeline"] = config;
    return j;
  }
};

std::unique_ptr<Embedder> make_embedder(const Options& o) {
  const auto [kind, arg] = split_spec(o.embedder);
  if (kind == "hash") {
    return std::make_unique<HashEmbedder>(arg.empty() ? 256 : std::stoul(arg));
  }
  if (kind == "http") {
    HttpEmbedderConfig c;
    c.endpoint = arg;
    if (c.endpoint.empty()) throw Error(Errc::InvalidArgument, "--embedder http:<endpoint> needs an endpoint");
    c.model = o.embedding_model;
    c.api_key_env = o.api_key_env;
    c.dimension = o.embedding_dim;
    return std::make_unique<HttpEmbedder>(c);
  }
  throw Error(Errc::InvalidArgument, "unknown embedder '" + o.embedder + "'");
}

std::unique_ptr<Runner> make_runner(const Options& o) {
  const auto [kind, arg] = split_spec(o.runner);
  if (kind == "stub") {
    if (arg.empty()) throw Error(Errc::InvalidArgument, "--runner stub:<path> needs a path");
    return load_stub_runner(arg);
  }
  if (kind == "external") {
    auto words = split_words(arg);
    if (words.empty()) throw Error(Errc::InvalidArgument, "--runner external:<command> needs a command");
    return std::make_unique<ExternalRunner>(std::move(words));
  }
  throw Error(Errc::InvalidArgument, "unknown runner '" + o.runner + "'");
}

/// Builds the shared environment; the library is indexed only when
/// `want_retrieval` is set.
std::unique_ptr<Env> make_env(const Options& o, bool want_retrieval, bool needs_runner) {
  auto env = std::make_unique<Env>();
  env->opts = o;
  env->templates = o.templates_dir.empty() ? TemplateSet::builtin() : TemplateSet::with_overrides(o.templates_dir);

  auto& c = env->config;
  c.max_revisions = o.max_revisions;
  c.enable_iar = !o.no_iar;
  c.enable_hrag = !o.no_hrag;
  c.timeout_ms = static_cast<std::int64_t>(o.timeout_secs * 1000.0);
  c.mmr = MmrParams{o.lambda, o.k, o.fetch_k};
  c.exemplar_cap = std::min(o.exemplar_cap, RetrievedSet::kMaxItems);
  c.agent.model_name = o.model;
  c.agent.temperature = o.temperature;
  c.agent.max_retries = o.max_retries;
  c.agent.language_tag = o.language;
  c.agent.solver_tag = o.solver;
  c.validate();

  if (needs_runner) {
    env->runner = make_runner(o);
    ExecutorConfig ec;
    ec.max_parallel = static_cast<std::ptrdiff_t>(o.exec_parallel);
    env->executor = std::make_unique<Executor>(*env->runner, ec);
  }
  if (want_retrieval) {
    if (o.library.empty()) {
      throw Error(Errc::InvalidArgument, "retrieval is enabled: pass --library <path> or --no-hrag");
    }
    env->embedder = make_embedder(o);
    std::optional<fs::path> cache;
    if (!o.vector_cache.empty()) cache = o.vector_cache;
    env->library = Library::build(load_library(o.library), *env->embedder, cache);
  }
  if (!o.global_journal.empty()) env->global = std::make_unique<GlobalMemory>(o.global_journal);
  return env;
}

PipelineDeps deps_for(Env& env, ChatBackend& backend) {
  return PipelineDeps{backend,
                      env.templates,
                      *env.executor,
                      env.library ? &*env.library : nullptr,
                      env.embedder.get(),
                      env.global.get()};
}

std::string status_label(const TaskTrace& trace) {
  if (trace.final_status == ExecStatus::WrongAnswer) return "WRONG_ANSWER";
  if (is_failure(trace.final_status)) return "COMPILE_ERROR";
  if (trace.task.ground_truth && trace.final_objective) {
    const auto j = judge_value(*trace.task.ground_truth, *trace.final_objective);
    if (j.verdict == Verdict::WrongAnswer) return "WRONG_ANSWER";
  }
  return "ACCEPT";
}

std::string format_number(double v) {
  std::ostringstream s;
  s.precision(15);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Commands

struct SolveArgs {
  std::string task;
  std::string out = ".";
};

int cmd_solve(const Options& o, const SolveArgs& a, std::ostream& out, std::ostream& err) {
  const auto task = read_task(a.task);
  auto env = make_env(o, !o.no_hrag, true);
  auto backend = env->make_backend();
  const Pipeline pipeline(deps_for(*env, *backend), env->config);
  const auto trace = pipeline.solve(task);
  const auto path = fs::path(a.out) / (safe_name(task.id) + ".trace.json");
  write_file(path, trace_document(trace, env->echo("solve")));

  const int n = trace.revision_count;
  out << status_label(trace) << " after " << n << (n == 1 ? " revision" : " revisions");
  if (trace.final_objective) out << ", objective " << format_number(*trace.final_objective);
  out << " (status " << to_string(trace.final_status) << ")\n";
  out << "trace: " << path.string() << "\n";
  if (trace.pipeline_error) err << "pipeline error: " << *trace.pipeline_error << "\n";
  return 0;
}

struct BenchArgs {
  std::vector<std::string> datasets;
  std::string adapter = "generic";
  std::string ablate = "none";
  std::size_t parallel = 1;
  std::size_t holdout = 0;
  std::string out;
};

int cmd_bench(const Options& o, const BenchArgs& a, std::ostream& out, std::ostream&) {
  const auto adapter = adapter_by_name(a.adapter);
  const auto variants = ablation_variants(a.ablate);
  bool any_retrieval = false;
  for (const auto& v : variants) any_retrieval = any_retrieval || (v.enable_hrag && !o.no_hrag);
  std::vector<Dataset> datasets;
  for (const auto& p : a.datasets) {
    datasets.push_back(Dataset{fs::path(p).stem().string(), load_dataset(p, adapter, a.holdout)});
  }
  auto env = make_env(o, any_retrieval, true);
  auto effective = variants;
  if (o.no_iar || o.no_hrag) {
    for (auto& v : effective) {
      v.enable_iar = v.enable_iar && !o.no_iar;
      v.enable_hrag = v.enable_hrag && !o.no_hrag;
    }
  }
  BenchmarkOptions bo;
  bo.variants = effective;
  bo.parallel = a.parallel;
  bo.trace_dir = fs::path(a.out) / "traces";
  auto echo = env->echo("bench");
  echo["adapter"] = a.adapter;
  echo["ablate"] = a.ablate;
  echo["parallel"] = a.parallel;
  echo["library_holdout"] = a.holdout;
  echo["datasets"] = a.datasets;
  bo.config_echo = echo;
  BenchmarkDeps deps{[&env] { return env->make_backend(); },
                     env->templates,
                     *env->executor,
                     env->library ? &*env->library : nullptr,
                     env->embedder.get(),
                     env->global.get()};
  const auto report = run_benchmark(datasets, env->config, deps, bo);
  write_report(report, a.out);
  out << report_markdown(report);
  out << "report: " << (fs::path(a.out) / "report.json").string() << "\n";
  return 0;
}

struct BuildArgs {
  std::string in;
  std::string out;
  std::string adapter = "generic";
  double threshold = 0.5;
  std::size_t parallel = 1;
  std::size_t per_type_cap = 0;
};

int cmd_build_library(const Options& o, const BuildArgs& a, std::ostream& out, std::ostream&) {
  const auto tasks = load_dataset(a.in, adapter_by_name(a.adapter));
  auto env = make_env(o, !o.no_hrag, true);
  auto backend = env->make_backend();
  const Pipeline pipeline(deps_for(*env, *backend), env->config);
  CurationConfig cc;
  cc.confidence_threshold = a.threshold;
  cc.parallel = a.parallel;
  if (a.per_type_cap > 0) cc.per_type_cap = a.per_type_cap;
  auto echo = env->echo("build-library");
  echo["in"] = a.in;
  echo["adapter"] = a.adapter;
  echo["confidence_threshold"] = a.threshold;
  echo["per_type_cap"] = a.per_type_cap;
  const auto m = build_library(tasks, pipeline, cc, a.out, echo);
  out << "input " << m.input << ", kept " << m.kept << ", dropped (failed) " << m.dropped_failed
      << ", dropped (incorrect) " << m.dropped_incorrect << ", filtered (label) " << m.filtered_label
      << ", duplicates " << m.duplicates << ", capped " << m.capped << "\n";
  out << "library: " << a.out << "\nmanifest: " << a.out << ".manifest.json\n";
  if (m.kept > 0) out << format_stats(library_stats(a.out));
  return 0;
}

struct RetrieveArgs {
  std::string query;
  std::string type_hint;
};

int cmd_retrieve(const Options& o, const RetrieveArgs& a, std::ostream& out, std::ostream&) {
  auto env = make_env(o, true, false);
  std::optional<std::string> hint;
  if (!a.type_hint.empty()) hint = a.type_hint;
  const auto idx = coarse_indices(*env->library, *env->embedder, a.query, env->config.mmr, hint);
  out << idx.size() << " candidate(s)\n";
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& ex = env->library->exemplars()[idx[r]];
    auto prompt = ex.prompt;
    if (prompt.size() > 160) prompt = prompt.substr(0, 157) + "...";
    out << "[" << r << "] line " << ex.source_line << " | " << ex.problem_type << " / " << ex.problem_subtype
        << " | answer " << format_number(ex.answer) << "\n    " << prompt << "\n";
  }
  return 0;
}

int cmd_stats(const std::string& path, std::ostream& out) {
  out << format_stats(library_stats(path));
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turns optimization problems into models and solver programs, and benchmarks the result."};
  app.name("opmodel");
  app.set_config("--config", "", "Read options from a TOML/INI file (command-line flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--backend", o.backend, "Chat backend: http[:<endpoint>], scripted:<jsonl>, replay:<jsonl>")
      ->capture_default_str();
  app.add_option("--endpoint", o.endpoint, "Chat-completions endpoint for the http backend");
  app.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")->capture_default_str();
  app.add_option("--model", o.model, "Model name sent to the backend")->capture_default_str();
  app.add_option("--temperature", o.temperature, "Sampling temperature")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--max-retries", o.max_retries, "Transport retries per LLM call")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--llm-timeout-secs", o.llm_timeout_secs, "Per-call LLM timeout")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--max-revisions", o.max_revisions, "Revision rounds after a failed execution")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--timeout-secs", o.timeout_secs, "Per-execution time limit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--exemplar-cap", o.exemplar_cap, "Exemplars delivered per agent (at most 2)")
      ->check(CLI::Range(0, 2))
      ->capture_default_str();
  app.add_option("--templates-dir", o.templates_dir, "Directory of <role>.role.txt / <role>.task.txt overrides");
  app.add_option("--global-journal", o.global_journal, "Append every agent artifact to this JSONL journal");
  app.add_option("--runner", o.runner, "Program runner: external:<command> or stub:<jsonl>")->capture_default_str();
  app.add_option("--exec-parallel", o.exec_parallel, "Concurrent runner processes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--library", o.library, "Exemplar library (JSONL)");
  app.add_option("--embedder", o.embedder, "Embedder: hash[:<dim>] or http:<endpoint>")->capture_default_str();
  app.add_option("--embedding-model", o.embedding_model, "Model name for the http embedder")->capture_default_str();
  app.add_option("--embedding-dim", o.embedding_dim, "Vector dimension of the http embedder")->capture_default_str();
  app.add_option("--vector-cache", o.vector_cache, "Directory for cached library vectors");
  app.add_option("--record", o.record, "Append every backend reply to this JSONL file (replay format)");
  app.add_flag("--no-iar", o.no_iar, "Disable the revision loop");
  app.add_flag("--no-hrag", o.no_hrag, "Disable exemplar retrieval");
  app.add_option("--k", o.k, "Candidates kept after MMR")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--fetch-k", o.fetch_k, "Nearest neighbours fetched before MMR")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--lambda", o.lambda, "MMR relevance/diversity trade-off")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--language", o.language, "Language tag for generated programs")->capture_default_str();
  app.add_option("--solver", o.solver, "Solver tag for generated programs")->capture_default_str();

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Solve one task and write its trace");
  solve->add_option("--task", solve_args.task, "Task file (JSON {id, text, ground_truth} or plain text), - for stdin")
      ->required();
  solve->add_option("--out", solve_args.out, "Directory for the trace file")->capture_default_str();

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Run a benchmark and write report files");
  bench->add_option("--dataset", bench_args.datasets, "Dataset JSONL (repeatable)")->required();
  bench->add_option("--adapter", bench_args.adapter, "generic | mamo | orlm | custom:<q>,<a>[,<id>]")
      ->capture_default_str();
  bench->add_option("--ablate", bench_args.ablate, "all | none | no-iar | no-hrag | neither")
      ->check(CLI::IsMember({"all", "none", "no-iar", "no-hrag", "neither"}))
      ->capture_default_str();
  bench->add_option("--parallel", bench_args.parallel, "Tasks solved concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--library-holdout", bench_args.holdout, "Drop the last N records of each dataset")
      ->capture_default_str();
  bench->add_option("--out", bench_args.out, "Output directory")->required();

  BuildArgs build_args;
  auto* build = app.add_subcommand("build-library", "Curate an exemplar library from solved tasks");
  build->add_option("--in", build_args.in, "Raw tasks with answers (JSONL)")->required();
  build->add_option("--out", build_args.out, "Library file to write")->required();
  build->add_option("--adapter", build_args.adapter, "Dataset adapter for --in")->capture_default_str();
  build->add_option("--confidence-threshold", build_args.threshold, "Minimum label confidence")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  build->add_option("--parallel", build_args.parallel, "Tasks solved concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  build->add_option("--per-type-cap", build_args.per_type_cap, "Keep at most N records per problem type (0: no cap)")
      ->capture_default_str();

  RetrieveArgs retrieve_args;
  auto* retrieve = app.add_subcommand("retrieve", "Print the coarse retrieval candidates for a query");
  retrieve->add_option("--query", retrieve_args.query, "Query text")->required();
  retrieve->add_option("--type-hint", retrieve_args.type_hint, "Problem type to gate on (e.g. MILP)");

  std::string stats_path;
  auto* stats = app.add_subcommand("stats", "Count a library's records per problem type");
  stats->add_option("library", stats_path, "Library file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }
  if (o.fetch_k < o.k) {
    err << "--fetch-k must be at least --k\n";
    return 2;
  }

  try {
    if (*solve) return cmd_solve(o, solve_args, out, err);
    if (*bench) return cmd_bench(o, bench_args, out, err);
    if (*build) return cmd_build_library(o, build_args, out, err);
    if (*retrieve) {
      if (o.library.empty()) {
        err << "retrieve needs --library\n";
        return 2;
      }
      return cmd_retrieve(o, retrieve_args, out, err);
    }
    if (*stats) return cmd_stats(stats_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace opmodel::cli
