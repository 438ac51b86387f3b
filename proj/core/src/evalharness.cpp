#include "opmodel/evalharness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "opmodel/error.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

namespace {

double pct(std::size_t part, std::size_t whole) {
  return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

std::optional<double> answer_value(const Json& v) {
  double d = 0.0;
  if (v.is_number()) {
    d = v.get<double>();
  } else if (v.is_string()) {
    const std::string s(text::trim(v.get<std::string>()));
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(d)) return std::nullopt;
  return d;
}

std::string safe_file_name(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  out << body;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Correct: return "Correct";
    case Verdict::WrongAnswer: return "WrongAnswer";
    case Verdict::ExecutionFailure: return "ExecutionFailure";
  }
  return "";
}

void to_json(Json& j, const Judgment& v) {
  j = Json::object();
  j["verdict"] = to_string(v.verdict);
  j["rel_error"] = v.rel_error ? Json(*v.rel_error) : Json(nullptr);
  j["abs_error"] = v.abs_error ? Json(*v.abs_error) : Json(nullptr);
}

Judgment judge_value(double y_star, double y_hat) {
  Judgment j;
  const double abs_err = std::fabs(y_star - y_hat);
  j.abs_error = abs_err;
  bool correct = false;
  if (y_star == 0.0) {
    correct = abs_err < kAbsTolerance;
  } else {
    const double rel = abs_err / std::fabs(y_star);
    j.rel_error = rel;
    correct = rel < kRelTolerance;
  }
  j.verdict = correct ? Verdict::Correct : Verdict::WrongAnswer;
  return j;
}

Judgment judge_solution(double y_star, const ExecutionOutcome& outcome) {
  if (outcome.failed() || !outcome.objective || !std::isfinite(*outcome.objective)) return Judgment{};
  return judge_value(y_star, *outcome.objective);
}

double aggregate_pass1(std::span<const Judgment> judgments) {
  if (judgments.empty()) throw Error(Errc::EmptySet, "no judgments to aggregate");
  std::size_t correct = 0;
  for (const auto& j : judgments) correct += j.verdict == Verdict::Correct ? 1 : 0;
  return pct(correct, judgments.size());
}

double macro_average(std::span<const double> per_dataset) {
  if (per_dataset.empty()) throw Error(Errc::EmptySet, "no per-dataset values to average");
  long double sum = 0.0L;
  for (double v : per_dataset) sum += v;
  return static_cast<double>(sum / static_cast<long double>(per_dataset.size()));
}

ErrorRates decompose_errors(std::span<const Judgment> judgments) {
  if (judgments.empty()) throw Error(Errc::EmptySet, "no judgments to decompose");
  std::size_t wrong = 0;
  std::size_t failed = 0;
  for (const auto& j : judgments) {
    wrong += j.verdict == Verdict::WrongAnswer ? 1 : 0;
    failed += j.verdict == Verdict::ExecutionFailure ? 1 : 0;
  }
  return {pct(wrong, judgments.size()), pct(failed, judgments.size())};
}

double round2(double value) {
  // the nudge keeps representation error (x.xx4999...) from flipping a half
  const double scaled = value * 100.0;
  return std::round(scaled + std::copysign(1e-9, scaled)) / 100.0;
}

std::string format_pct(double value) {
  char buf[64];
  double r = round2(value);
  if (r == 0.0) r = 0.0;  // no "-0.00"
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

// ---------------------------------------------------------------------------

DatasetAdapter adapter_by_name(std::string_view name) {
  if (name == "generic") return {"generic", "question", "answer", "id"};
  if (name == "mamo") return {"mamo", "Question", "Answer", "id"};
  if (name == "orlm") return {"orlm", "en_question", "en_answer", "id"};
  if (name.starts_with("custom:")) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : name.substr(7)) {
      if (c == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty() || parts[1].empty()) {
      throw Error(Errc::InvalidArgument, "custom adapter must be custom:<question>,<answer>[,<id>]");
    }
    return {std::string(name), parts[0], parts[1], parts.size() == 3 ? parts[2] : "id"};
  }
  throw Error(Errc::InvalidArgument, "unknown dataset adapter '" + std::string(name) + "'");
}

std::vector<Task> load_dataset(const std::filesystem::path& path, const DatasetAdapter& adapter, std::size_t holdout,
                               std::string dataset_tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read dataset '" + path.string() + "'");
  if (dataset_tag.empty()) dataset_tag = path.stem().string();
  std::vector<Task> tasks;
  std::string raw;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& why) {
    throw Error(Errc::SchemaError, path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.starts_with("#")) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail(std::string("not valid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) fail("record must be a JSON object");
    auto q = j.find(adapter.question_field);
    if (q == j.end() || !q->is_string() || text::trim(q->get<std::string>()).empty()) {
      fail("missing or empty \"" + adapter.question_field + "\"");
    }
    auto a = j.find(adapter.answer_field);
    if (a == j.end()) fail("missing \"" + adapter.answer_field + "\"");
    auto value = answer_value(*a);
    if (!value) fail("\"" + adapter.answer_field + "\" is not a finite number");
    Task t;
    t.text = q->get<std::string>();
    t.ground_truth = *value;
    t.dataset_tag = dataset_tag;
    if (auto id = j.find(adapter.id_field); id != j.end() && (id->is_string() || id->is_number_integer())) {
      t.id = id->is_string() ? id->get<std::string>() : std::to_string(id->get<long long>());
    } else {
      t.id = dataset_tag + "-" + std::to_string(line_no);
    }
    tasks.push_back(std::move(t));
  }
  if (holdout > tasks.size()) {
    throw Error(Errc::InvalidArgument, "holdout " + std::to_string(holdout) + " exceeds the " +
                                           std::to_string(tasks.size()) + " records in '" + path.string() + "'");
  }
  tasks.resize(tasks.size() - holdout);
  return tasks;
}

// ---------------------------------------------------------------------------

std::vector<Variant> ablation_variants(std::string_view ablate) {
  const Variant full{"full", true, true};
  const Variant no_iar{"no-iar", false, true};
  const Variant no_hrag{"no-hrag", true, false};
  const Variant neither{"neither", false, false};
  if (ablate == "all") return {full, no_iar, no_hrag, neither};
  if (ablate == "none" || ablate == "full") return {full};
  if (ablate == "no-iar") return {no_iar};
  if (ablate == "no-hrag") return {no_hrag};
  if (ablate == "neither") return {neither};
  throw Error(Errc::InvalidArgument, "unknown ablation '" + std::string(ablate) + "'");
}

DatasetResult summarize(std::string dataset, std::span<const Judgment> judgments) {
  DatasetResult r;
  r.dataset = std::move(dataset);
  r.total = judgments.size();
  for (const auto& j : judgments) {
    switch (j.verdict) {
      case Verdict::Correct: ++r.correct; break;
      case Verdict::WrongAnswer: ++r.wrong; break;
      case Verdict::ExecutionFailure: ++r.failed; break;
    }
  }
  r.accuracy = aggregate_pass1(judgments);
  const auto rates = decompose_errors(judgments);
  r.wrong_rate = rates.wrong_rate;
  r.compile_rate = rates.compile_rate;
  return r;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

Report run_benchmark(std::span<const Dataset> datasets, const PipelineConfig& base, BenchmarkDeps deps,
                     const BenchmarkOptions& options, std::vector<std::vector<TaskResult>>* results_out) {
  if (datasets.empty()) throw Error(Errc::InvalidArgument, "no datasets to benchmark");
  if (options.variants.empty()) throw Error(Errc::InvalidArgument, "no benchmark variants");
  if (!deps.make_backend) throw Error(Errc::InvalidArgument, "no backend factory");
  struct Slot {
    std::size_t dataset;
    const Task* task;
  };
  std::vector<Slot> slots;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    if (datasets[d].tasks.empty()) throw Error(Errc::InvalidArgument, "dataset '" + datasets[d].name + "' has no tasks");
    for (const auto& t : datasets[d].tasks) {
      if (!t.ground_truth) throw Error(Errc::InvalidArgument, "task '" + t.id + "' has no ground truth");
      slots.push_back({d, &t});
    }
  }

  Report report;
  report.config = options.config_echo;
  for (const auto& ds : datasets) report.dataset_names.push_back(ds.name);
  if (results_out != nullptr) results_out->clear();

  for (const auto& variant : options.variants) {
    auto cfg = base;
    cfg.enable_iar = variant.enable_iar;
    cfg.enable_hrag = variant.enable_hrag;
    auto backend = deps.make_backend();
    if (!backend) throw Error(Errc::InvalidArgument, "backend factory returned nothing");
    const Pipeline pipeline(
        PipelineDeps{*backend, deps.templates, deps.executor, cfg.enable_hrag ? deps.library : nullptr,
                     cfg.enable_hrag ? deps.embedder : nullptr, deps.global},
        cfg);

    Json echo = options.config_echo.is_object() ? options.config_echo : Json::object();
    echo["variant"] = variant.name;
    echo["pipeline"] = cfg;

    std::vector<TaskResult> results(slots.size());
    parallel_for(slots.size(), options.parallel, [&](std::size_t i) {
      const auto& slot = slots[i];
      auto trace = pipeline.solve(*slot.task);
      Judgment judgment;
      if (!trace.pipeline_error || trace.final_objective) {
        ExecutionOutcome last;
        last.status = trace.final_status;
        last.objective = trace.final_objective;
        judgment = judge_solution(*slot.task->ground_truth, last);
      }
      if (options.trace_dir) {
        const auto file = *options.trace_dir / safe_file_name(variant.name) /
                          safe_file_name(datasets[slot.dataset].name) /
                          (safe_file_name(slot.task->id) + ".trace.json");
        write_text(file, trace_document(trace, echo));
      }
      results[i] = TaskResult{std::move(trace), judgment};
    });

    VariantRow row;
    row.variant = variant;
    std::vector<double> accuracies;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      std::vector<Judgment> js;
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].dataset == d) js.push_back(results[i].judgment);
      }
      row.datasets.push_back(summarize(datasets[d].name, js));
      accuracies.push_back(row.datasets.back().accuracy);
    }
    row.macro_avg = macro_average(accuracies);
    for (const auto& r : results) {
      row.counters.llm_calls += r.trace.counters.llm_calls;
      row.counters.retrieval_calls += r.trace.counters.retrieval_calls;
      row.counters.embedding_calls += r.trace.counters.embedding_calls;
    }
    report.rows.push_back(std::move(row));
    if (results_out != nullptr) results_out->push_back(std::move(results));
  }
  return report;
}

// ---------------------------------------------------------------------------

Json report_json(const Report& report) {
  Json j = Json::object();
  j["config"] = report.config;
  j["datasets"] = report.dataset_names;
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    Json r = Json::object();
    r["variant"] = row.variant.name;
    r["enable_iar"] = row.variant.enable_iar;
    r["enable_hrag"] = row.variant.enable_hrag;
    r["macro_avg"] = round2(row.macro_avg);
    Json ds = Json::array();
    for (const auto& d : row.datasets) {
      Json e = Json::object();
      e["dataset"] = d.dataset;
      e["total"] = d.total;
      e["correct"] = d.correct;
      e["wrong_answer"] = d.wrong;
      e["compile_error"] = d.failed;
      e["accuracy"] = round2(d.accuracy);
      e["wrong_rate"] = round2(d.wrong_rate);
      e["compile_rate"] = round2(d.compile_rate);
      ds.push_back(std::move(e));
    }
    r["datasets"] = std::move(ds);
    r["counters"] = row.counters;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string report_markdown(const Report& report) {
  std::ostringstream out;
  out << "# Benchmark report\n\n## Accuracy (pass@1, %)\n\n| Variant |";
  for (const auto& d : report.dataset_names) out << ' ' << d << " |";
  out << " Macro Avg |\n|---|";
  for (std::size_t i = 0; i < report.dataset_names.size(); ++i) out << "---:|";
  out << "---:|\n";
  for (const auto& row : report.rows) {
    out << "| " << row.variant.name << " |";
    for (const auto& d : row.datasets) out << ' ' << format_pct(d.accuracy) << " |";
    out << ' ' << format_pct(row.macro_avg) << " |\n";
  }
  out << "\n## Error decomposition (%)\n\n"
         "| Variant | Dataset | Tasks | Accuracy | Wrong answer rate | Compile error rate |\n"
         "|---|---|---:|---:|---:|---:|\n";
  for (const auto& row : report.rows) {
    for (const auto& d : row.datasets) {
      out << "| " << row.variant.name << " | " << d.dataset << " | " << d.total << " | " << format_pct(d.accuracy)
          << " | " << format_pct(d.wrong_rate) << " | " << format_pct(d.compile_rate) << " |\n";
    }
  }
  out << "\n## Configuration\n\n```json\n" << dump_json(report.config, 2) << "\n```\n";
  return out.str();
}

std::string report_csv(const Report& report) {
  std::ostringstream out;
  out << "variant,dataset,total,correct,wrong_answer,compile_error,accuracy,wrong_rate,compile_rate\n";
  for (const auto& row : report.rows) {
    for (const auto& d : row.datasets) {
      out << csv_field(row.variant.name) << ',' << csv_field(d.dataset) << ',' << d.total << ',' << d.correct << ','
          << d.wrong << ',' << d.failed << ',' << format_pct(d.accuracy) << ',' << format_pct(d.wrong_rate) << ','
          << format_pct(d.compile_rate) << '\n';
    }
  }
  return out.str();
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", dump_json(report_json(report), 2) + "\n");
  write_text(dir / "report.md", report_markdown(report));
  write_text(dir / "report.csv", report_csv(report));
}

}  // namespace opmodel
