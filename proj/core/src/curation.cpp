#include "opmodel/curation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "opmodel/error.hpp"
#include "opmodel/hrag.hpp"
#include "opmodel/prompts.hpp"
#include "opmodel/reply_parsing.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

namespace {

constexpr std::string_view kLabelSchema = R"({"problem_type": "...", "problem_subtype": "...", "confidence": 0.0})";

struct Candidate {
  CurationFate fate = CurationFate::DroppedFailed;
  std::string detail;
  std::optional<Exemplar> exemplar;
};

}  // namespace

Label parse_label(std::string_view reply) {
  const auto j = reply::parse_json_reply(reply);
  if (!j.is_object()) throw Error(Errc::ReplyParseError, "label reply must be a JSON object");
  Label l;
  const auto str = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string() || text::trim(it->get<std::string>()).empty()) {
      throw Error(Errc::ReplyParseError, std::string("label reply lacks \"") + key + "\"");
    }
    return std::string(text::trim(it->get<std::string>()));
  };
  l.problem_type = str("problem_type");
  l.problem_subtype = str("problem_subtype");
  auto c = j.find("confidence");
  if (c == j.end() || !c->is_number()) throw Error(Errc::ReplyParseError, "label reply lacks a numeric \"confidence\"");
  l.confidence = c->get<double>();
  if (!std::isfinite(l.confidence) || l.confidence < 0.0 || l.confidence > 1.0) {
    throw Error(Errc::ReplyParseError, "label confidence must lie in [0, 1]");
  }
  return l;
}

std::string compose_response(const MathModel& model, const SolverProgram& program) {
  return "## Mathematical Model:\n```" + dump_json(Json(model), 1) + "```\n\n\n## Python Code:\n```python\n" +
         program.source + "\n```";
}

std::string_view to_string(CurationFate f) noexcept {
  switch (f) {
    case CurationFate::Kept: return "kept";
    case CurationFate::DroppedFailed: return "dropped_failed";
    case CurationFate::DroppedIncorrect: return "dropped_incorrect";
    case CurationFate::FilteredLabel: return "filtered_label";
    case CurationFate::Duplicate: return "duplicate";
    case CurationFate::CappedType: return "capped_type";
  }
  return "";
}

Json manifest_json(const CurationManifest& m) {
  Json j = Json::object();
  j["input"] = m.input;
  j["kept"] = m.kept;
  j["dropped_failed"] = m.dropped_failed;
  j["dropped_incorrect"] = m.dropped_incorrect;
  j["filtered_label"] = m.filtered_label;
  j["duplicates"] = m.duplicates;
  j["capped"] = m.capped;
  j["response_template"] = kResponseTemplate;
  j["config"] = m.config;
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    Json x = Json::object();
    x["task_id"] = e.task_id;
    x["fate"] = to_string(e.fate);
    x["detail"] = e.detail;
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  return j;
}

CurationManifest build_library(std::span<const Task> tasks, const Pipeline& pipeline, const CurationConfig& config,
                               const std::filesystem::path& out, const Json& config_echo) {
  for (const auto& t : tasks) {
    if (!t.ground_truth) throw Error(Errc::InvalidArgument, "task '" + t.id + "' has no ground truth");
  }
  std::vector<Candidate> cands(tasks.size());
  parallel_for(tasks.size(), config.parallel, [&](std::size_t i) {
    const auto& task = tasks[i];
    auto& c = cands[i];
    const auto trace = pipeline.solve(task);
    ExecutionOutcome last;
    last.status = trace.final_status;
    last.objective = trace.final_objective;
    const auto judgment = judge_solution(*task.ground_truth, last);
    if (judgment.verdict == Verdict::ExecutionFailure || trace.rounds.empty()) {
      c.fate = CurationFate::DroppedFailed;
      c.detail = trace.pipeline_error ? *trace.pipeline_error : std::string(to_string(trace.final_status));
      return;
    }
    if (judgment.verdict == Verdict::WrongAnswer) {
      c.fate = CurationFate::DroppedIncorrect;
      std::ostringstream d;
      d.precision(17);
      d << "objective " << *trace.final_objective << " vs ground truth " << *task.ground_truth;
      c.detail = d.str();
      return;
    }
    const auto& final_round = trace.rounds.back();
    Label label;
    try {
      CallRecord rec;
      label = pipeline.agents().ask_parsed(
          role::kLabeler, task,
          {{"problem_description", task.text}, {"model_text", dump_json(Json(final_round.model), 2)}}, kLabelSchema,
          rec, [](std::string_view r) { return parse_label(r); });
    } catch (const std::exception& e) {
      c.fate = CurationFate::FilteredLabel;
      c.detail = e.what();
      return;
    }
    if (label.confidence < config.confidence_threshold) {
      c.fate = CurationFate::FilteredLabel;
      std::ostringstream d;
      d << "confidence " << label.confidence << " below " << config.confidence_threshold;
      c.detail = d.str();
      return;
    }
    Exemplar ex;
    ex.prompt = task.text;
    ex.response = compose_response(final_round.model, final_round.program);
    ex.answer = *task.ground_truth;
    ex.problem_type = label.problem_type;
    ex.problem_subtype = label.problem_subtype;
    c.fate = CurationFate::Kept;
    c.exemplar = std::move(ex);
  });

  CurationManifest m;
  m.input = tasks.size();
  m.config = config_echo;
  std::vector<Exemplar> kept;
  std::set<std::string> prompts;
  std::map<std::string, std::size_t> per_type;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto& c = cands[i];
    if (c.fate == CurationFate::Kept) {
      if (!prompts.insert(c.exemplar->prompt).second) {
        c.fate = CurationFate::Duplicate;
        c.detail = "same prompt as an earlier record";
      } else if (config.per_type_cap && per_type[c.exemplar->problem_type] >= *config.per_type_cap) {
        c.fate = CurationFate::CappedType;
        c.detail = "type '" + c.exemplar->problem_type + "' reached the cap";
      } else {
        ++per_type[c.exemplar->problem_type];
        c.detail = c.exemplar->problem_type + " / " + c.exemplar->problem_subtype;
        kept.push_back(*c.exemplar);
      }
    }
    switch (c.fate) {
      case CurationFate::Kept: ++m.kept; break;
      case CurationFate::DroppedFailed: ++m.dropped_failed; break;
      case CurationFate::DroppedIncorrect: ++m.dropped_incorrect; break;
      case CurationFate::FilteredLabel: ++m.filtered_label; break;
      case CurationFate::Duplicate: ++m.duplicates; break;
      case CurationFate::CappedType: ++m.capped; break;
    }
    m.entries.push_back({tasks[i].id, c.fate, c.detail});
  }

  write_library(out, kept);
  const auto manifest_path = out.string() + ".manifest.json";
  std::ofstream mf(manifest_path, std::ios::binary | std::ios::trunc);
  if (!mf) throw Error(Errc::IoError, "cannot write manifest '" + manifest_path + "'");
  mf << dump_json(manifest_json(m), 2) << '\n';
  return m;
}

LibraryStats library_stats(const std::filesystem::path& path) {
  const auto exemplars = load_library(path);
  LibraryStats s;
  s.count = exemplars.size();
  for (const auto& ex : exemplars) ++s.per_type[ex.problem_type];
  if (s.per_type.size() >= 2) {
    std::size_t lo = std::numeric_limits<std::size_t>::max();
    std::size_t hi = 0;
    for (const auto& [_, n] : s.per_type) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    s.balance_ratio = static_cast<double>(hi) / static_cast<double>(lo);
  }
  return s;
}

std::string format_stats(const LibraryStats& stats) {
  std::ostringstream out;
  out << "count: " << stats.count << "\n";
  for (const auto& [type, n] : stats.per_type) out << "  " << type << ": " << n << "\n";
  out << "balance ratio (max/min): ";
  if (stats.balance_ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *stats.balance_ratio);
    out << buf;
  } else {
    out << "\xE2\x88\x9E";
  }
  out << "\n";
  return out.str();
}

}  // namespace opmodel
