#pragma once

// Library construction: solve, keep what judges correct, label, filter and
// write records that load_library reads back.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opmodel/evalharness.hpp"
#include "opmodel/orchestrator.hpp"

namespace opmodel {

struct CurationConfig {
  double confidence_threshold = 0.5;
  std::size_t parallel = 1;
  std::optional<std::size_t> per_type_cap;
};

struct Label {
  std::string problem_type;
  std::string problem_subtype;
  double confidence = 0.0;
};

/// {problem_type, problem_subtype, confidence}; throws ReplyParseError.
Label parse_label(std::string_view reply);

/// Model JSON and program as one Markdown exposition, laid out as
/// kResponseTemplate describes.
std::string compose_response(const MathModel& model, const SolverProgram& program);
inline constexpr std::string_view kResponseTemplate =
    "## Mathematical Model:\\n```<model JSON>```\\n\\n\\n## Python Code:\\n```python\\n<program>\\n```";

enum class CurationFate { Kept, DroppedFailed, DroppedIncorrect, FilteredLabel, Duplicate, CappedType };

std::string_view to_string(CurationFate f) noexcept;

struct CurationEntry {
  std::string task_id;
  CurationFate fate = CurationFate::DroppedFailed;
  std::string detail;
};

struct CurationManifest {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t dropped_failed = 0;
  std::size_t dropped_incorrect = 0;
  std::size_t filtered_label = 0;
  std::size_t duplicates = 0;
  std::size_t capped = 0;
  std::vector<CurationEntry> entries;
  Json config;
};

Json manifest_json(const CurationManifest& m);

/// Runs the curation over `tasks` (each must carry ground truth) and writes
/// the library to `out` plus `<out>.manifest.json`. Per-task failures are
/// recorded in the manifest, never thrown.
CurationManifest build_library(std::span<const Task> tasks, const Pipeline& pipeline, const CurationConfig& config,
                               const std::filesystem::path& out, const Json& config_echo = Json::object());

struct LibraryStats {
  std::size_t count = 0;
  std::map<std::string, std::size_t> per_type;
  std::optional<double> balance_ratio;  // max/min type frequency; absent with fewer than two types
};

/// Throws IoError or EmptyLibrary.
LibraryStats library_stats(const std::filesystem::path& path);
std::string format_stats(const LibraryStats& stats);

}  // namespace opmodel
