#pragma once

// Local memory holds one task's rounds; global memory is the cross-task,
// append-only log of every agent artifact.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opmodel/types.hpp"

namespace opmodel {

class LocalMemory {
 public:
  explicit LocalMemory(std::string task_id) : task_id_(std::move(task_id)) {}

  /// Appends `entry`; its round must equal the current length (OrderViolation).
  LocalMemory& record_round(RoundRecord entry);

  /// Most recent modeling tip and most recent code tip.
  std::pair<std::optional<RevisionTip>, std::optional<RevisionTip>> last_tips() const;

  const std::string& task_id() const noexcept { return task_id_; }
  const std::vector<RoundRecord>& rounds() const noexcept { return rounds_; }
  std::size_t size() const noexcept { return rounds_.size(); }

 private:
  std::string task_id_;
  std::vector<RoundRecord> rounds_;
};

struct GlobalRecord {
  std::string task_id;
  std::string role;
  int round = 0;
  std::string digest;  // filled from the payload when empty
  Json payload;

  bool operator==(const GlobalRecord&) const = default;
};

void to_json(Json& j, const GlobalRecord& v);
void from_json(const Json& j, GlobalRecord& v);

/// Thread-safe append-only log, optionally written through to a JSONL journal.
class GlobalMemory {
 public:
  GlobalMemory() = default;
  explicit GlobalMemory(std::filesystem::path journal);

  void append(GlobalRecord record);
  std::vector<GlobalRecord> read() const;
  std::size_t size() const;

  const std::optional<std::filesystem::path>& journal() const noexcept { return journal_path_; }

 private:
  mutable std::mutex mutex_;
  std::vector<GlobalRecord> records_;
  std::optional<std::filesystem::path> journal_path_;
  std::ofstream journal_;
};

std::vector<GlobalRecord> read_journal(const std::filesystem::path& path);

}  // namespace opmodel
