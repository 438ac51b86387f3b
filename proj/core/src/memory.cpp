#include "opmodel/memory.hpp"

#include "opmodel/error.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

LocalMemory& LocalMemory::record_round(RoundRecord entry) {
  if (entry.round != static_cast<int>(rounds_.size())) {
    throw Error(Errc::OrderViolation, "round " + std::to_string(entry.round) + " recorded at position " +
                                          std::to_string(rounds_.size()) + " of task '" + task_id_ + "'");
  }
  rounds_.push_back(std::move(entry));
  return *this;
}

std::pair<std::optional<RevisionTip>, std::optional<RevisionTip>> LocalMemory::last_tips() const {
  std::optional<RevisionTip> model_tip;
  std::optional<RevisionTip> code_tip;
  for (auto it = rounds_.rbegin(); it != rounds_.rend(); ++it) {
    if (!model_tip && it->model_tip) model_tip = it->model_tip;
    if (!code_tip && it->code_tip) code_tip = it->code_tip;
  }
  return {model_tip, code_tip};
}

void to_json(Json& j, const GlobalRecord& v) {
  j = Json::object();
  j["task_id"] = v.task_id;
  j["role"] = v.role;
  j["round"] = v.round;
  j["digest"] = v.digest;
  j["payload"] = v.payload;
}

void from_json(const Json& j, GlobalRecord& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.role = j.at("role").get<std::string>();
  v.round = j.at("round").get<int>();
  v.digest = j.at("digest").get<std::string>();
  v.payload = j.at("payload");
}

GlobalMemory::GlobalMemory(std::filesystem::path journal) : journal_path_(std::move(journal)) {
  if (journal_path_->has_parent_path()) std::filesystem::create_directories(journal_path_->parent_path());
  journal_.open(*journal_path_, std::ios::binary | std::ios::app);
  if (!journal_) throw Error(Errc::IoError, "cannot open global journal '" + journal_path_->string() + "'");
}

void GlobalMemory::append(GlobalRecord record) {
  if (record.digest.empty()) record.digest = text::hex64(text::fnv1a64(dump_json(record.payload)));
  std::lock_guard lock(mutex_);
  if (journal_.is_open()) {
    journal_ << dump_json(Json(record)) << '\n';
    journal_.flush();
  }
  records_.push_back(std::move(record));
}

std::vector<GlobalRecord> GlobalMemory::read() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t GlobalMemory::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<GlobalRecord> read_journal(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read journal '" + path.string() + "'");
  std::vector<GlobalRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line).get<GlobalRecord>());
    } catch (const Json::exception& e) {
      throw Error(Errc::SchemaError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace opmodel
