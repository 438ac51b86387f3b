#pragma once

// Chat-completion backends. Every agent talks to a ChatBackend; production
// runs use HttpBackend, tests and replays use ScriptedBackend so a pipeline run
// is fully determined by its script.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace opmodel {

inline constexpr const char* kDefaultModelName = "qwen-plus-2025-09-11";
inline constexpr const char* kDefaultApiKeyEnv = "OPMODEL_API_KEY";

/// Identifies a call site. Scripted backends route on it; Http ignores it.
struct CallKey {
  std::string task_id;
  std::string role;
  int round = 0;

  auto operator<=>(const CallKey&) const = default;
};

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  std::string model_name = kDefaultModelName;
  double temperature = 0.0;
  int max_retries = 2;
  CallKey key;
};

struct LoggedCall {
  CallKey key;
  std::optional<std::string> reply;  // absent when the call failed
  std::string error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Returns the raw reply text. Records the call in the request log.
  std::string complete(const ChatRequest& request);

  virtual std::string id() const = 0;

  std::vector<LoggedCall> request_log() const;
  std::size_t call_count() const;

 protected:
  virtual std::string do_complete(const ChatRequest& request) = 0;

 private:
  mutable std::mutex log_mutex_;
  std::vector<LoggedCall> log_;
};

/// One scripted reply. An empty task_id matches any task. Several entries
/// with the same key are consumed in order; `repeat` makes the last one sticky.
struct ScriptEntry {
  std::string task_id;
  std::string role;
  int round = 0;
  std::string reply;
  bool repeat = false;
};

/// Reads a JSONL script: {role, round, reply[, task][, repeat]} per line.
std::vector<ScriptEntry> load_script(const std::filesystem::path& path);

class ScriptedBackend : public ChatBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<ScriptEntry> entries);

  void add(ScriptEntry entry);
  void add(std::string role, int round, std::string reply, std::string task_id = {});

  std::string id() const override { return "scripted"; }

 protected:
  std::string do_complete(const ChatRequest& request) override;

 private:
  using Key = std::tuple<std::string, std::string, int>;  // task, role, round

  mutable std::mutex mutex_;
  std::map<Key, std::vector<ScriptEntry>> script_;
  std::map<CallKey, std::size_t> cursors_;  // per calling task, so tasks never share progress
};

/// Scripted backend loaded from a recorded JSONL trace.
std::unique_ptr<ScriptedBackend> make_replay_backend(const std::filesystem::path& trace_path);

struct HttpBackendConfig {
  std::string endpoint;  // e.g. https://host/v1/chat/completions
  std::string api_key_env = kDefaultApiKeyEnv;
  std::chrono::milliseconds timeout{120'000};
  std::chrono::milliseconds initial_backoff{500};
};

/// Speaks the common chat-completions wire shape. Transport failures, 429 and
/// 5xx are retried up to request.max_retries with doubling backoff.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string id() const override { return "http:" + config_.endpoint; }
  std::int64_t attempts() const noexcept;

 protected:
  std::string do_complete(const ChatRequest& request) override;

 private:
  HttpBackendConfig config_;
  mutable std::mutex attempts_mutex_;
  std::int64_t attempts_ = 0;
};

/// Forwards to an inner backend and appends every reply to a JSONL file in
/// the replay format, so a live run can be replayed later.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, std::filesystem::path out);

  std::string id() const override { return "recording:" + inner_.id(); }

 protected:
  std::string do_complete(const ChatRequest& request) override;

 private:
  ChatBackend& inner_;
  std::filesystem::path out_;
  std::mutex file_mutex_;
};

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;
};

/// Throws Errc::InvalidArgument on anything that is not http(s)://host[:port][/path].
ParsedUrl parse_url(const std::string& url);

}  // namespace opmodel
