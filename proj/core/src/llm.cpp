#include "opmodel/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "http_client.hpp"
#include "opmodel/error.hpp"
#include "opmodel/text.hpp"
#include "opmodel/types.hpp"

namespace opmodel {

// --- ChatBackend ------------------------------------------------------------

std::string ChatBackend::complete(const ChatRequest& request) {
  if (request.temperature < 0.0) {
    throw Error(Errc::InvalidArgument, "temperature must be >= 0");
  }
  try {
    auto reply = do_complete(request);
    std::lock_guard lock(log_mutex_);
    log_.push_back({request.key, reply, {}});
    return reply;
  } catch (const std::exception& e) {
    std::lock_guard lock(log_mutex_);
    log_.push_back({request.key, std::nullopt, e.what()});
    throw;
  }
}

std::vector<LoggedCall> ChatBackend::request_log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::size_t ChatBackend::call_count() const {
  std::lock_guard lock(log_mutex_);
  return log_.size();
}

// --- ScriptedBackend --------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) {
  for (auto& e : entries) add(std::move(e));
}

void ScriptedBackend::add(ScriptEntry entry) {
  std::lock_guard lock(mutex_);
  Key key{entry.task_id, entry.role, entry.round};
  script_[key].push_back(std::move(entry));
}

void ScriptedBackend::add(std::string role, int round, std::string reply, std::string task_id) {
  add(ScriptEntry{std::move(task_id), std::move(role), round, std::move(reply), false});
}

std::string ScriptedBackend::do_complete(const ChatRequest& request) {
  const auto& k = request.key;
  std::lock_guard lock(mutex_);
  auto it = script_.find(Key{k.task_id, k.role, k.round});
  if (it == script_.end()) it = script_.find(Key{std::string{}, k.role, k.round});
  if (it == script_.end()) {
    throw Error(Errc::ScriptExhausted, "no scripted reply for role '" + k.role + "' round " +
                                           std::to_string(k.round) + " (task '" + k.task_id + "')");
  }
  const auto& queue = it->second;
  auto& cursor = cursors_[k];
  if (cursor < queue.size()) return queue[cursor++].reply;
  if (!queue.empty() && queue.back().repeat) return queue.back().reply;
  throw Error(Errc::ScriptExhausted, "scripted replies for role '" + k.role + "' round " +
                                         std::to_string(k.round) + " already consumed (task '" +
                                         k.task_id + "')");
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open script '" + path.string() + "'");
  std::vector<ScriptEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    try {
      const auto j = Json::parse(body);
      ScriptEntry e;
      e.role = j.at("role").get<std::string>();
      e.round = j.at("round").get<int>();
      e.reply = j.at("reply").get<std::string>();
      e.task_id = j.value("task", std::string{});
      e.repeat = j.value("repeat", false);
      entries.push_back(std::move(e));
    } catch (const Json::exception& ex) {
      throw Error(Errc::SchemaError, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return entries;
}

std::unique_ptr<ScriptedBackend> make_replay_backend(const std::filesystem::path& trace_path) {
  return std::make_unique<ScriptedBackend>(load_script(trace_path));
}

// --- HttpBackend ------------------------------------------------------------

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl out;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::InvalidArgument, "endpoint '" + url + "' has no scheme");
  out.scheme = text::to_lower(url.substr(0, scheme_end));
  if (out.scheme != "http" && out.scheme != "https") {
    throw Error(Errc::InvalidArgument, "unsupported scheme in '" + url + "'");
  }
  auto rest = url.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    try {
      out.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad port in '" + url + "'");
    }
    authority.resize(colon);
  } else {
    out.port = out.scheme == "https" ? 443 : 80;
  }
  if (authority.empty()) throw Error(Errc::InvalidArgument, "endpoint '" + url + "' has no host");
  out.host = authority;
  return out;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  (void)parse_url(config_.endpoint);
}

std::int64_t HttpBackend::attempts() const noexcept {
  std::lock_guard lock(attempts_mutex_);
  return attempts_;
}

std::string HttpBackend::do_complete(const ChatRequest& request) {
  const auto url = parse_url(config_.endpoint);
  Json body = Json::object();
  body["model"] = request.model_name;
  body["temperature"] = request.temperature;
  body["messages"] = Json::array({Json{{"role", "system"}, {"content", request.system_text}},
                                  Json{{"role", "user"}, {"content", request.user_text}}});
  const auto payload = dump_json(body);

  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  auto backoff = config_.initial_backoff;
  std::string last_error;
  const int attempts_allowed = std::max(0, request.max_retries) + 1;
  for (int attempt = 0; attempt < attempts_allowed; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    {
      std::lock_guard lock(attempts_mutex_);
      ++attempts_;
    }
    std::string transport_error;
    auto reply = detail::post_json(url, payload, headers, config_.timeout, transport_error);
    if (!reply) {
      last_error = "transport: " + transport_error;
      continue;
    }
    if (detail::is_retryable_status(reply->status)) {
      last_error = "http status " + std::to_string(reply->status);
      continue;
    }
    if (reply->status < 200 || reply->status >= 300) {
      throw Error(Errc::BackendUnavailable,
                  "http status " + std::to_string(reply->status) + ": " + text::truncate_bytes(reply->body, 512));
    }
    try {
      const auto j = Json::parse(reply->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw Error(Errc::BackendUnavailable, std::string("malformed completion reply: ") + e.what());
    }
  }
  throw Error(Errc::BackendUnavailable,
              "gave up after " + std::to_string(attempts_allowed) + " attempts (" + last_error + ")");
}

// --- RecordingBackend -------------------------------------------------------

RecordingBackend::RecordingBackend(ChatBackend& inner, std::filesystem::path out)
    : inner_(inner), out_(std::move(out)) {}

std::string RecordingBackend::do_complete(const ChatRequest& request) {
  auto reply = inner_.complete(request);
  Json line = Json::object();
  line["task"] = request.key.task_id;
  line["role"] = request.key.role;
  line["round"] = request.key.round;
  line["reply"] = reply;
  std::lock_guard lock(file_mutex_);
  std::ofstream out(out_, std::ios::app);
  if (!out) throw Error(Errc::IoError, "cannot append to '" + out_.string() + "'");
  out << dump_json(line) << '\n';
  return reply;
}

}  // namespace opmodel
