#pragma once

// Thin wrapper over cpp-httplib so only one translation unit pulls it in.

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opmodel/llm.hpp"

namespace opmodel::detail {

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Returns nullopt on transport failure (refused, timeout, TLS), with the
/// reason in `transport_error`.
std::optional<HttpReply> post_json(const ParsedUrl& url, const std::string& body,
                                   const std::vector<std::pair<std::string, std::string>>& headers,
                                   std::chrono::milliseconds timeout, std::string& transport_error);

inline bool is_retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace opmodel::detail
