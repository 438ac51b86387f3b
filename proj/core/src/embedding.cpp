#include "opmodel/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "http_client.hpp"
#include "opmodel/error.hpp"
#include "opmodel/text.hpp"
#include "opmodel/types.hpp"

namespace opmodel {

std::vector<Vector> Embedder::embed(std::span<const std::string> texts) {
  ++calls_;
  auto out = do_embed(texts);
  if (out.size() != texts.size()) {
    throw Error(Errc::BackendUnavailable, "embedder returned " + std::to_string(out.size()) +
                                              " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.size() != dimension()) throw Error(Errc::DimensionMismatch, "embedder returned a vector of wrong size");
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                "dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double d = dot(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return d / (na * nb);
}

void normalize_in_place(Vector& v) {
  const double n = norm(v);
  if (n == 0.0) return;
  for (auto& x : v) x /= n;
}

// --- HashEmbedder -----------------------------------------------------------

HashEmbedder::HashEmbedder(std::size_t dimension) : dim_(dimension) {
  if (dim_ == 0) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
}

namespace {

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c) != 0) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

std::vector<Vector> HashEmbedder::do_embed(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Vector v(dim_, 0.0);
    const auto tokens = tokenize(t);
    const auto bump = [&](std::string_view feature, double weight) {
      const auto h = text::fnv1a64(feature);
      const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
      v[h % dim_] += sign * weight;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      bump(tokens[i], 1.0);
      if (i + 1 < tokens.size()) bump(tokens[i] + " " + tokens[i + 1], 0.5);
    }
    if (norm(v) == 0.0) v[0] = 1.0;
    normalize_in_place(v);
    out.push_back(std::move(v));
  }
  return out;
}

// --- HttpEmbedder -----------------------------------------------------------

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {
  (void)parse_url(config_.endpoint);
}

std::vector<Vector> HttpEmbedder::do_embed(std::span<const std::string> texts) {
  const auto url = parse_url(config_.endpoint);
  Json body = Json::object();
  body["model"] = config_.model;
  body["input"] = Json(std::vector<std::string>(texts.begin(), texts.end()));
  const auto payload = dump_json(body);

  std::vector<std::pair<std::string, std::string>> headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    std::string transport_error;
    auto reply = detail::post_json(url, payload, headers, config_.timeout, transport_error);
    if (!reply) {
      last_error = transport_error;
      continue;
    }
    if (detail::is_retryable_status(reply->status)) {
      last_error = "http status " + std::to_string(reply->status);
      continue;
    }
    if (reply->status < 200 || reply->status >= 300) {
      throw Error(Errc::BackendUnavailable, "embedding endpoint returned " + std::to_string(reply->status));
    }
    try {
      const auto j = Json::parse(reply->body);
      std::vector<Vector> out;
      for (const auto& item : j.at("data")) {
        auto v = item.at("embedding").get<Vector>();
        normalize_in_place(v);
        out.push_back(std::move(v));
      }
      return out;
    } catch (const Json::exception& e) {
      throw Error(Errc::BackendUnavailable, std::string("malformed embedding reply: ") + e.what());
    }
  }
  throw Error(Errc::BackendUnavailable, "embedding endpoint unavailable (" + last_error + ")");
}

}  // namespace opmodel
