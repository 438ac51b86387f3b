#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "opmodel/llm.hpp"

namespace opmodel {

using Vector = std::vector<double>;

/// Maps texts to unit-norm vectors of a fixed dimension.
class Embedder {
 public:
  virtual ~Embedder() = default;

  std::vector<Vector> embed(std::span<const std::string> texts);

  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;

  /// Number of embed() invocations so far (batches, not texts).
  std::int64_t call_count() const noexcept { return calls_.load(); }

 protected:
  virtual std::vector<Vector> do_embed(std::span<const std::string> texts) = 0;

 private:
  std::atomic<std::int64_t> calls_{0};
};

/// Deterministic feature-hashing embedder: lower-cased word unigrams and
/// bigrams hashed into signed buckets, then L2-normalized. Texts with no
/// tokens map to the first basis vector.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 256);

  std::string id() const override { return "hash-" + std::to_string(dim_); }
  std::size_t dimension() const override { return dim_; }

 protected:
  std::vector<Vector> do_embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

struct HttpEmbedderConfig {
  std::string endpoint;  // e.g. https://host/v1/embeddings
  std::string model = "text-embedding-v4";
  std::string api_key_env = kDefaultApiKeyEnv;
  std::size_t dimension = 1024;
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{500};
};

/// OpenAI-style /embeddings client. Replies are re-normalized.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig config);

  std::string id() const override { return "http:" + config_.model; }
  std::size_t dimension() const override { return config_.dimension; }

 protected:
  std::vector<Vector> do_embed(std::span<const std::string> texts) override;

 private:
  HttpEmbedderConfig config_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Cosine similarity; zero vectors give 0. Throws DimensionMismatch.
double cosine(std::span<const double> a, std::span<const double> b);

void normalize_in_place(Vector& v);

}  // namespace opmodel
