#pragma once

// Two-stage exemplar retrieval: embedding + MMR coarse filter with a
// non-destructive metadata gate, then an LLM rerank that keeps at most two.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opmodel/agents.hpp"
#include "opmodel/embedding.hpp"
#include "opmodel/types.hpp"

namespace opmodel {

struct MmrParams {
  double lambda = 0.5;
  std::size_t k = 3;
  std::size_t fetch_k = 10;

  /// Throws InvalidArgument unless 0 <= lambda <= 1 and 1 <= k <= fetch_k.
  void validate() const;
};

void to_json(Json& j, const MmrParams& v);

/// Greedy maximal marginal relevance over `candidates`. Returns positions into
/// `candidates` in selection order, min(k, size) of them. The first pick is the
/// most relevant candidate; ties go to the lower position.
std::vector<std::size_t> mmr_select(std::span<const double> query, std::span<const Vector> candidates,
                                    const MmrParams& params);

/// Reads a JSONL library. Blank lines and lines starting with "#", "<!--" or
/// "```" are skipped, as are lines that do not parse or lack prompt, response
/// or a finite en_answer. Throws IoError or EmptyLibrary.
std::vector<Exemplar> load_library(const std::filesystem::path& path);

/// The on-disk record: {en_answer, prompt, response, problem_type, problem_subtype}.
Json library_record(const Exemplar& ex);

/// Writes one record per line; load_library reads back the same content.
void write_library(const std::filesystem::path& path, std::span<const Exemplar> exemplars);

/// Exemplars plus one unit vector per exemplar (embedded from the prompt).
class Library {
 public:
  /// Embeds every prompt, or loads the vectors from `cache_dir` when a cache
  /// entry for (content hash, embedder id) exists. Throws EmptyLibrary.
  static Library build(std::vector<Exemplar> exemplars, Embedder& embedder,
                       const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

  const std::vector<Exemplar>& exemplars() const noexcept { return exemplars_; }
  const std::vector<Vector>& vectors() const noexcept { return vectors_; }
  std::size_t size() const noexcept { return exemplars_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& embedder_id() const noexcept { return embedder_id_; }
  std::uint64_t content_hash() const noexcept { return content_hash_; }

 private:
  std::vector<Exemplar> exemplars_;
  std::vector<Vector> vectors_;
  std::size_t dimension_ = 0;
  std::string embedder_id_;
  std::uint64_t content_hash_ = 0;
};

std::uint64_t library_content_hash(std::span<const Exemplar> exemplars);

/// "MILP", "IP", "NLP" or "LP" from keywords in the Problem Essence insight.
std::optional<std::string> type_hint_from_advisory(const Advisory& advisory);

/// Equality ignoring case, or the hint equals the parenthesized acronym in
/// the type ("Mixed-Integer Linear Programming (MILP)" matches "MILP").
bool type_matches(std::string_view problem_type, std::string_view hint);

/// Library positions of the coarse candidates for `query_text`: top fetch_k by
/// cosine, MMR down to k, then the metadata gate. Embeds the query once.
std::vector<std::size_t> coarse_indices(const Library& library, Embedder& embedder, std::string_view query_text,
                                        const MmrParams& params, const std::optional<std::string>& type_hint);

std::vector<Exemplar> coarse_retrieve(const Library& library, Embedder& embedder, const Task& query,
                                      const MmrParams& params, const std::optional<std::string>& type_hint);

/// Candidate list as shown to the reranker.
std::string render_candidates(std::span<const Exemplar> candidates, RetrievalKind kind);

/// One reranker call over `candidates`. Keeps the picks in reply order, capped
/// at `cap` (never above two). An unparseable reply or an empty pick yields
/// the empty signal; no call is made for zero candidates.
RetrievedSet rerank(const Agents& agents, const Task& task, std::string_view query_text,
                    std::span<const Exemplar> candidates, RetrievalKind kind, std::size_t cap, CallRecord& rec);

}  // namespace opmodel
