#include "opmodel/hrag.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "opmodel/error.hpp"
#include "opmodel/prompts.hpp"
#include "opmodel/reply_parsing.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

namespace {

constexpr std::size_t kEmbedBatch = 10;

bool skipped_line(std::string_view line) {
  return line.empty() || line.starts_with("#") || line.starts_with("<!--") || line.starts_with("```");
}

std::optional<double> finite_number(const Json& v) {
  double d = 0.0;
  if (v.is_number()) {
    d = v.get<double>();
  } else if (v.is_string()) {
    const auto s = std::string(text::trim(v.get<std::string>()));
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(d)) return std::nullopt;
  return d;
}

std::optional<std::string> nonempty_string(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  auto s = it->get<std::string>();
  if (text::trim(s).empty()) return std::nullopt;
  return s;
}

std::string metadata_or_general(const Json& obj, const char* key) {
  auto s = nonempty_string(obj, key);
  return s ? *s : "general";
}

std::filesystem::path cache_file(const std::filesystem::path& dir, std::uint64_t hash, const std::string& embedder) {
  return dir / ("library-" + text::hex64(hash) + "-" + text::hex64(text::fnv1a64(embedder)) + ".json");
}

std::optional<std::vector<Vector>> read_cache(const std::filesystem::path& file, std::size_t count, std::size_t dim,
                                              const std::string& embedder) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    const auto j = Json::parse(in);
    if (j.at("embedder").get<std::string>() != embedder || j.at("dimension").get<std::size_t>() != dim) {
      return std::nullopt;
    }
    auto vecs = j.at("vectors").get<std::vector<Vector>>();
    if (vecs.size() != count) return std::nullopt;
    for (const auto& v : vecs) {
      if (v.size() != dim) return std::nullopt;
    }
    return vecs;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_cache(const std::filesystem::path& file, std::uint64_t hash, const std::string& embedder, std::size_t dim,
                 const std::vector<Vector>& vecs) {
  std::filesystem::create_directories(file.parent_path());
  Json j = Json::object();
  j["embedder"] = embedder;
  j["dimension"] = dim;
  j["content_hash"] = text::hex64(hash);
  j["vectors"] = vecs;
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write vector cache '" + tmp + "'");
    out << j.dump();
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace

void MmrParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::InvalidArgument, "lambda must lie in [0, 1]");
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (fetch_k < k) throw Error(Errc::InvalidArgument, "fetch_k must be at least k");
}

void to_json(Json& j, const MmrParams& v) {
  j = Json::object();
  j["lambda"] = v.lambda;
  j["k"] = v.k;
  j["fetch_k"] = v.fetch_k;
}

std::vector<std::size_t> mmr_select(std::span<const double> query, std::span<const Vector> candidates,
                                    const MmrParams& params) {
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) throw Error(Errc::InvalidArgument, "lambda must lie in [0, 1]");
  const std::size_t n = candidates.size();
  const std::size_t want = std::min(params.k, n);
  std::vector<double> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = cosine(query, candidates[i]);

  std::vector<std::size_t> selected;
  std::vector<bool> taken(n, false);
  std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
  while (selected.size() < want) {
    std::size_t best = n;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double score =
          selected.empty() ? rel[i] : params.lambda * rel[i] - (1.0 - params.lambda) * max_sim[i];
      if (best == n || score > best_score) {
        best = i;
        best_score = score;
      }
    }
    taken[best] = true;
    selected.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) max_sim[i] = std::max(max_sim[i], cosine(candidates[i], candidates[best]));
    }
  }
  return selected;
}

// ---------------------------------------------------------------------------
// Library files

std::vector<Exemplar> load_library(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read library '" + path.string() + "'");
  std::vector<Exemplar> out;
  std::string raw;
  std::int64_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (skipped_line(line)) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error&) {
      continue;
    }
    if (!j.is_object()) continue;
    auto prompt = nonempty_string(j, "prompt");
    auto response = nonempty_string(j, "response");
    auto answer_it = j.find("en_answer");
    if (!prompt || !response || answer_it == j.end()) continue;
    auto answer = finite_number(*answer_it);
    if (!answer) continue;
    Exemplar ex;
    ex.prompt = std::move(*prompt);
    ex.response = std::move(*response);
    ex.answer = *answer;
    ex.problem_type = metadata_or_general(j, "problem_type");
    ex.problem_subtype = metadata_or_general(j, "problem_subtype");
    ex.source_line = line_no;
    ex.source_path = path.string();
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw Error(Errc::EmptyLibrary, "library '" + path.string() + "' has no valid records");
  return out;
}

Json library_record(const Exemplar& ex) {
  Json j = Json::object();
  j["en_answer"] = ex.answer;
  j["prompt"] = ex.prompt;
  j["response"] = ex.response;
  j["problem_type"] = ex.problem_type;
  j["problem_subtype"] = ex.problem_subtype;
  return j;
}

void write_library(const std::filesystem::path& path, std::span<const Exemplar> exemplars) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write library '" + path.string() + "'");
  for (const auto& ex : exemplars) out << dump_json(library_record(ex)) << '\n';
  if (!out) throw Error(Errc::IoError, "write to '" + path.string() + "' failed");
}

std::uint64_t library_content_hash(std::span<const Exemplar> exemplars) {
  std::uint64_t h = text::fnv1a64("");
  for (const auto& ex : exemplars) h = text::fnv1a64(dump_json(library_record(ex)) + "\n", h);
  return h;
}

Library Library::build(std::vector<Exemplar> exemplars, Embedder& embedder,
                       const std::optional<std::filesystem::path>& cache_dir) {
  if (exemplars.empty()) throw Error(Errc::EmptyLibrary, "cannot index an empty library");
  Library lib;
  lib.exemplars_ = std::move(exemplars);
  lib.dimension_ = embedder.dimension();
  lib.embedder_id_ = embedder.id();
  lib.content_hash_ = library_content_hash(lib.exemplars_);

  std::optional<std::filesystem::path> file;
  if (cache_dir) {
    file = cache_file(*cache_dir, lib.content_hash_, lib.embedder_id_);
    if (auto cached = read_cache(*file, lib.exemplars_.size(), lib.dimension_, lib.embedder_id_)) {
      lib.vectors_ = std::move(*cached);
      return lib;
    }
  }
  lib.vectors_.reserve(lib.exemplars_.size());
  for (std::size_t start = 0; start < lib.exemplars_.size(); start += kEmbedBatch) {
    const auto end = std::min(start + kEmbedBatch, lib.exemplars_.size());
    std::vector<std::string> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(lib.exemplars_[i].prompt);
    for (auto& v : embedder.embed(batch)) lib.vectors_.push_back(std::move(v));
  }
  if (file) write_cache(*file, lib.content_hash_, lib.embedder_id_, lib.dimension_, lib.vectors_);
  return lib;
}

// ---------------------------------------------------------------------------
// Retrieval

std::optional<std::string> type_hint_from_advisory(const Advisory& advisory) {
  for (const auto& ins : advisory.insights) {
    if (ins.category != InsightCategory::ProblemEssence) continue;
    const auto t = " " + text::to_lower(ins.insight) + " ";
    const auto has = [&](std::string_view w) { return t.find(w) != std::string::npos; };
    if (has("mixed-integer") || has("mixed integer") || has("milp")) return "MILP";
    if (has("nonlinear") || has("non-linear") || has("quadratic") || has(" nlp")) return "NLP";
    if (has("integer program") || has("integer linear") || has(" ip ") || has(" ilp")) return "IP";
    if (has("linear program") || has(" lp ") || has(" lp.") || has(" lp,")) return "LP";
    return std::nullopt;
  }
  return std::nullopt;
}

bool type_matches(std::string_view problem_type, std::string_view hint) {
  const auto type = text::to_lower(text::trim(problem_type));
  const auto h = text::to_lower(text::trim(hint));
  if (h.empty()) return false;
  if (type == h) return true;
  const auto open = type.rfind('(');
  const auto close = type.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open) return false;
  return text::trim(std::string_view(type).substr(open + 1, close - open - 1)) == h;
}

std::vector<std::size_t> coarse_indices(const Library& library, Embedder& embedder, std::string_view query_text,
                                        const MmrParams& params, const std::optional<std::string>& type_hint) {
  params.validate();
  if (library.size() == 0) throw Error(Errc::EmptyLibrary, "library is empty");
  const std::vector<std::string> q{std::string(query_text)};
  const auto qvec = embedder.embed(q).front();
  if (qvec.size() != library.dimension()) {
    throw Error(Errc::DimensionMismatch, "query embedding dimension differs from the library index");
  }

  const auto& vecs = library.vectors();
  std::vector<double> rel(vecs.size());
  for (std::size_t i = 0; i < vecs.size(); ++i) rel[i] = cosine(qvec, vecs[i]);
  std::vector<std::size_t> order(vecs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rel[a] > rel[b]; });
  order.resize(std::min(params.fetch_k, order.size()));

  std::vector<Vector> pool;
  pool.reserve(order.size());
  for (auto i : order) pool.push_back(vecs[i]);
  std::vector<std::size_t> picked;
  for (auto p : mmr_select(qvec, pool, params)) picked.push_back(order[p]);

  if (type_hint) {
    std::vector<std::size_t> gated;
    for (auto i : picked) {
      if (type_matches(library.exemplars()[i].problem_type, *type_hint)) gated.push_back(i);
    }
    if (!gated.empty()) return gated;
  }
  return picked;
}

std::vector<Exemplar> coarse_retrieve(const Library& library, Embedder& embedder, const Task& query,
                                      const MmrParams& params, const std::optional<std::string>& type_hint) {
  std::vector<Exemplar> out;
  for (auto i : coarse_indices(library, embedder, query.text, params, type_hint)) out.push_back(library.exemplars()[i]);
  return out;
}

std::string render_candidates(std::span<const Exemplar> candidates, RetrievalKind kind) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& ex = candidates[i];
    const auto parts = reply::split_exemplar_response(ex.response);
    Json j = Json::object();
    j["problem_type"] = ex.problem_type;
    j["problem_subtype"] = ex.problem_subtype;
    j["Problem description"] = ex.prompt;
    if (parts.model) {
      j["Mathematical Model"] = *parts.model;
    } else {
      j["Mathematical Model"] = parts.model_text;
    }
    if (kind == RetrievalKind::Code) j["Code"] = parts.code;
    out += "Candidate " + std::to_string(i) + ":\n" + dump_json(j, 2) + "\n";
  }
  return out;
}

RetrievedSet rerank(const Agents& agents, const Task& task, std::string_view query_text,
                    std::span<const Exemplar> candidates, RetrievalKind kind, std::size_t cap, CallRecord& rec) {
  cap = std::min(cap, RetrievedSet::kMaxItems);
  if (candidates.empty() || cap == 0) return RetrievedSet::empty(kind);
  const auto role = kind == RetrievalKind::Modeling ? role::kRerankModeling : role::kRerankCode;
  const auto reply = agents.ask(role, task,
                                {{"problem_description", std::string(query_text)},
                                 {"retrieval_kind", std::string(to_string(kind))},
                                 {"candidates_text", render_candidates(candidates, kind)}},
                                rec);
  std::vector<std::size_t> picks;
  try {
    picks = reply::parse_rerank_selection(reply, candidates.size());
  } catch (const Error& e) {
    if (e.code() != Errc::ReplyParseError) throw;
    return RetrievedSet::empty(kind);
  }
  if (picks.empty()) return RetrievedSet::empty(kind);
  RetrievedSet out{kind, {}, false};
  for (auto i : picks) {
    if (out.items.size() == cap) break;
    out.items.push_back(candidates[i]);
  }
  return out;
}

}  // namespace opmodel
