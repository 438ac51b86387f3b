#pragma once

// Strict parsers for agent replies. Each throws opmodel::Error with the
// failure class the agents surface (ReplyParseError, CategoryError,
// NoCodeBlock, SplitFormatError).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opmodel/types.hpp"

namespace opmodel::reply {

inline constexpr std::string_view kSplitMarker = "<split>";

/// Contents of every ``` fenced block, in order. An opening fence followed by
/// a bare language tag drops the tag; anything else on that line is content.
std::vector<std::string> fenced_blocks(std::string_view reply);

/// Parses the trimmed reply as JSON, falling back to the first fenced block.
Json parse_json_reply(std::string_view reply);

ParamSpec parse_param_spec(std::string_view reply);
Advisory parse_advisory(std::string_view reply);
MathModel parse_math_model(std::string_view reply);
MathModel math_model_from_json(const Json& j);

/// Longest fenced block; ties go to the earliest. Throws NoCodeBlock.
std::string extract_code_block(std::string_view reply);

/// Splits on the single `<split>` marker and trims both halves.
std::pair<std::string, std::string> split_revision_reply(std::string_view reply);

RevisionTip parse_tip(std::string_view tip_text, TipKind kind);

/// Corrected program after the marker: fenced block, JSON string, or raw text.
std::string parse_code_payload(std::string_view payload);

/// Tip rendered in the wire schema its agent emits.
Json tip_wire_json(const RevisionTip& tip);

/// Indices picked by the reranker, in reply order, deduplicated, bounded by
/// `candidate_count`. Throws ReplyParseError on anything else.
std::vector<std::size_t> parse_rerank_selection(std::string_view reply, std::size_t candidate_count);

/// Model and code pulled out of an exemplar's Markdown response.
struct ExemplarParts {
  std::optional<Json> model;  // parsed VARIABLES/CONSTRAINTS/OBJECTIVE object
  std::string model_text;     // raw model section when JSON parsing fails
  std::string code;
};

ExemplarParts split_exemplar_response(std::string_view response);

}  // namespace opmodel::reply
