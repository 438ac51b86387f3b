#include "opmodel/reply_parsing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "opmodel/error.hpp"
#include "opmodel/text.hpp"

namespace opmodel::reply {

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(Errc::ReplyParseError, what); }

bool is_fence_tag(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '_' || c == '+' || c == '.' || c == '#' || c == '-';
  });
}

const Json* find_key_ci(const Json& obj, std::string_view key) {
  if (!obj.is_object()) return nullptr;
  if (auto it = obj.find(std::string(key)); it != obj.end()) return &*it;
  const auto want = text::to_lower(key);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (text::to_lower(it.key()) == want) return &it.value();
  }
  return nullptr;
}

/// Strings verbatim, anything else as compact JSON.
std::string value_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return dump_json(v);
}

std::string required_text(const Json& obj, std::string_view key, std::string_view what) {
  const Json* v = find_key_ci(obj, key);
  if (v == nullptr || v->is_null()) parse_error(std::string(what) + " is missing \"" + std::string(key) + "\"");
  auto s = value_text(*v);
  if (text::trim(s).empty()) parse_error(std::string(what) + " has an empty \"" + std::string(key) + "\"");
  return s;
}

}  // namespace

std::vector<std::string> fenced_blocks(std::string_view reply) {
  std::vector<std::string> blocks;
  constexpr std::string_view fence = "```";
  std::size_t pos = reply.find(fence);
  while (pos != std::string_view::npos) {
    std::size_t content_start = pos + fence.size();
    const auto eol = reply.find('\n', content_start);
    const auto info = reply.substr(content_start, eol == std::string_view::npos ? std::string_view::npos : eol - content_start);
    if (eol != std::string_view::npos && is_fence_tag(text::trim(info))) content_start = eol + 1;
    const auto close = reply.find(fence, content_start);
    if (close == std::string_view::npos) break;
    auto content = reply.substr(content_start, close - content_start);
    if (content.ends_with('\n')) content.remove_suffix(1);
    if (content.ends_with('\r')) content.remove_suffix(1);
    blocks.emplace_back(content);
    pos = reply.find(fence, close + fence.size());
  }
  return blocks;
}

Json parse_json_reply(std::string_view reply) {
  const auto body = text::trim(reply);
  std::string first_error;
  try {
    return Json::parse(body);
  } catch (const Json::parse_error& e) {
    first_error = e.what();
  }
  for (const auto& block : fenced_blocks(body)) {
    try {
      return Json::parse(text::trim(block));
    } catch (const Json::parse_error&) {
      break;
    }
  }
  parse_error("reply is not valid JSON (" + first_error + ")");
}

ParamSpec parse_param_spec(std::string_view reply) {
  const auto j = parse_json_reply(reply);
  if (!j.is_object()) parse_error("parameter reply must be a JSON object");
  ParamSpec spec;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (text::trim(it.key()).empty()) parse_error("parameter with an empty name");
    if (!it->is_object()) parse_error("parameter \"" + it.key() + "\" must map to {Type, Definition}");
    ParamEntry entry{required_text(*it, "Type", "parameter \"" + it.key() + "\""),
                     required_text(*it, "Definition", "parameter \"" + it.key() + "\"")};
    spec.entries.emplace_back(it.key(), std::move(entry));
  }
  return spec;
}

Advisory parse_advisory(std::string_view reply) {
  const auto j = parse_json_reply(reply);
  if (!j.is_array()) parse_error("advisory reply must be a JSON list");
  if (j.empty() || j.size() > 3) parse_error("advisory must hold 1 to 3 insights, got " + std::to_string(j.size()));
  Advisory adv;
  for (const auto& item : j) {
    if (!item.is_object()) parse_error("each insight must be an object");
    const auto name = required_text(item, "category", "insight");
    const auto cat = parse_insight_category(text::trim(name));
    if (!cat) {
      throw Error(Errc::CategoryError, "category \"" + name +
                                           "\" is not one of Domain Terminology, Problem Key Point, Problem Essence");
    }
    adv.insights.push_back({*cat, required_text(item, "insight", "insight")});
  }
  return adv;
}

MathModel math_model_from_json(const Json& j) {
  if (!j.is_object()) parse_error("model must be a JSON object with VARIABLES, CONSTRAINTS, OBJECTIVE");
  MathModel m;
  const Json* vars = find_key_ci(j, "VARIABLES");
  if (vars == nullptr) parse_error("model is missing \"VARIABLES\"");
  m.variables = value_text(*vars);
  const Json* cons = find_key_ci(j, "CONSTRAINTS");
  if (cons == nullptr) parse_error("model is missing \"CONSTRAINTS\"");
  if (cons->is_array()) {
    for (const auto& c : *cons) m.constraints.push_back(value_text(c));
  } else if (cons->is_string()) {
    if (!text::trim(cons->get<std::string>()).empty()) m.constraints.push_back(cons->get<std::string>());
  } else if (!cons->is_null()) {
    m.constraints.push_back(value_text(*cons));
  }
  m.objective = required_text(j, "OBJECTIVE", "model");
  if (m.constraints.empty() && !text::contains_ci(m.variables, "unconstrained")) {
    parse_error("model has no constraints but VARIABLES does not declare it unconstrained");
  }
  return m;
}

MathModel parse_math_model(std::string_view reply) { return math_model_from_json(parse_json_reply(reply)); }

std::string extract_code_block(std::string_view reply) {
  const auto blocks = fenced_blocks(reply);
  const std::string* best = nullptr;
  for (const auto& b : blocks) {
    if (text::trim(b).empty()) continue;
    if (best == nullptr || b.size() > best->size()) best = &b;
  }
  if (best == nullptr) throw Error(Errc::NoCodeBlock, "reply contains no fenced code block");
  return *best;
}

std::pair<std::string, std::string> split_revision_reply(std::string_view reply) {
  const auto first = reply.find(kSplitMarker);
  if (first == std::string_view::npos) throw Error(Errc::SplitFormatError, "reply has no <split> marker");
  if (reply.find(kSplitMarker, first + kSplitMarker.size()) != std::string_view::npos) {
    throw Error(Errc::SplitFormatError, "reply has more than one <split> marker");
  }
  return {std::string(text::trim(reply.substr(0, first))),
          std::string(text::trim(reply.substr(first + kSplitMarker.size())))};
}

RevisionTip parse_tip(std::string_view tip_text, TipKind kind) {
  const auto j = parse_json_reply(tip_text);
  if (!j.is_object()) parse_error("tip must be a JSON object");
  const bool modeling = kind == TipKind::Modeling;
  RevisionTip tip;
  tip.kind = kind;
  tip.scenario = required_text(j, "scenario", "tip");
  tip.error_statement = required_text(j, "error_statement", "tip");
  tip.correct_fragment = required_text(j, modeling ? "correct_component" : "correct_code_snippet", "tip");
  tip.incorrect_fragment = required_text(j, modeling ? "incorrect_model" : "incorrect_code_snippet", "tip");
  return tip;
}

std::string parse_code_payload(std::string_view payload) {
  if (!fenced_blocks(payload).empty()) return extract_code_block(payload);
  const auto body = text::trim(payload);
  try {
    const auto j = Json::parse(body);
    if (j.is_string() && !text::trim(j.get<std::string>()).empty()) return j.get<std::string>();
    if (j.is_object()) {
      for (std::string_view key : {"code", "corrected_code", "CORRECTED_CODE"}) {
        if (const Json* v = find_key_ci(j, key); v != nullptr && v->is_string()) return v->get<std::string>();
      }
    }
  } catch (const Json::parse_error&) {
  }
  if (body.empty()) parse_error("no corrected program after the <split> marker");
  return std::string(body);
}

Json tip_wire_json(const RevisionTip& tip) {
  const bool modeling = tip.kind == TipKind::Modeling;
  Json j = Json::object();
  j["tip_type"] = modeling ? "modeling" : "code";
  j["scenario"] = tip.scenario;
  j["error_statement"] = tip.error_statement;
  j[modeling ? "correct_component" : "correct_code_snippet"] = tip.correct_fragment;
  j[modeling ? "incorrect_model" : "incorrect_code_snippet"] = tip.incorrect_fragment;
  return j;
}

std::vector<std::size_t> parse_rerank_selection(std::string_view reply, std::size_t candidate_count) {
  const auto j = parse_json_reply(reply);
  if (!j.is_array()) parse_error("rerank reply must be a JSON list");
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  for (const auto& item : j) {
    const Json* idx = &item;
    if (item.is_object()) {
      idx = find_key_ci(item, "index");
      if (idx == nullptr) parse_error("rerank entry without \"index\"");
    }
    if (!idx->is_number_integer()) parse_error("rerank index must be an integer");
    const auto v = idx->get<long long>();
    if (v < 0 || static_cast<std::size_t>(v) >= candidate_count) {
      parse_error("rerank index " + std::to_string(v) + " out of range");
    }
    if (seen.insert(static_cast<std::size_t>(v)).second) out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

ExemplarParts split_exemplar_response(std::string_view response) {
  ExemplarParts parts;
  const auto blocks = fenced_blocks(response);
  const auto code_heading = response.find("Code");
  const auto model_heading = response.find("Mathematical Model");

  // The model is the first fenced block; the code is the first block after a
  // "Code" heading, or the second block.
  if (!blocks.empty()) {
    try {
      auto j = Json::parse(text::trim(blocks.front()));
      if (j.is_object()) parts.model = std::move(j);
    } catch (const Json::parse_error&) {
    }
    if (!parts.model) parts.model_text = blocks.front();
  }
  if (blocks.size() >= 2) {
    parts.code = blocks[1];
  } else if (blocks.size() == 1 && code_heading != std::string_view::npos &&
             (model_heading == std::string_view::npos || code_heading < model_heading)) {
    parts.code = blocks.front();
    parts.model.reset();
    parts.model_text.clear();
  }
  if (blocks.empty()) parts.model_text = std::string(text::trim(response));
  return parts;
}

}  // namespace opmodel::reply
