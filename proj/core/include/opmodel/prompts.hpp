#pragma once

// Prompt templates use `{name}` placeholders and `{{` / `}}` for literal
// braces. Rendering is strict: a placeholder without a binding is an error.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace opmodel {

using Bindings = std::map<std::string, std::string, std::less<>>;

class PromptTemplate {
 public:
  PromptTemplate() = default;

  /// Throws Errc::InvalidArgument on a stray brace or malformed placeholder.
  static PromptTemplate parse(std::string_view source);

  /// Throws Errc::UnboundPlaceholder naming the first missing binding.
  std::string render(const Bindings& bindings) const;

  /// Distinct placeholder names in first-appearance order.
  const std::vector<std::string>& placeholders() const noexcept { return names_; }

 private:
  struct Segment {
    bool placeholder = false;
    std::string text;  // literal text or placeholder name
  };
  std::vector<Segment> segments_;
  std::vector<std::string> names_;
};

struct AgentPrompt {
  PromptTemplate role_description;
  PromptTemplate task;
};

namespace role {
inline constexpr std::string_view kParamExtractor = "param_extractor";
inline constexpr std::string_view kModelingAdvisor = "modeling_advisor";
inline constexpr std::string_view kModelingExpert = "modeling_expert";
inline constexpr std::string_view kCodeExpert = "code_expert";
inline constexpr std::string_view kModelingRevision = "modeling_revision";
inline constexpr std::string_view kCodeRevision = "code_revision";
inline constexpr std::string_view kRerankModeling = "reranker_modeling";
inline constexpr std::string_view kRerankCode = "reranker_code";
inline constexpr std::string_view kLabeler = "labeler";
inline constexpr std::string_view kExecutor = "executor";
}  // namespace role

/// Role name -> prompt pair. Template files are `<name>.role.txt` and
/// `<name>.task.txt`; lines starting with `##!` are annotations and are
/// dropped at load time.
class TemplateSet {
 public:
  /// Templates compiled into the library.
  static TemplateSet builtin();

  /// Builtins overlaid with whatever files exist in `dir`.
  static TemplateSet with_overrides(const std::filesystem::path& dir);

  const AgentPrompt& get(std::string_view name) const;
  std::vector<std::string> names() const;

  void set(std::string name, AgentPrompt prompt);

 private:
  std::map<std::string, AgentPrompt, std::less<>> prompts_;
};

/// Removes `##!` annotation lines.
std::string strip_annotations(std::string_view source);

}  // namespace opmodel
