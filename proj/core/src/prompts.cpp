#include "opmodel/prompts.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "builtin_templates.hpp"
#include "opmodel/error.hpp"
#include "opmodel/text.hpp"

namespace opmodel {

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read template '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view source) {
  PromptTemplate t;
  std::string literal;
  std::set<std::string, std::less<>> seen;
  std::size_t i = 0;
  const auto fail = [&](std::string_view why) {
    throw Error(Errc::InvalidArgument, std::string(why) + " at offset " + std::to_string(i));
  };
  while (i < source.size()) {
    const char c = source[i];
    if (c == '{') {
      if (i + 1 < source.size() && source[i + 1] == '{') {
        literal.push_back('{');
        i += 2;
        continue;
      }
      std::size_t j = i + 1;
      if (j >= source.size() || !is_name_start(source[j])) fail("stray '{'");
      while (j < source.size() && is_name_char(source[j])) ++j;
      if (j >= source.size() || source[j] != '}') fail("unterminated placeholder");
      if (!literal.empty()) {
        t.segments_.push_back({false, std::move(literal)});
        literal.clear();
      }
      std::string name(source.substr(i + 1, j - i - 1));
      if (seen.insert(name).second) t.names_.push_back(name);
      t.segments_.push_back({true, std::move(name)});
      i = j + 1;
    } else if (c == '}') {
      if (i + 1 < source.size() && source[i + 1] == '}') {
        literal.push_back('}');
        i += 2;
        continue;
      }
      fail("stray '}'");
    } else {
      literal.push_back(c);
      ++i;
    }
  }
  if (!literal.empty()) t.segments_.push_back({false, std::move(literal)});
  return t;
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  std::string out;
  for (const auto& seg : segments_) {
    if (!seg.placeholder) {
      out += seg.text;
      continue;
    }
    auto it = bindings.find(seg.text);
    if (it == bindings.end()) throw Error(Errc::UnboundPlaceholder, "no binding for {" + seg.text + "}");
    out += it->second;
  }
  return out;
}

std::string strip_annotations(std::string_view source) {
  std::string out;
  std::size_t start = 0;
  while (start < source.size()) {
    auto nl = source.find('\n', start);
    const bool last = nl == std::string_view::npos;
    const auto line = source.substr(start, last ? std::string_view::npos : nl - start);
    if (!line.starts_with("##!")) {
      out.append(line);
      if (!last) out.push_back('\n');
    }
    if (last) break;
    start = nl + 1;
  }
  return out;
}

namespace {

AgentPrompt make_prompt(std::string_view role_src, std::string_view task_src) {
  const auto role_text = strip_annotations(role_src);
  return AgentPrompt{PromptTemplate::parse(text::trim(role_text)), PromptTemplate::parse(strip_annotations(task_src))};
}

}  // namespace

TemplateSet TemplateSet::builtin() {
  std::map<std::string, std::string, std::less<>> files;
  for (const auto& [name, body] : detail::builtin_template_files()) files.emplace(name, body);
  TemplateSet set;
  for (const auto& [name, body] : files) {
    constexpr std::string_view suffix = ".role.txt";
    if (!std::string_view(name).ends_with(suffix)) continue;
    const auto role = name.substr(0, name.size() - suffix.size());
    auto task = files.find(role + ".task.txt");
    if (task == files.end()) continue;
    set.prompts_.emplace(role, make_prompt(body, task->second));
  }
  return set;
}

TemplateSet TemplateSet::with_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(Errc::IoError, "templates directory '" + dir.string() + "' does not exist");
  }
  auto set = builtin();
  std::set<std::string> roles;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto file = entry.path().filename().string();
    for (std::string_view suffix : {".role.txt", ".task.txt"}) {
      if (std::string_view(file).ends_with(suffix)) roles.insert(file.substr(0, file.size() - suffix.size()));
    }
  }
  for (const auto& r : roles) {
    const auto role_path = dir / (r + ".role.txt");
    const auto task_path = dir / (r + ".task.txt");
    auto it = set.prompts_.find(r);
    std::string role_src;
    std::string task_src;
    if (std::filesystem::exists(role_path)) {
      role_src = read_file(role_path);
    } else if (it == set.prompts_.end()) {
      throw Error(Errc::IoError, "template '" + r + "' is missing " + role_path.filename().string());
    }
    if (std::filesystem::exists(task_path)) {
      task_src = read_file(task_path);
    } else if (it == set.prompts_.end()) {
      throw Error(Errc::IoError, "template '" + r + "' is missing " + task_path.filename().string());
    }
    AgentPrompt merged = it == set.prompts_.end() ? AgentPrompt{} : it->second;
    if (!role_src.empty()) merged.role_description = PromptTemplate::parse(text::trim(strip_annotations(role_src)));
    if (!task_src.empty()) merged.task = PromptTemplate::parse(strip_annotations(task_src));
    set.prompts_.insert_or_assign(r, std::move(merged));
  }
  return set;
}

const AgentPrompt& TemplateSet::get(std::string_view name) const {
  auto it = prompts_.find(name);
  if (it == prompts_.end()) throw Error(Errc::InvalidArgument, "no prompt template for role '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : prompts_) out.push_back(k);
  return out;
}

void TemplateSet::set(std::string name, AgentPrompt prompt) { prompts_.insert_or_assign(std::move(name), std::move(prompt)); }

}  // namespace opmodel
