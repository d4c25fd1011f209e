#include "refine_loop/agents/prompt.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"

namespace refine_loop {
namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls `on_text` for literal stretches and `on_name` for each placeholder.
template <typename OnText, typename OnName>
void scan(std::string_view text, OnText on_text, OnName on_name) {
  std::size_t cursor = 0;
  while (cursor < text.size()) {
    const std::size_t open = text.find("{{", cursor);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string_view name = text.substr(open + 2, close - open - 2);
    if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
      on_text(text.substr(cursor, open + 2 - cursor));
      cursor = open + 2;
      continue;
    }
    on_text(text.substr(cursor, open - cursor));
    on_name(name);
    cursor = close + 2;
  }
  on_text(text.substr(cursor));
}

std::string substitute(std::string_view text, const Bindings& bindings, AgentRole role) {
  std::string out;
  scan(
      text, [&out](std::string_view literal) { out += literal; },
      [&](std::string_view name) {
        const auto it = bindings.find(name);
        if (it == bindings.end()) {
          raise(ErrorKind::UnboundPlaceholder,
                "template '" + std::string(to_string(role)) + "' needs {{" + std::string(name) + "}}");
        }
        out += it->second;
      });
  return out;
}

}  // namespace

std::string_view to_string(AgentRole role) noexcept {
  switch (role) {
    case AgentRole::Draft: return "draft";
    case AgentRole::EvalAccuracy: return "eval_accuracy";
    case AgentRole::EvalCompleteness: return "eval_completeness";
    case AgentRole::EvalReadability: return "eval_readability";
    case AgentRole::Refine: return "refine";
    case AgentRole::Redundancy: return "redundancy";
    case AgentRole::Judge: return "judge";
    case AgentRole::JudgeCompare: return "judge_compare";
    case AgentRole::ErrorInjector: return "error_injector";
  }
  return "draft";
}

AgentRole parse_agent_role(std::string_view text) {
  for (AgentRole role : {AgentRole::Draft, AgentRole::EvalAccuracy, AgentRole::EvalCompleteness,
                         AgentRole::EvalReadability, AgentRole::Refine, AgentRole::Redundancy, AgentRole::Judge,
                         AgentRole::JudgeCompare, AgentRole::ErrorInjector}) {
    if (to_string(role) == text) return role;
  }
  raise(ErrorKind::InvalidValue, "unknown role_id '" + std::string(text) + "'");
}

AgentRole evaluator_role(Dimension dimension) noexcept {
  switch (dimension) {
    case Dimension::Accuracy: return AgentRole::EvalAccuracy;
    case Dimension::Completeness: return AgentRole::EvalCompleteness;
    case Dimension::Readability: return AgentRole::EvalReadability;
  }
  return AgentRole::EvalAccuracy;
}

std::set<std::string> placeholders(std::string_view text) {
  std::set<std::string> names;
  scan(
      text, [](std::string_view) {}, [&names](std::string_view name) { names.emplace(name); });
  return names;
}

RenderedPrompt render_prompt(const PromptTemplate& prompt, const Bindings& bindings) {
  RenderedPrompt rendered;
  rendered.system = substitute(prompt.system_text, bindings, prompt.role);
  for (std::size_t i = 0; i < prompt.icl_examples.size(); ++i) {
    rendered.user += "Example " + std::to_string(i + 1) + "\nInput:\n" + prompt.icl_examples[i].input +
                     "\nOutput:\n" + prompt.icl_examples[i].output + "\n\n";
  }
  rendered.user += substitute(prompt.user_text, bindings, prompt.role);
  return rendered;
}

PromptTemplate parse_template(std::string_view document) {
  PromptTemplate prompt;
  try {
    const auto object = nlohmann::json::parse(document);
    prompt.role = parse_agent_role(object.at("role_id").get<std::string>());
    prompt.version = object.value("version", std::string("v1"));
    prompt.system_text = object.value("system", std::string());
    prompt.user_text = object.value("user", std::string());
    for (const auto& example : object.value("icl_examples", nlohmann::json::array())) {
      prompt.icl_examples.push_back({example.at("input").get<std::string>(), example.at("output").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::MalformedRecord, std::string("prompt template: ") + e.what());
  }
  return prompt;
}

PromptTemplate load_template(const std::filesystem::path& path) { return parse_template(read_file(path)); }

PromptLibrary PromptLibrary::load_directory(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    raise(ErrorKind::Io, "prompt directory not found: " + directory.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  PromptLibrary library;
  for (const auto& file : files) {
    std::string name = file.stem().string();
    // "eval_accuracy@v2.json" registers another version of eval_accuracy.
    if (const auto at = name.find('@'); at != std::string::npos) name.resize(at);
    library.add(std::move(name), load_template(file));
  }
  return library;
}

void PromptLibrary::add(std::string name, PromptTemplate prompt) {
  templates_[std::move(name)].push_back(std::move(prompt));
}

bool PromptLibrary::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const PromptTemplate& PromptLibrary::get(std::string_view name, std::string_view version) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) raise(ErrorKind::UnknownTemplate, "no prompt template named '" + std::string(name) + "'");
  if (version.empty()) return it->second.front();
  for (const PromptTemplate& prompt : it->second) {
    if (prompt.version == version) return prompt;
  }
  raise(ErrorKind::UnknownTemplate,
        "template '" + std::string(name) + "' has no version '" + std::string(version) + "'");
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, versions] : templates_) out.push_back(name);
  return out;
}

}  // namespace refine_loop
