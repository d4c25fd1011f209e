#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "refine_loop/core/model.hpp"

namespace refine_loop {

enum class AgentRole {
  Draft,
  EvalAccuracy,
  EvalCompleteness,
  EvalReadability,
  Refine,
  Redundancy,
  Judge,
  JudgeCompare,
  ErrorInjector,
};

std::string_view to_string(AgentRole role) noexcept;
AgentRole parse_agent_role(std::string_view text);
AgentRole evaluator_role(Dimension dimension) noexcept;

struct IclExample {
  std::string input;
  std::string output;
};

/// Prompt texts use {{name}} placeholders. In-context examples are literal.
struct PromptTemplate {
  AgentRole role = AgentRole::Draft;
  std::string version = "v1";
  std::string system_text;
  std::string user_text;
  std::vector<IclExample> icl_examples;
};

struct RenderedPrompt {
  std::string system;
  std::string user;

  bool operator==(const RenderedPrompt&) const = default;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

std::set<std::string> placeholders(std::string_view text);

/// Single-pass substitution of {{name}} placeholders; bound values are not
/// rescanned. In-context examples are rendered in order ahead of the task
/// input in the user text. Throws UnboundPlaceholder.
RenderedPrompt render_prompt(const PromptTemplate& prompt, const Bindings& bindings);

// {"role_id", "version", "system", "user", "icl_examples": [{"input", "output"}]}
PromptTemplate parse_template(std::string_view document);
PromptTemplate load_template(const std::filesystem::path& path);

/// Named templates, loaded from a directory of *.json files (the name is the
/// file stem). Several versions of one name may coexist.
class PromptLibrary {
 public:
  static PromptLibrary load_directory(const std::filesystem::path& directory);

  void add(std::string name, PromptTemplate prompt);
  bool contains(std::string_view name) const;
  // Empty version picks the first one registered. Throws UnknownTemplate.
  const PromptTemplate& get(std::string_view name, std::string_view version = {}) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::vector<PromptTemplate>, std::less<>> templates_;
};

}  // namespace refine_loop
