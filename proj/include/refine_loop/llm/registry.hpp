#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "refine_loop/llm/gateway.hpp"

namespace refine_loop {

class BackendRegistry {
 public:
  void add(BackendPtr backend);
  void add(std::string id, BackendPtr backend);
  bool contains(std::string_view id) const;
  BackendPtr get(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, BackendPtr, std::less<>> backends_;
};

/// Builds backends from a config object keyed by backend id:
///   {"local": {"kind": "http", "base_url": "...", "model": "..."},
///    "fixture": {"kind": "scripted", "script": "path/to/script.json"}}
/// Relative script paths resolve against `base_dir`.
BackendRegistry registry_from_json(const nlohmann::json& backends, const std::filesystem::path& base_dir);

}  // namespace refine_loop
