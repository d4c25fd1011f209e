#include "refine_loop/llm/registry.hpp"

#include "refine_loop/core/error.hpp"
#include "refine_loop/llm/http_backend.hpp"
#include "refine_loop/llm/scripted_backend.hpp"

namespace refine_loop {

void BackendRegistry::add(BackendPtr backend) {
  const std::string id = backend->id();
  add(id, std::move(backend));
}

void BackendRegistry::add(std::string id, BackendPtr backend) { backends_[std::move(id)] = std::move(backend); }

bool BackendRegistry::contains(std::string_view id) const { return backends_.find(id) != backends_.end(); }

BackendPtr BackendRegistry::get(std::string_view id) const {
  const auto it = backends_.find(id);
  if (it == backends_.end()) raise(ErrorKind::InvalidConfig, "unknown backend '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> BackendRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, backend] : backends_) out.push_back(id);
  return out;
}

BackendRegistry registry_from_json(const nlohmann::json& backends, const std::filesystem::path& base_dir) {
  BackendRegistry registry;
  if (backends.is_null()) return registry;
  if (!backends.is_object()) raise(ErrorKind::InvalidConfig, "'backends' must be an object");
  for (const auto& [id, spec] : backends.items()) {
    const std::string kind = spec.value("kind", std::string());
    if (kind == "scripted") {
      std::filesystem::path script = spec.at("script").get<std::string>();
      if (script.is_relative()) script = base_dir / script;
      auto scripted = load_scripted_backend(script);
      registry.add(id, std::move(scripted));
    } else if (kind == "http") {
      HttpBackendConfig config;
      config.id = id;
      config.base_url = spec.at("base_url").get<std::string>();
      config.model = spec.value("model", std::string());
      config.api_key_env = spec.value("api_key_env", config.api_key_env);
      config.reasoning_field = spec.value("reasoning_field", config.reasoning_field);
      config.timeout_ms = spec.value("timeout_ms", config.timeout_ms);
      registry.add(id, std::make_shared<HttpBackend>(std::move(config)));
    } else {
      raise(ErrorKind::InvalidConfig, "backend '" + id + "' has unknown kind '" + kind + "'");
    }
  }
  return registry;
}

}  // namespace refine_loop
