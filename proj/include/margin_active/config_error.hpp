#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace margin_active {

/// Invalid configuration; `path()` names the offending field, e.g.
/// "learners[1].lambda".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

template <typename T>
T require_field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto field_path = join_path(path, key);
  if (!j.is_object() || !j.contains(key)) throw ConfigError(field_path, "missing required field");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field_path, e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& key, T fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(join_path(path, key), e.what());
  }
}

}  // namespace margin_active
