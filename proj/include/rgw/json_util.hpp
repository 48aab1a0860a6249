#pragma once

#include <exception>
#include <initializer_list>
#include <type_traits>
#include <utility>
#include <string>

#include <json.hpp>

#include "rgw/errors.hpp"

namespace rgw {

/// Config problem tied to a location such as "sweep.eps_grid" or
/// "estimators[1].solver.restarts".
class ConfigError : public InputError {
 public:
  ConfigError(std::string path, const std::string& message)
      : InputError(path + ": " + message), path_(std::move(path)), message_(message) {}
  const std::string& path() const { return path_; }
  const std::string& message() const { return message_; }

 private:
  std::string path_;
  std::string message_;
};

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

/// Message of `e` without a leading "context: " prefix.
inline std::string bare_message(const std::exception& e) {
  const std::string m = e.what();
  const auto colon = m.find(": ");
  if (colon != std::string::npos && m.find(' ') > colon) return m.substr(colon + 2);
  return m;
}

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(join_path(path, item.key()), "unknown key");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  // nlohmann converts floats to integers and negatives to unsigned silently.
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned())) {
      throw ConfigError(join_path(path, key), std::is_unsigned_v<T> ? "expected a nonnegative integer"
                                                                     : "expected an integer");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(join_path(path, key), "expected a number");
  }
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(join_path(path, key), "has the wrong type");
  }
}

}  // namespace rgw
