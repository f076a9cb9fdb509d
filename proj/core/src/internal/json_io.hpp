#pragma once

// Internal JSON plumbing shared by the config/json translation units.
// Not installed; public headers must not include this.

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include "mecsim/errors.hpp"

namespace mecsim::internal {

using Json = nlohmann::json;

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text, /*cb=*/nullptr, /*allow_exceptions=*/true,
                       /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

template <typename T>
void read_key(const Json& obj, const std::string& key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ConfigError("bad value for '" + key + "': " + e.what());
    }
  }
}

inline void check_known_keys(const Json& obj, const std::vector<std::string>& known,
                             const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
  }
}

}  // namespace mecsim::internal
