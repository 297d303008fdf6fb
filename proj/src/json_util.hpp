#ifndef SLAFC_JSON_UTIL_HPP
#define SLAFC_JSON_UTIL_HPP

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "slafc/error.hpp"

namespace slafc {

using Json = nlohmann::json;

// Strict-config helpers: every object is checked against its allowed key set
// so typos in experiment files fail loudly instead of silently defaulting.

inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed,
                       const std::string& context) {
    if (!obj.is_object()) fail(Errc::ConfigError, context + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* name : allowed) {
            if (key == name) {
                known = true;
                break;
            }
        }
        if (!known) fail(Errc::ConfigError, context + ": unknown key '" + key + "'");
    }
}

inline Json parse_json(const std::string& text, const std::string& context) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) fail(Errc::ConfigError, context + ": invalid JSON");
    return j;
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(Errc::ConfigError, std::string("bad value for '") + key + "'");
    }
}

template <typename T>
T get_required(const Json& obj, const char* key, const std::string& context) {
    if (!obj.contains(key)) fail(Errc::ConfigError, context + ": missing key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(Errc::ConfigError, context + ": bad value for '" + key + "'");
    }
}

} // namespace slafc

#endif // SLAFC_JSON_UTIL_HPP
