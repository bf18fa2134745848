#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "flg/errors.hpp"

namespace flg {

/// Reads optional keys from a JSON object section and rejects keys that
/// were never asked for.
class FieldReader {
public:
    FieldReader(const nlohmann::json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw ConfigError("section '" + section_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            it->get_to(out);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for '" + section_ + "." + key + "': " + e.what());
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key()))
                throw ConfigError("unknown key '" + section_ + "." + it.key() + "'");
        }
    }

private:
    const nlohmann::json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

}  // namespace flg
