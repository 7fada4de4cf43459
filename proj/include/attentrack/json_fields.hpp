// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "attentrack/error.hpp"

namespace attentrack {

/// Reads optional fields from a JSON object into typed values. Errors carry
/// the dotted path of the offending field; `finish()` rejects unknown keys.
class FieldReader {
public:
    FieldReader(const nlohmann::json& object, std::string path)
        : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    const std::string& path() const noexcept { return path_; }
    std::string child(const std::string& key) const { return path_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return object_.contains(key);
    }

    const nlohmann::json& at(const std::string& key) {
        seen_.insert(key);
        return object_.at(key);
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (!has(key)) {
            return;
        }
        out = convert<T>(object_.at(key), child(key));
    }

    template <typename T, std::size_t N>
    void read(const std::string& key, std::array<T, N>& out) {
        if (!has(key)) {
            return;
        }
        const auto& value = object_.at(key);
        if (!value.is_array() || value.size() != N) {
            throw ConfigError(child(key) + ": expected an array of " + std::to_string(N) +
                              " values");
        }
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = convert<T>(value[i], child(key) + "[" + std::to_string(i) + "]");
        }
    }

    void finish() const {
        for (const auto& item : object_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError(child(item.key()) + ": unknown field");
            }
        }
    }

    template <typename T>
    static T convert(const nlohmann::json& value, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) {
                throw ConfigError(where + ": expected a boolean");
            }
            return value.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!value.is_number_integer() ||
                (std::is_unsigned_v<T> && value.is_number_integer() && !value.is_number_unsigned() &&
                 value.get<std::int64_t>() < 0)) {
                throw ConfigError(where + ": expected a " +
                                  (std::is_unsigned_v<T> ? "non-negative " : "") + "integer");
            }
            return value.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!value.is_number()) {
                throw ConfigError(where + ": expected a number");
            }
            return value.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!value.is_string()) {
                throw ConfigError(where + ": expected a string");
            }
            return value.get<std::string>();
        } else {
            static_assert(sizeof(T) == 0, "unsupported field type");
        }
    }

private:
    const nlohmann::json& object_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace attentrack
