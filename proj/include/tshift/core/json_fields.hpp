#pragma once

// Strict reading of JSON config objects: typed access with dotted field paths
// in error messages, and rejection of keys nobody asked for.

#include <set>
#include <type_traits>
#include <string>

#include "json.hpp"
#include "tshift/core/error.hpp"

namespace tshift {

class FieldReader {
public:
    FieldReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "must be an object");
    }

    std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return fallback;
        return convert<T>(*it, key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) throw ValidationError(path_of(key), "is required");
        return convert<T>(*it, key);
    }

    /// Raw sub-value, or nullptr when absent. Marks the key as consumed.
    const nlohmann::json* child(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    /// Throws on any key that was never read.
    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) throw ValidationError(path_of(key), "unknown field");
    }

private:
    template <typename T>
    T convert(const nlohmann::json& v, const std::string& key) const {
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer()) throw ValidationError(path_of(key), "must be an integer");
            if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
                v.get<long long>() < 0)
                throw ValidationError(path_of(key), "must be non-negative");
        }
        try {
            return v.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ValidationError(path_of(key), "has the wrong type");
        }
    }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace tshift
