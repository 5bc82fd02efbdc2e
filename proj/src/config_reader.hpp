#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

namespace rkd::detail {

using nlohmann::json;

// Walks one JSON object, reporting type errors and unknown keys by dotted path.
class Reader {
public:
    Reader(const json& j, std::string path, std::vector<std::string>& errors)
        : j_(j), path_(std::move(path)), errors_(errors) {
        if (!j_.is_object()) errors_.push_back(where("") + " must be an object");
    }
    ~Reader() {
        if (!j_.is_object()) return;
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) errors_.push_back("unknown key '" + where(key) + "'");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key) || j_[key].is_null()) return;
        const auto& v = j_[key];
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) return bad(key, "a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
                return bad(key, "a non-negative integer");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) return bad(key, "a number");
            out = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) return bad(key, "a string");
            out = v.get<std::string>();
        } else {
            if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); }))
                return bad(key, "a list of strings");
            out = v.get<T>();
        }
    }

    template <typename Fn>
    void child(const std::string& key, Fn&& fn) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key) || j_[key].is_null()) return;
        Reader sub(j_[key], where(key), errors_);
        fn(sub);
    }

    /// Marks `key` as known and returns it unparsed, or nullptr when absent.
    const json* raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key) || j_[key].is_null()) return nullptr;
        return &j_[key];
    }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
    std::string where(const std::string& key) const {
        if (path_.empty()) return key;
        return key.empty() ? path_ : path_ + "." + key;
    }
    void error(const std::string& msg) { errors_.push_back(msg); }

private:
    void bad(const std::string& key, const char* what) {
        errors_.push_back("'" + where(key) + "' must be " + what);
    }

    const json& j_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

}  // namespace rkd::detail
