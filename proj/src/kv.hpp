#pragma once

// Flat `key=value` text files: one pair per line, '#' starts a comment line,
// surrounding blanks are trimmed.

#include "swarch/errors.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

namespace swarch::kv {

using Table = std::map<std::string, std::string>;

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    Table out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto v = trim(line);
        if (v.empty() || v.front() == '#') continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(v.substr(0, eq));
        if (key.empty()) throw DataError(path + ":" + std::to_string(line_no) + ": empty key");
        out[std::string(key)] = std::string(trim(v.substr(eq + 1)));
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw DataError("key '" + key + "': not a number: '" + value + "'");
    }
    return v;
}

inline long to_long(const std::string& key, const std::string& value) {
    long v = 0;
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw DataError("key '" + key + "': not an integer: '" + value + "'");
    }
    return v;
}

inline const std::string& require(const Table& t, const std::string& key) {
    const auto it = t.find(key);
    if (it == t.end()) throw DataError("missing key '" + key + "'");
    return it->second;
}

}  // namespace swarch::kv
