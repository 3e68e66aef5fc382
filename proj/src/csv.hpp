#pragma once

// Minimal CSV helpers shared by the file readers. No quoting support: every
// format in this project is plain comma-separated numbers, dates and flags.

#include "swarch/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace swarch::csv {

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.front() == ' ')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
        out.emplace_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Reads non-comment, non-blank lines; the first one must equal `header`.
class Reader {
public:
    Reader(const std::string& path, std::string_view header) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open file: " + path);
        std::vector<std::string> fields;
        if (!next(fields)) throw DataError(path + ": empty file, expected header '" + std::string(header) + "'");
        std::string joined;
        for (std::size_t k = 0; k < fields.size(); ++k) joined += (k ? "," : "") + fields[k];
        if (joined != header) {
            throw DataError(path + ": expected header '" + std::string(header) + "', got '" + joined + "'");
        }
        columns_ = fields.size();
    }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            std::string_view v(line);
            while (!v.empty() && (v.back() == '\r' || v.back() == ' ')) v.remove_suffix(1);
            if (v.empty() || v.front() == '#') continue;
            fields = split(v);
            if (columns_ != 0 && fields.size() != columns_) {
                throw DataError(where() + ": expected " + std::to_string(columns_) + " fields");
            }
            return true;
        }
        return false;
    }

    std::string where() const { return path_ + ":" + std::to_string(line_no_); }

    double number(const std::string& field) const {
        double v = 0.0;
        const auto* end = field.data() + field.size();
        const auto res = std::from_chars(field.data(), end, v);
        if (res.ec != std::errc{} || res.ptr != end) {
            throw DataError(where() + ": not a number: '" + field + "'");
        }
        return v;
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t columns_ = 0;
    long line_no_ = 0;
};

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    return out;
}

inline void write_comment(std::ostream& out, const std::string& comment) {
    if (!comment.empty()) out << "# " << comment << '\n';
}

}  // namespace swarch::csv
