#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "landmark/errors.hpp"

namespace landmark::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        throw DataError("csv: missing required column '" + name + "'");
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Reads a comma-separated file with a header row. Lines starting with '#' are
// skipped (outputs of this project carry a config-hash comment line).
inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) throw DataError(path + ": empty file, no header row");
    return t;
}

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError(context + ": cannot parse number '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s, const std::string& context) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError(context + ": cannot parse integer '" + s + "'");
    return v;
}

// Shortest representation that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace landmark::csv
