#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace darec {

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 1; prec < 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::stod(buf) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Flat `key = value` text with optional [section] headers; a section prefixes
// its keys as "section.key". '#' starts a comment. Order-preserving.
struct KeyValueFile {
    std::vector<std::pair<std::string, std::string>> entries;

    bool contains(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return true;
        return false;
    }

    const std::string* find(const std::string& key) const {
        const std::string* out = nullptr;
        for (const auto& [k, v] : entries)
            if (k == key) out = &v;  // last one wins
        return out;
    }

    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries)
            if (k == key) {
                v = value;
                return;
            }
        entries.emplace_back(key, value);
    }
};

namespace kv_detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace kv_detail

inline KeyValueFile parse_key_values(std::istream& is, const std::string& origin) {
    KeyValueFile out;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = kv_detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                         ": malformed section header");
            section = kv_detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
        std::string key = kv_detail::trim(line.substr(0, eq));
        std::string value = kv_detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        out.set(key, value);
    }
    return out;
}

inline KeyValueFile load_key_values(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    return parse_key_values(is, path);
}

inline void save_key_values(const KeyValueFile& kv, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write file: " + path);
    for (const auto& [k, v] : kv.entries) os << k << " = " << v << "\n";
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace darec
