#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctgest {

// Flat key-value config with [section] headers. Lines are `key = value`;
// '#' starts a comment ( ';' stays available as a list separator inside
// values, e.g. matrix rows); later duplicates win. Values are kept verbatim
// (trimmed) and converted on access so error messages can name the key.
class ConfigFile {
public:
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<config>") {
        ConfigFile cfg;
        std::istringstream in(text);
        std::string line, section;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string s = trim(strip_comment(line));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') {
                    throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                             ": unterminated section header");
                }
                section = trim(s.substr(1, s.size() - 2));
                cfg.sections_[section];  // materialize empty sections too
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                         ": expected 'key = value'");
            }
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (key.empty()) {
                throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
            }
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_text(buf.str(), path);
    }

    bool has_section(const std::string& section) const {
        return sections_.count(section) > 0;
    }
    bool has(const std::string& section, const std::string& key) const {
        const auto it = sections_.find(section);
        return it != sections_.end() && it->second.count(key) > 0;
    }
    std::vector<std::string> keys(const std::string& section) const {
        std::vector<std::string> out;
        const auto it = sections_.find(section);
        if (it != sections_.end()) {
            for (const auto& [k, v] : it->second) out.push_back(k);
        }
        return out;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback = {}) const {
        const std::string* v = find(section, key);
        return v ? *v : fallback;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const std::string* v = find(section, key);
        if (!v) return fallback;
        return to_double(*v, section, key);
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const {
        const std::string* v = find(section, key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const std::uint64_t out = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("trailing characters");
            return out;
        } catch (const std::exception&) {
            throw std::runtime_error(bad_value(section, key, *v, "unsigned integer"));
        }
    }

    std::size_t get_size(const std::string& section, const std::string& key,
                         std::size_t fallback) const {
        return static_cast<std::size_t>(get_u64(section, key, fallback));
    }

    // whitespace-separated numeric list
    std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        const std::string* v = find(section, key);
        if (!v) return out;
        std::istringstream ss(*v);
        std::string word;
        while (ss >> word) out.push_back(to_double(word, section, key));
        return out;
    }

    std::vector<std::string> get_word_list(const std::string& section,
                                           const std::string& key) const {
        std::vector<std::string> out;
        const std::string* v = find(section, key);
        if (!v) return out;
        std::istringstream ss(*v);
        std::string word;
        while (ss >> word) out.push_back(word);
        return out;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;

    const std::string* find(const std::string& section, const std::string& key) const {
        const auto it = sections_.find(section);
        if (it == sections_.end()) return nullptr;
        const auto kt = it->second.find(key);
        return kt == it->second.end() ? nullptr : &kt->second;
    }

    static std::string strip_comment(const std::string& s) {
        const auto pos = s.find('#');
        return pos == std::string::npos ? s : s.substr(0, pos);
    }
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static std::string bad_value(const std::string& section, const std::string& key,
                                 const std::string& value, const char* want) {
        return "config: [" + section + "] " + key + " = '" + value + "' is not a " + want;
    }
    static double to_double(const std::string& v, const std::string& section,
                            const std::string& key) {
        try {
            std::size_t pos = 0;
            const double out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing characters");
            return out;
        } catch (const std::exception&) {
            throw std::runtime_error(bad_value(section, key, v, "number"));
        }
    }
};

}  // namespace ctgest
