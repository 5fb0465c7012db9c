#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fairsurv/common.hpp"

namespace fairsurv {

// Flat key-value config with INI-style sections. Keys are stored as
// "section.key"; '#' and ';' start comments. Values are trimmed strings.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    ConfigFile cfg;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string stripped = strip_comment(line);
      const std::string t = trim(stripped);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ParseError(path + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_double(it->second);
    } catch (const ParseError&) {
      throw ParseError("config key '" + key + "': cannot parse number from '" + it->second + "'");
    }
  }

  long get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double v = get_double(key, 0.0);
    return static_cast<long>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError("config key '" + key + "': expected boolean, got '" + v + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::string cur;
    for (char c : it->second) {
      if (c == ',') {
        const std::string t = trim(cur);
        if (!t.empty()) out.push_back(t);
        cur.clear();
      } else {
        cur += c;
      }
    }
    const std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    std::size_t pos = s.find_first_of("#;");
    return pos == std::string::npos ? s : s.substr(0, pos);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace fairsurv
