#pragma once

// Minimal reader for the TOML subset used by config and scene files:
// [table], [[array.of.tables]], key = number | bool | "string" | [numbers],
// and '#' comments.

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dualglass/types.hpp"

namespace dualglass::toml {

using Value = std::variant<double, bool, std::string, std::vector<double>>;

struct Table {
  std::map<std::string, Value> values;
  std::map<std::string, int> lines;  ///< key -> source line

  bool has(const std::string& k) const { return values.count(k) != 0; }
};

struct Document {
  std::map<std::string, Table> tables;                ///< "" is the root table
  std::map<std::string, std::vector<Table>> arrays;   ///< [[name]] blocks
};

namespace detail {

inline std::string trim(std::string s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line)
{
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline double parse_number(const std::string& tok, int line)
{
  std::string t;
  for (char c : tok)
    if (c != '_') t.push_back(c);
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + tok + "'");
  return v;
}

inline Value parse_value(const std::string& raw, int line)
{
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    return s.substr(1, s.size() - 2);
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated array");
    std::vector<double> out;
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(parse_number(item, line));
    }
    return out;
  }
  return parse_number(s, line);
}

}  // namespace detail

inline Document parse(std::istream& in)
{
  Document doc;
  doc.tables[""];
  Table* current = &doc.tables[""];
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.rfind("[[", 0) == 0) {
      if (s.size() < 4 || s.substr(s.size() - 2) != "]]")
        throw ConfigError("line " + std::to_string(lineno) + ": malformed array-of-tables header");
      auto& arr = doc.arrays[detail::trim(s.substr(2, s.size() - 4))];
      arr.emplace_back();
      current = &arr.back();
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed table header");
      current = &doc.tables[detail::trim(s.substr(1, s.size() - 2))];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (current->has(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    current->values[key] = detail::parse_value(s.substr(eq + 1), lineno);
    current->lines[key] = lineno;
  }
  return doc;
}

inline Document parse_string(const std::string& text)
{
  std::istringstream in(text);
  return parse(in);
}

inline Document parse_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse(in);
}

inline double get_number(const Table& t, const std::string& key, const std::string& where)
{
  const auto& v = t.values.at(key);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError(where + "." + key + ": expected a number");
}

inline std::vector<double> get_array(const Table& t, const std::string& key, const std::string& where)
{
  const auto& v = t.values.at(key);
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  throw ConfigError(where + "." + key + ": expected an array of numbers");
}

inline std::string get_string(const Table& t, const std::string& key, const std::string& where)
{
  const auto& v = t.values.at(key);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(where + "." + key + ": expected a string");
}

}  // namespace dualglass::toml
