#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "qbp/io.hpp"

namespace qbp::cli {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_num(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "': not a number: '" + value + "'");
  }
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

Config Config::from_text(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected key=value: '" + t +
                       "'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_num(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_num(key, it->second);
}

int Config::get_int(const std::string& key, int fallback) const {
  const double v = get_num(key, static_cast<double>(fallback));
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw UsageError("config key '" + key + "': expected an integer");
  return i;
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "': not an unsigned integer: '" + it->second + "'");
  }
}

bool Config::get_flag(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw UsageError("config key '" + key + "': expected 0/1/true/false, got '" + v + "'");
}

std::vector<double> Config::get_list(const std::string& key) const {
  auto it = values_.find(key);
  std::vector<double> out;
  if (it == values_.end()) return out;
  std::istringstream is(it->second);
  std::string item;
  while (std::getline(is, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw UsageError("config key '" + key + "': empty list element");
    out.push_back(parse_num(key, t));
  }
  return out;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) throw UsageError("unknown config key(s): " + unknown);
}

}  // namespace qbp::cli
