#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbp::cli {

/// Invalid command line or config contents (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value configuration. Lines are `key = value`; blank lines and
/// lines starting with '#' are ignored; later duplicates win.
class Config {
 public:
  static Config load(const std::string& path);      // IoError if unreadable
  static Config from_text(const std::string& text); // UsageError on bad lines

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;  // 0/1/true/false
  /// Comma-separated list of numbers; empty when the key is absent.
  std::vector<double> get_list(const std::string& key) const;

  /// Throws UsageError naming every key not in the allowed set.
  void require_known(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace qbp::cli
