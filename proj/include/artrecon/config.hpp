#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>

namespace artrecon {

/// Flat dotted-key configuration.
///
/// File syntax, one entry per line:
///
///     # comment
///     fusion.alpha = 0.97
///     input.image  = art/lady.png
///
/// Keys are case-sensitive; whitespace around keys and values is trimmed;
/// lines starting with '#' and blank lines are ignored. A key may appear
/// only once per file. Values set later through set() override file values.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Canonical "key = value" listing in key order.
  std::string dump() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace artrecon
