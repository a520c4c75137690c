#pragma once

// Flat key=value configuration with [section] headers. Keys are addressed
// as "section.key"; '#' and ';' start comments.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gridcast {

class Config {
public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  bool contains(std::string_view key) const { return values_.find(key) != values_.end(); }
  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  std::optional<double> get_double(std::string_view key) const;
  std::optional<long long> get_int(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;
  /// Comma-separated list; empty entries are dropped.
  std::vector<std::string> get_list(std::string_view key) const;

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return values_; }

  /// Throws naming the first key not in `known`. A known entry ending in ".*"
  /// admits every key with that prefix.
  void require_known(const std::set<std::string, std::less<>>& known) const;

private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace gridcast
