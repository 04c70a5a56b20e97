// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace llambert {

/// Plain-text key/value configuration.
///
///   # comment
///   key = single line value
///   key <<TAG
///   verbatim lines, joined with '\n'
///   TAG
///
/// Single-line values are whitespace-trimmed; heredoc bodies are kept
/// byte-exact (no trailing newline). Later keys override earlier ones.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace llambert
