// SPDX-License-Identifier: Apache-2.0

#include "core/kvconfig.hpp"

#include <charconv>

#include "core/common.hpp"

namespace llambert {

KvConfig KvConfig::parse(std::string_view text) {
  KvConfig cfg;
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      std::string line(text.substr(start, nl - start));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      if (nl == text.size()) break;
      start = nl + 1;
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = "config line " + std::to_string(i + 1) + ": ";
    const auto heredoc = t.find("<<");
    const auto eq = t.find('=');
    if (heredoc != std::string::npos && (eq == std::string::npos || heredoc < eq)) {
      std::string key = trim(t.substr(0, heredoc));
      std::string tag = trim(t.substr(heredoc + 2));
      if (key.empty() || tag.empty()) fail(ErrorKind::kUsage, where + "malformed heredoc");
      std::string body;
      bool closed = false;
      bool first = true;
      for (++i; i < lines.size(); ++i) {
        if (lines[i] == tag) {
          closed = true;
          break;
        }
        if (!first) body += '\n';
        body += lines[i];
        first = false;
      }
      if (!closed) fail(ErrorKind::kUsage, where + "unterminated heredoc '" + tag + "'");
      cfg.values_[key] = std::move(body);
      continue;
    }
    if (eq == std::string::npos) fail(ErrorKind::kUsage, where + "expected key = value");
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(ErrorKind::kUsage, where + "empty key");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

bool KvConfig::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::optional<std::string> KvConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::get_or(std::string_view key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

double KvConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    fail(ErrorKind::kUsage, "config key " + std::string(key) + ": not a number: " + *v);
  }
}

long long KvConfig::get_int(std::string_view key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    fail(ErrorKind::kUsage, "config key " + std::string(key) + ": not an integer: " + *v);
  }
  return out;
}

}  // namespace llambert
