// SPDX-License-Identifier: Apache-2.0

#include "core/common.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace llambert {

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

Label label_from_name(const LabelNames& names, std::string_view name) {
  if (name == names[0]) return Label::kNegative;
  if (name == names[1]) return Label::kPositive;
  fail(ErrorKind::kData, "unknown label '" + std::string(name) +
                             "' (expected '" + names[0] + "' or '" +
                             names[1] + "')");
}

const std::string& label_name(const LabelNames& names, Label l) {
  return names[index_of(l)];
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  return hex64(fnv1a64(read_file(path)));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) fail(ErrorKind::kUsage, "Rng::below: bound must be > 0");
  // Rejection sampling on the largest multiple of bound.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  std::uint64_t h = kFnvOffset;
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  h = fnv1a64(key, h);
  // splitmix64 finalizer to spread FNV's weak low bits.
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                        Rng& rng) {
  if (k > n) {
    fail(ErrorKind::kData, "cannot sample " + std::to_string(k) +
                               " items from " + std::to_string(n));
  }
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string utf8_truncate(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return std::string(s);
  std::size_t cut = max_bytes;
  // Back off continuation bytes (10xxxxxx).
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(s.substr(0, cut));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "error reading " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::kIo, "error writing " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::string all = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < all.size()) {
    std::size_t nl = all.find('\n', start);
    if (nl == std::string::npos) nl = all.size();
    std::string line = all.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

const char* version_string() { return "0.1.0"; }

}  // namespace llambert
