// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace llambert {

enum class ErrorKind {
  kUsage,    // bad arguments / configuration
  kData,     // malformed or inconsistent input data
  kIo,       // filesystem failures
  kNumeric,  // divergence, non-finite values
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

/// Binary label as an index into a task's label_names pair. Index 1 is the
/// positive class for metrics.
enum class Label : std::uint8_t { kNegative = 0, kPositive = 1 };

inline Label opposite(Label l) {
  return l == Label::kPositive ? Label::kNegative : Label::kPositive;
}
inline std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }

using LabelNames = std::array<std::string, 2>;

/// Resolves a label string against the pair; throws kData when it is neither.
Label label_from_name(const LabelNames& names, std::string_view name);
const std::string& label_name(const LabelNames& names, Label l);

// 64-bit FNV-1a.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t v);

/// Digest of a file's bytes (FNV-1a 64, hex). Used in run manifests.
std::string file_digest(const std::filesystem::path& path);

/// Seeded generator used for every stochastic operation. The engine's output
/// sequence is fixed by the standard; `below` avoids the distribution classes,
/// whose algorithms vary across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent seed for a (seed, key) pair, e.g. per document.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// Partial Fisher-Yates: returns `k` distinct indices drawn from [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng);

std::string trim(std::string_view s);
std::string ascii_lower(std::string_view s);

/// Truncates `s` to at most `max_bytes` without splitting a UTF-8 sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Reads a file as lines; a trailing newline does not produce an empty line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

const char* version_string();

}  // namespace llambert
