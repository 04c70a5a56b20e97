// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic corpora for tests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "core/corpus.hpp"

namespace llambert::testing {

struct SyntheticSpec {
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  std::size_t n_extra = 5000;
  std::size_t min_tokens = 30;
  std::size_t max_tokens = 80;
  double sentiment_rate = 0.15;  // fraction of tokens drawn from a polar vocabulary
  double polarity_agree = 0.9;   // polar token matches the document label
  std::uint64_t seed = 20240321;
};

/// IMDb-shaped corpus (task "imdb", labels negative/positive). Every document,
/// including the extra split, carries a gold label so the mock oracle can
/// answer for it.
Corpus make_synthetic_corpus(const SyntheticSpec& spec = {});

/// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace llambert::testing
