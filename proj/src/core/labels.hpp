// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "core/common.hpp"
#include "core/corpus.hpp"

namespace llambert {

enum class LabelSource { kGold, kLlm, kNoise, kHuman, kModel };

std::string_view source_name(LabelSource s);
LabelSource source_from_name(std::string_view name);

struct LabelRecord {
  std::string doc_id;
  Label label = Label::kNegative;
  LabelSource source = LabelSource::kGold;
  std::string model;
  std::string prompt_hash;
  std::string raw_response_excerpt;

  bool operator==(const LabelRecord&) const = default;
};

/// Labels keyed by doc id plus the ids that could not be labeled. An id is
/// in exactly one of the two maps.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::string task_id, LabelNames label_names)
      : task_id_(std::move(task_id)), label_names_(std::move(label_names)) {}

  const std::string& task_id() const { return task_id_; }
  const LabelNames& label_names() const { return label_names_; }

  void add_record(LabelRecord rec);
  void add_discard(std::string doc_id, std::string reason);

  const std::map<std::string, LabelRecord, std::less<>>& records() const { return records_; }
  const std::map<std::string, std::string, std::less<>>& discards() const { return discards_; }
  const LabelRecord* find(std::string_view id) const;
  std::optional<Label> label_of(std::string_view id) const;

  std::size_t size() const { return records_.size(); }

  bool operator==(const LabelSet&) const = default;

 private:
  std::string task_id_;
  LabelNames label_names_;
  std::map<std::string, LabelRecord, std::less<>> records_;
  std::map<std::string, std::string, std::less<>> discards_;
};

/// Gold labels of `split` (all splits when nullopt); unlabeled docs skipped.
LabelSet gold_labelset(const Corpus& corpus, std::optional<Split> split = std::nullopt);

/// labels.jsonl {"doc_id","label","source","model","prompt_hash",
/// "raw_response_excerpt"} and discards.jsonl {"doc_id","reason"}, both in
/// ascending id order. An empty discards path skips that file.
void save_labelset(const LabelSet& set, const std::filesystem::path& labels_path,
                   const std::filesystem::path& discards_path);
LabelSet load_labelset(const std::filesystem::path& labels_path,
                       const std::filesystem::path& discards_path, std::string task_id,
                       LabelNames label_names);

}  // namespace llambert
