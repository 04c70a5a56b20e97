// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/common.hpp"

namespace llambert {

enum class Split { kTrain, kTest, kExtra, kUnsplit };

std::string_view split_name(Split s);
/// Throws kData for anything outside train/test/extra/unsplit.
Split split_from_name(std::string_view name);

struct Document {
  std::string id;
  std::string text;
  Split split = Split::kUnsplit;
  std::optional<Label> gold_label;
  /// Only populated for ontology concepts (UMLS rows).
  std::vector<std::string> synonyms;

  bool operator==(const Document&) const = default;
};

/// A task's documents keyed by id. Immutable once built; `add` is only used
/// during ingestion.
class Corpus {
 public:
  Corpus(std::string task_id, LabelNames label_names);

  const std::string& task_id() const { return task_id_; }
  const LabelNames& label_names() const { return label_names_; }

  /// Rejects duplicate ids and blank text.
  void add(Document doc);

  std::size_t size() const { return docs_.size(); }
  std::size_t split_size(Split s) const;
  const Document* find(std::string_view id) const;
  const Document& at(std::string_view id) const;

  /// Documents in ascending id order.
  const std::map<std::string, Document, std::less<>>& documents() const {
    return docs_;
  }
  /// Ids of one split, ascending.
  std::vector<std::string> ids_in(Split s) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::string task_id_;
  LabelNames label_names_;
  std::map<std::string, Document, std::less<>> docs_;
};

inline const LabelNames kImdbLabels{"negative", "positive"};
inline const LabelNames kUmlsLabels{"no", "yes"};

/// documents.jsonl: one {"id","text","split"?,"gold_label"?,"synonyms"?} per
/// line. Missing split means unsplit.
Corpus ingest_jsonl(const std::filesystem::path& path, std::string task_id,
                    LabelNames label_names);

/// Standard aclImdb layout: {train,test}/{pos,neg} and train/unsup.
Corpus ingest_imdb_dir(const std::filesystem::path& root);

/// concept_id <TAB> preferred_term [<TAB> syn1;syn2 [<TAB> yes|no]]
Corpus ingest_umls_tsv(const std::filesystem::path& path,
                       Split split = Split::kUnsplit);

/// n distinct ids drawn without replacement from `split`, returned ascending.
/// For n1 < n2 the smaller draw is not a prefix of the larger one.
std::vector<std::string> sample_subset(const Corpus& corpus, Split split,
                                       std::size_t n, std::uint64_t seed);

constexpr int kCorpusFormatVersion = 1;

/// Header line {"format","version","task_id","label_names"} then one
/// document per line.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace llambert
