// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "core/common.hpp"
#include "core/corpus.hpp"
#include "core/kvconfig.hpp"

namespace llambert {

inline constexpr std::string_view kDocumentPlaceholder = "{document}";
inline constexpr std::size_t kDefaultExemplarCharBudget = 2000;

enum class ChatWrapper {
  kLlama2Inst,     // backend receives flat_text as a single user turn
  kPlainMessages,  // backend receives the role/message list
};

std::string_view wrapper_name(ChatWrapper w);
ChatWrapper wrapper_from_name(std::string_view name);

struct Exemplar {
  std::string doc_id;
  std::string slot_text;  // already truncated to the exemplar budget
  Label label;
};

struct PromptSpec {
  std::string task_id;
  LabelNames label_names;
  std::string system_text;
  std::string user_template;
  /// Surface strings per label index; element 0 is the canonical answer.
  std::array<std::vector<std::string>, 2> lexicon;
  std::vector<Exemplar> exemplars;
  ChatWrapper wrapper = ChatWrapper::kPlainMessages;
  std::size_t exemplar_char_budget = kDefaultExemplarCharBudget;

  /// Placeholder exactly once, both lexicon entries present, and no surface
  /// string contained in one of the other label's after normalization.
  void validate() const;

  const std::string& canonical_surface(Label l) const { return lexicon[index_of(l)].front(); }

  /// Stable hash over every field that influences rendering.
  std::uint64_t spec_hash() const;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct RenderedPrompt {
  std::vector<ChatMessage> messages;
  std::string flat_text;
  std::uint64_t prompt_hash = 0;

  std::string hash_hex() const { return hex64(prompt_hash); }
};

/// Lowercases ASCII and strips leading/trailing whitespace and punctuation.
/// Shared by lexicon validation and response parsing.
std::string normalize_answer(std::string_view text);

/// Text substituted for the placeholder: the document text, followed by its
/// synonyms when present, all joined with ';'.
std::string document_slot(const Document& doc);

/// Cuts `text` to at most `budget` bytes, preferring the last whitespace
/// boundary before the cut.
std::string truncate_at_word(std::string_view text, std::size_t budget);

RenderedPrompt render(const PromptSpec& spec, const Document& doc);

/// Which label each exemplar slot carries for a k-shot prompt. IMDb: one
/// negative first, then alternating. UMLS: one positive first, then
/// alternating.
std::vector<Label> default_composition(std::string_view task_id, std::size_t k);

/// Picks exemplars from gold-labeled documents of `source_split` in
/// ascending id order, skipping `exclude`, to satisfy `composition`.
std::vector<Exemplar> select_exemplars(const Corpus& source, Split source_split,
                                       const std::vector<Label>& composition,
                                       const std::set<std::string>& exclude,
                                       std::size_t char_budget);

PromptSpec imdb_base_spec();
PromptSpec umls_base_spec();

PromptSpec default_imdb_spec(std::size_t k, const Corpus& exemplar_source,
                             Split source_split = Split::kTrain,
                             const std::set<std::string>& exclude = {});
PromptSpec default_umls_spec(std::size_t k, const Corpus& exemplar_source,
                             Split source_split = Split::kTrain,
                             const std::set<std::string>& exclude = {});

/// Builds a spec from config keys (task, system_text, user_template,
/// label_names, lexicon.<label>, wrapper, exemplar_char_budget,
/// exemplar_composition). A `task` of imdb/umls seeds the built-in
/// templates; other keys override. Exemplars are not filled in.
PromptSpec spec_from_config(const KvConfig& cfg);

/// `exemplar_composition = negative,positive` overrides the default policy;
/// its length must equal k.
std::vector<Label> composition_for(const KvConfig& cfg, const PromptSpec& spec, std::size_t k);

}  // namespace llambert
