// SPDX-License-Identifier: Apache-2.0

#include "core/prompt.hpp"

#include <cctype>
#include <sstream>

namespace llambert {

namespace {

constexpr std::string_view kImdbSystem = "Please answer with 'positive' or 'negative' only!";
constexpr std::string_view kImdbUser =
    "Decide if the following movie review is positive or negative: \n"
    "{document}\n"
    "If the movie review is positive please answer 'positive',\n"
    "if the movie review is negative please answer 'negative'.\n"
    "Make your decision based on the whole text.";

constexpr std::string_view kUmlsSystem = "Please answer with a 'yes' or a 'no' only!";
constexpr std::string_view kUmlsUser =
    "Decide if the term: {document}\n"
    "is related to the human nervous system.\n"
    "Exclude the only vascular structures,\n"
    "even if connected to the nervous system.\n"
    "If multiple examples or terms with multiple words are given,\n"
    "treat them all as a whole and make your decision based on that.";

bool is_strip_char(unsigned char c) { return std::isspace(c) || std::ispunct(c); }

std::string fill_template(const std::string& tmpl, std::string_view slot) {
  std::string out = tmpl;
  const auto pos = out.find(kDocumentPlaceholder);
  out.replace(pos, kDocumentPlaceholder.size(), slot);
  return out;
}

std::string llama2_block(const std::string& system, const std::string& user) {
  std::string s = "[INST] <<SYS>>\n";
  s += system;
  s += "\n<</SYS>>\n";
  s += user;
  s += "\n[/INST]";
  return s;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    std::string item = trim(s.substr(start, pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view wrapper_name(ChatWrapper w) {
  return w == ChatWrapper::kLlama2Inst ? "llama2-inst" : "plain-messages";
}

ChatWrapper wrapper_from_name(std::string_view name) {
  if (name == "llama2-inst") return ChatWrapper::kLlama2Inst;
  if (name == "plain-messages") return ChatWrapper::kPlainMessages;
  fail(ErrorKind::kUsage, "unknown chat wrapper '" + std::string(name) + "'");
}

std::string normalize_answer(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_strip_char(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && is_strip_char(static_cast<unsigned char>(text[e - 1]))) --e;
  return ascii_lower(text.substr(b, e - b));
}

void PromptSpec::validate() const {
  const auto first = user_template.find(kDocumentPlaceholder);
  if (first == std::string::npos) {
    fail(ErrorKind::kUsage, "prompt template for " + task_id + " lacks the {document} placeholder");
  }
  if (user_template.find(kDocumentPlaceholder, first + 1) != std::string::npos) {
    fail(ErrorKind::kUsage, "prompt template for " + task_id + " has more than one {document} placeholder");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    if (lexicon[i].empty()) {
      fail(ErrorKind::kUsage, "label lexicon has no surface strings for '" + label_names[i] + "'");
    }
    for (const auto& s : lexicon[i]) {
      if (normalize_answer(s).empty()) {
        fail(ErrorKind::kUsage, "label lexicon entry '" + s + "' is empty after normalization");
      }
    }
  }
  for (const auto& a : lexicon[0]) {
    for (const auto& b : lexicon[1]) {
      const std::string na = normalize_answer(a), nb = normalize_answer(b);
      if (na.find(nb) != std::string::npos || nb.find(na) != std::string::npos) {
        fail(ErrorKind::kUsage, "label lexicon entries '" + a + "' and '" + b + "' overlap");
      }
    }
  }
}

std::uint64_t PromptSpec::spec_hash() const {
  std::ostringstream s;
  s << task_id << '\x1f' << label_names[0] << '\x1f' << label_names[1] << '\x1f' << system_text
    << '\x1f' << user_template << '\x1f' << wrapper_name(wrapper) << '\x1f'
    << exemplar_char_budget << '\x1e';
  for (const auto& entries : lexicon) {
    for (const auto& e : entries) s << e << '\x1f';
    s << '\x1e';
  }
  for (const auto& ex : exemplars) {
    s << ex.doc_id << '\x1f' << ex.slot_text << '\x1f' << index_of(ex.label) << '\x1e';
  }
  return fnv1a64(s.str());
}

std::string document_slot(const Document& doc) {
  std::string slot = doc.text;
  for (const auto& syn : doc.synonyms) {
    slot += ';';
    slot += syn;
  }
  return slot;
}

std::string truncate_at_word(std::string_view text, std::size_t budget) {
  if (text.size() <= budget) return std::string(text);
  std::string cut = utf8_truncate(text, budget);
  // Only back off when the cut lands inside a word.
  if (!std::isspace(static_cast<unsigned char>(text[cut.size()]))) {
    const auto ws = cut.find_last_of(" \t\r\n");
    if (ws != std::string::npos && ws > 0) cut.resize(ws);
  }
  while (!cut.empty() && std::isspace(static_cast<unsigned char>(cut.back()))) cut.pop_back();
  return cut;
}

RenderedPrompt render(const PromptSpec& spec, const Document& doc) {
  spec.validate();
  const std::string slot = document_slot(doc);
  if (trim(slot).empty()) fail(ErrorKind::kData, "document " + doc.id + " has empty text");

  RenderedPrompt out;
  out.messages.push_back({"system", spec.system_text});
  for (const auto& ex : spec.exemplars) {
    const std::string user = fill_template(spec.user_template, ex.slot_text);
    const std::string& answer = spec.canonical_surface(ex.label);
    out.messages.push_back({"user", user});
    out.messages.push_back({"assistant", answer});
    out.flat_text += llama2_block(spec.system_text, user);
    out.flat_text += ' ';
    out.flat_text += answer;
    out.flat_text += '\n';
  }
  const std::string query = fill_template(spec.user_template, slot);
  out.messages.push_back({"user", query});
  out.flat_text += llama2_block(spec.system_text, query);

  std::uint64_t h = kFnvOffset;
  for (const auto& m : out.messages) {
    h = fnv1a64(m.role, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1e", h);
  }
  out.prompt_hash = h;
  return out;
}

std::vector<Label> default_composition(std::string_view task_id, std::size_t k) {
  const Label first = task_id == "umls" ? Label::kPositive : Label::kNegative;
  std::vector<Label> comp;
  for (std::size_t i = 0; i < k; ++i) comp.push_back(i % 2 == 0 ? first : opposite(first));
  return comp;
}

std::vector<Exemplar> select_exemplars(const Corpus& source, Split source_split,
                                       const std::vector<Label>& composition,
                                       const std::set<std::string>& exclude,
                                       std::size_t char_budget) {
  std::set<std::string> used;
  std::vector<Exemplar> out;
  for (Label want : composition) {
    bool found = false;
    for (const auto& [id, doc] : source.documents()) {
      if (doc.split != source_split || !doc.gold_label || *doc.gold_label != want) continue;
      if (exclude.count(id) || used.count(id)) continue;
      out.push_back({id, truncate_at_word(document_slot(doc), char_budget), want});
      used.insert(id);
      found = true;
      break;
    }
    if (!found) {
      fail(ErrorKind::kData, "not enough gold-labeled '" +
                                 label_name(source.label_names(), want) +
                                 "' exemplar candidates in split " +
                                 std::string(split_name(source_split)));
    }
  }
  return out;
}

PromptSpec imdb_base_spec() {
  PromptSpec s;
  s.task_id = "imdb";
  s.label_names = kImdbLabels;
  s.system_text = std::string(kImdbSystem);
  s.user_template = std::string(kImdbUser);
  s.lexicon = {std::vector<std::string>{"negative"}, std::vector<std::string>{"positive"}};
  return s;
}

PromptSpec umls_base_spec() {
  PromptSpec s;
  s.task_id = "umls";
  s.label_names = kUmlsLabels;
  s.system_text = std::string(kUmlsSystem);
  s.user_template = std::string(kUmlsUser);
  s.lexicon = {std::vector<std::string>{"no"}, std::vector<std::string>{"yes"}};
  return s;
}

PromptSpec default_imdb_spec(std::size_t k, const Corpus& exemplar_source, Split source_split,
                             const std::set<std::string>& exclude) {
  PromptSpec s = imdb_base_spec();
  s.exemplars = select_exemplars(exemplar_source, source_split, default_composition("imdb", k),
                                 exclude, s.exemplar_char_budget);
  s.validate();
  return s;
}

PromptSpec default_umls_spec(std::size_t k, const Corpus& exemplar_source, Split source_split,
                             const std::set<std::string>& exclude) {
  PromptSpec s = umls_base_spec();
  s.exemplars = select_exemplars(exemplar_source, source_split, default_composition("umls", k),
                                 exclude, s.exemplar_char_budget);
  s.validate();
  return s;
}

PromptSpec spec_from_config(const KvConfig& cfg) {
  const std::string task = cfg.get_or("task", "");
  PromptSpec s;
  if (task == "imdb") {
    s = imdb_base_spec();
  } else if (task == "umls") {
    s = umls_base_spec();
  } else {
    s.task_id = task.empty() ? cfg.get_or("task_id", "custom") : task;
  }
  if (auto v = cfg.get("task_id")) s.task_id = *v;
  if (auto v = cfg.get("label_names")) {
    auto names = split_list(*v, ',');
    if (names.size() != 2) fail(ErrorKind::kUsage, "label_names must list exactly two labels");
    s.label_names = {names[0], names[1]};
  }
  if (auto v = cfg.get("system_text")) s.system_text = *v;
  if (auto v = cfg.get("user_template")) s.user_template = *v;
  for (std::size_t i = 0; i < 2; ++i) {
    if (auto v = cfg.get("lexicon." + s.label_names[i])) s.lexicon[i] = split_list(*v, '|');
  }
  if (auto v = cfg.get("wrapper")) s.wrapper = wrapper_from_name(*v);
  const long long budget = cfg.get_int("exemplar_char_budget",
                                       static_cast<long long>(s.exemplar_char_budget));
  if (budget <= 0) fail(ErrorKind::kUsage, "exemplar_char_budget must be positive");
  s.exemplar_char_budget = static_cast<std::size_t>(budget);
  s.validate();
  return s;
}

std::vector<Label> composition_for(const KvConfig& cfg, const PromptSpec& spec, std::size_t k) {
  auto v = cfg.get("exemplar_composition");
  if (!v) return default_composition(spec.task_id, k);
  std::vector<Label> comp;
  for (const auto& name : split_list(*v, ',')) comp.push_back(label_from_name(spec.label_names, name));
  if (comp.size() != k) {
    fail(ErrorKind::kUsage, "exemplar_composition lists " + std::to_string(comp.size()) +
                                " labels but k = " + std::to_string(k));
  }
  return comp;
}

}  // namespace llambert
