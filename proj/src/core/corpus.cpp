// SPDX-License-Identifier: Apache-2.0

#include "core/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace llambert {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kExtra: return "extra";
    case Split::kUnsplit: return "unsplit";
  }
  return "unsplit";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  if (name == "extra") return Split::kExtra;
  if (name == "unsplit") return Split::kUnsplit;
  fail(ErrorKind::kData, "unknown split '" + std::string(name) + "'");
}

Corpus::Corpus(std::string task_id, LabelNames label_names)
    : task_id_(std::move(task_id)), label_names_(std::move(label_names)) {
  if (label_names_[0].empty() || label_names_[1].empty() ||
      label_names_[0] == label_names_[1]) {
    fail(ErrorKind::kUsage, "label_names must be two distinct non-empty names");
  }
}

void Corpus::add(Document doc) {
  if (doc.id.empty()) fail(ErrorKind::kData, "document with empty id");
  if (trim(doc.text).empty()) {
    fail(ErrorKind::kData, "document " + doc.id + " has blank text");
  }
  auto [it, inserted] = docs_.try_emplace(doc.id, std::move(doc));
  if (!inserted) fail(ErrorKind::kData, "duplicate document id " + it->first);
}

std::size_t Corpus::split_size(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(docs_.begin(), docs_.end(),
                    [s](const auto& kv) { return kv.second.split == s; }));
}

const Document* Corpus::find(std::string_view id) const {
  auto it = docs_.find(id);
  return it == docs_.end() ? nullptr : &it->second;
}

const Document& Corpus::at(std::string_view id) const {
  const Document* d = find(id);
  if (!d) fail(ErrorKind::kData, "unknown document id " + std::string(id));
  return *d;
}

std::vector<std::string> Corpus::ids_in(Split s) const {
  std::vector<std::string> ids;
  for (const auto& [id, doc] : docs_) {
    if (doc.split == s) ids.push_back(id);
  }
  return ids;
}

namespace {

json document_to_json(const Document& d, const LabelNames& names) {
  json j;
  j["id"] = d.id;
  j["text"] = d.text;
  j["split"] = std::string(split_name(d.split));
  if (d.gold_label) j["gold_label"] = label_name(names, *d.gold_label);
  if (!d.synonyms.empty()) j["synonyms"] = d.synonyms;
  return j;
}

Document document_from_json(const json& j, const LabelNames& names) {
  if (!j.is_object()) fail(ErrorKind::kData, "expected a JSON object");
  for (const char* field : {"id", "text"}) {
    if (!j.contains(field)) {
      fail(ErrorKind::kData, std::string("missing field ") + field);
    }
    if (!j[field].is_string()) {
      fail(ErrorKind::kData, std::string("field ") + field + " must be a string");
    }
  }
  Document d;
  d.id = j["id"].get<std::string>();
  d.text = j["text"].get<std::string>();
  if (j.contains("split") && !j["split"].is_null()) {
    if (!j["split"].is_string()) fail(ErrorKind::kData, "field split must be a string");
    d.split = split_from_name(j["split"].get<std::string>());
  }
  if (j.contains("gold_label") && !j["gold_label"].is_null()) {
    if (!j["gold_label"].is_string()) {
      fail(ErrorKind::kData, "field gold_label must be a string");
    }
    d.gold_label = label_from_name(names, j["gold_label"].get<std::string>());
  }
  if (j.contains("synonyms") && !j["synonyms"].is_null()) {
    if (!j["synonyms"].is_array()) {
      fail(ErrorKind::kData, "field synonyms must be an array");
    }
    for (const auto& s : j["synonyms"]) {
      if (!s.is_string()) fail(ErrorKind::kData, "synonyms must be strings");
      d.synonyms.push_back(s.get<std::string>());
    }
  }
  return d;
}

void parse_document_lines(const std::vector<std::string>& lines,
                          std::size_t first, Corpus& corpus) {
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t lineno = i + 1;
    try {
      json j = json::parse(lines[i]);
      corpus.add(document_from_json(j, corpus.label_names()));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData,
           "line " + std::to_string(lineno) + ": invalid JSON (" + e.what() + ")");
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos
                                           ? std::string_view::npos
                                           : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

Corpus ingest_jsonl(const fs::path& path, std::string task_id,
                    LabelNames label_names) {
  Corpus corpus(std::move(task_id), std::move(label_names));
  parse_document_lines(read_lines(path), 0, corpus);
  return corpus;
}

Corpus ingest_imdb_dir(const fs::path& root) {
  struct Leaf {
    const char* rel;
    Split split;
    std::optional<Label> label;
  };
  const Leaf leaves[] = {
      {"train/pos", Split::kTrain, Label::kPositive},
      {"train/neg", Split::kTrain, Label::kNegative},
      {"test/pos", Split::kTest, Label::kPositive},
      {"test/neg", Split::kTest, Label::kNegative},
      {"train/unsup", Split::kExtra, std::nullopt},
  };
  Corpus corpus("imdb", kImdbLabels);
  bool any = false;
  for (const Leaf& leaf : leaves) {
    const fs::path dir = root / leaf.rel;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) continue;
    any = true;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      Document d;
      d.id = std::string(split_name(leaf.split)) + "/" + f.filename().string();
      try {
        d.text = read_file(f);
        d.split = leaf.split;
        d.gold_label = leaf.label;
        corpus.add(std::move(d));
      } catch (const Error& e) {
        fail(e.kind(), f.string() + ": " + e.what());
      }
    }
  }
  if (!any) {
    fail(ErrorKind::kData, root.string() +
                               ": none of train/pos, train/neg, test/pos, "
                               "test/neg, train/unsup found");
  }
  return corpus;
}

Corpus ingest_umls_tsv(const fs::path& path, Split split) {
  Corpus corpus("umls", kUmlsLabels);
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    auto cols = split_on(lines[i], '\t');
    if (cols.size() < 2) {
      fail(ErrorKind::kData, where + "expected at least 2 tab-separated columns");
    }
    Document d;
    d.id = trim(cols[0]);
    d.text = trim(cols[1]);
    d.split = split;
    if (cols.size() >= 3) {
      for (const std::string& s : split_on(cols[2], ';')) {
        std::string t = trim(s);
        if (!t.empty()) d.synonyms.push_back(std::move(t));
      }
    }
    if (cols.size() >= 4) {
      std::string g = ascii_lower(trim(cols[3]));
      if (!g.empty()) {
        try {
          d.gold_label = label_from_name(kUmlsLabels, g);
        } catch (const Error& e) {
          fail(ErrorKind::kData, where + e.what());
        }
      }
    }
    try {
      corpus.add(std::move(d));
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  return corpus;
}

std::vector<std::string> sample_subset(const Corpus& corpus, Split split,
                                       std::size_t n, std::uint64_t seed) {
  std::vector<std::string> ids = corpus.ids_in(split);
  if (n > ids.size()) {
    fail(ErrorKind::kData, "requested " + std::to_string(n) + " documents but split " +
                               std::string(split_name(split)) + " has only " +
                               std::to_string(ids.size()));
  }
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t idx : sample_indices(ids.size(), n, rng)) {
    out.push_back(ids[idx]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void save_corpus(const Corpus& corpus, const fs::path& path) {
  std::ostringstream out;
  json header;
  header["format"] = "llambert-corpus";
  header["version"] = kCorpusFormatVersion;
  header["task_id"] = corpus.task_id();
  header["label_names"] = {corpus.label_names()[0], corpus.label_names()[1]};
  out << header.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  for (const auto& [id, doc] : corpus.documents()) {
    out << document_to_json(doc, corpus.label_names()).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  write_file(path, out.str());
}

Corpus load_corpus(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) fail(ErrorKind::kData, path.string() + ": missing header line");
  json header;
  try {
    header = json::parse(lines[0]);
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, path.string() + ": line 1: invalid header");
  }
  if (!header.is_object() || header.value("format", "") != "llambert-corpus") {
    fail(ErrorKind::kData, path.string() + ": not a corpus file");
  }
  if (!header.contains("version") || !header["version"].is_number_integer() ||
      header["version"].get<int>() != kCorpusFormatVersion) {
    fail(ErrorKind::kData, path.string() + ": unsupported corpus version " +
                               (header.contains("version") ? header["version"].dump(-1, ' ', false, json::error_handler_t::replace)
                                                           : std::string("<none>")) +
                               " (expected " + std::to_string(kCorpusFormatVersion) + ")");
  }
  const auto& names = header.at("label_names");
  if (!names.is_array() || names.size() != 2) {
    fail(ErrorKind::kData, path.string() + ": label_names must have two entries");
  }
  Corpus corpus(header.at("task_id").get<std::string>(),
                LabelNames{names[0].get<std::string>(), names[1].get<std::string>()});
  try {
    parse_document_lines(lines, 1, corpus);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
  return corpus;
}

}  // namespace llambert
