// SPDX-License-Identifier: Apache-2.0

#include "core/labels.hpp"

#include <sstream>

#include <json.hpp>

namespace llambert {

using nlohmann::json;

std::string_view source_name(LabelSource s) {
  switch (s) {
    case LabelSource::kGold: return "gold";
    case LabelSource::kLlm: return "llm";
    case LabelSource::kNoise: return "noise";
    case LabelSource::kHuman: return "human";
    case LabelSource::kModel: return "model";
  }
  return "gold";
}

LabelSource source_from_name(std::string_view name) {
  if (name == "gold") return LabelSource::kGold;
  if (name == "llm") return LabelSource::kLlm;
  if (name == "noise") return LabelSource::kNoise;
  if (name == "human") return LabelSource::kHuman;
  if (name == "model") return LabelSource::kModel;
  fail(ErrorKind::kData, "unknown label source '" + std::string(name) + "'");
}

void LabelSet::add_record(LabelRecord rec) {
  if (discards_.count(rec.doc_id)) {
    fail(ErrorKind::kData, "document " + rec.doc_id + " is already discarded");
  }
  auto [it, inserted] = records_.try_emplace(rec.doc_id, rec);
  if (!inserted) fail(ErrorKind::kData, "duplicate label for document " + rec.doc_id);
}

void LabelSet::add_discard(std::string doc_id, std::string reason) {
  if (records_.count(doc_id)) {
    fail(ErrorKind::kData, "document " + doc_id + " is already labeled");
  }
  auto [it, inserted] = discards_.try_emplace(doc_id, std::move(reason));
  if (!inserted) fail(ErrorKind::kData, "duplicate discard for document " + it->first);
}

const LabelRecord* LabelSet::find(std::string_view id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

std::optional<Label> LabelSet::label_of(std::string_view id) const {
  const LabelRecord* r = find(id);
  if (!r) return std::nullopt;
  return r->label;
}

LabelSet gold_labelset(const Corpus& corpus, std::optional<Split> split) {
  LabelSet set(corpus.task_id(), corpus.label_names());
  for (const auto& [id, doc] : corpus.documents()) {
    if (split && doc.split != *split) continue;
    if (!doc.gold_label) continue;
    set.add_record({id, *doc.gold_label, LabelSource::kGold, "gold", "", ""});
  }
  return set;
}

void save_labelset(const LabelSet& set, const std::filesystem::path& labels_path,
                   const std::filesystem::path& discards_path) {
  std::ostringstream out;
  for (const auto& [id, r] : set.records()) {
    json j;
    j["doc_id"] = r.doc_id;
    j["label"] = label_name(set.label_names(), r.label);
    j["source"] = std::string(source_name(r.source));
    j["model"] = r.model;
    j["prompt_hash"] = r.prompt_hash;
    j["raw_response_excerpt"] = r.raw_response_excerpt;
    out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  write_file(labels_path, out.str());
  if (discards_path.empty()) return;
  std::ostringstream dout;
  for (const auto& [id, reason] : set.discards()) {
    json j;
    j["doc_id"] = id;
    j["reason"] = reason;
    dout << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  write_file(discards_path, dout.str());
}

LabelSet load_labelset(const std::filesystem::path& labels_path,
                       const std::filesystem::path& discards_path, std::string task_id,
                       LabelNames label_names) {
  LabelSet set(std::move(task_id), std::move(label_names));
  auto lines = read_lines(labels_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string where = labels_path.string() + ": line " + std::to_string(i + 1) + ": ";
    try {
      json j = json::parse(lines[i]);
      LabelRecord r;
      r.doc_id = j.at("doc_id").get<std::string>();
      r.label = label_from_name(set.label_names(), j.at("label").get<std::string>());
      r.source = source_from_name(j.value("source", "gold"));
      r.model = j.value("model", "");
      r.prompt_hash = j.value("prompt_hash", "");
      r.raw_response_excerpt = j.value("raw_response_excerpt", "");
      set.add_record(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, where + e.what());
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  if (discards_path.empty() || !std::filesystem::exists(discards_path)) return set;
  lines = read_lines(discards_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string where = discards_path.string() + ": line " + std::to_string(i + 1) + ": ";
    try {
      json j = json::parse(lines[i]);
      set.add_discard(j.at("doc_id").get<std::string>(), j.value("reason", ""));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, where + e.what());
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  return set;
}

}  // namespace llambert
