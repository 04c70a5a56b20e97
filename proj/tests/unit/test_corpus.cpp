// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <functional>

#include "core/corpus.hpp"
#include "core/labels.hpp"
#include "support/synthetic.hpp"

using namespace llambert;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("ingest_jsonl reads documents and reports bad lines") {
  testing::TempDir tmp("corpus");
  write_file(tmp / "ok.jsonl",
             "{\"id\":\"b\",\"text\":\"second\",\"split\":\"test\",\"gold_label\":\"positive\"}\n"
             "\n"
             "{\"id\":\"a\",\"text\":\"first\",\"split\":\"train\",\"gold_label\":\"negative\"}\n"
             "{\"id\":\"c\",\"text\":\"unlabeled\",\"split\":\"extra\"}\n");
  const Corpus c = ingest_jsonl(tmp / "ok.jsonl", "imdb", kImdbLabels);
  CHECK(c.size() == 3);
  CHECK(c.split_size(Split::kTrain) == 1);
  CHECK(c.at("b").gold_label == Label::kPositive);
  CHECK(!c.at("c").gold_label);
  CHECK(c.ids_in(Split::kExtra) == std::vector<std::string>{"c"});

  write_file(tmp / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}\n");
  CHECK(error_of([&] { ingest_jsonl(tmp / "bad.jsonl", "t", kImdbLabels); }) ==
        "line 2: missing field text");
  write_file(tmp / "dup.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
  CHECK(error_of([&] { ingest_jsonl(tmp / "dup.jsonl", "t", kImdbLabels); }).find("duplicate") !=
        std::string::npos);
  write_file(tmp / "blank.jsonl", "{\"id\":\"a\",\"text\":\"  \"}\n");
  CHECK(error_of([&] { ingest_jsonl(tmp / "blank.jsonl", "t", kImdbLabels); }).find("blank") !=
        std::string::npos);
  write_file(tmp / "label.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"gold_label\":\"meh\"}\n");
  CHECK_THROWS_AS(ingest_jsonl(tmp / "label.jsonl", "t", kImdbLabels), Error);
  write_file(tmp / "json.jsonl", "{not json\n");
  CHECK(error_of([&] { ingest_jsonl(tmp / "json.jsonl", "t", kImdbLabels); }).rfind("line 1:", 0) == 0);
}

TEST_CASE("ingest_imdb_dir maps the standard layout") {
  testing::TempDir tmp("imdb");
  write_file(tmp / "train/pos/1_9.txt", "good");
  write_file(tmp / "train/neg/2_1.txt", "bad");
  write_file(tmp / "test/pos/3_8.txt", "fine");
  write_file(tmp / "train/unsup/4_0.txt", "unknown");
  const Corpus c = ingest_imdb_dir(tmp.path());
  CHECK(c.task_id() == "imdb");
  CHECK(c.size() == 4);
  CHECK(c.at("train/1_9.txt").gold_label == Label::kPositive);
  CHECK(c.at("train/2_1.txt").gold_label == Label::kNegative);
  CHECK(c.at("test/3_8.txt").split == Split::kTest);
  CHECK(c.at("extra/4_0.txt").split == Split::kExtra);
  CHECK(!c.at("extra/4_0.txt").gold_label);

  testing::TempDir empty("imdb-empty");
  CHECK_THROWS_AS(ingest_imdb_dir(empty.path()), Error);
}

TEST_CASE("ingest_umls_tsv reads terms, synonyms and optional labels") {
  testing::TempDir tmp("umls");
  write_file(tmp / "t.tsv",
             "C1\tOptic nerve\tsecond cranial nerve; CN II\tyes\n"
             "C2\tAorta\t\tNo\n"
             "C3\tNeuron\n");
  const Corpus c = ingest_umls_tsv(tmp / "t.tsv", Split::kExtra);
  CHECK(c.label_names() == kUmlsLabels);
  CHECK(c.at("C1").synonyms == std::vector<std::string>{"second cranial nerve", "CN II"});
  CHECK(c.at("C1").gold_label == Label::kPositive);
  CHECK(c.at("C2").gold_label == Label::kNegative);
  CHECK(!c.at("C3").gold_label);
  CHECK(c.split_size(Split::kExtra) == 3);

  write_file(tmp / "bad.tsv", "C1\tfine\nonly-one-column\n");
  CHECK(error_of([&] { ingest_umls_tsv(tmp / "bad.tsv"); }).rfind("line 2:", 0) == 0);
  write_file(tmp / "badlabel.tsv", "C1\tx\t\tmaybe\n");
  CHECK_THROWS_AS(ingest_umls_tsv(tmp / "badlabel.tsv"), Error);
}

TEST_CASE("sample_subset is seeded, sorted and without replacement") {
  testing::SyntheticSpec ss;
  ss.n_train = 100;
  ss.n_test = 10;
  ss.n_extra = 50;
  const Corpus c = testing::make_synthetic_corpus(ss);
  const auto a = sample_subset(c, Split::kTrain, 30, 5);
  const auto b = sample_subset(c, Split::kTrain, 30, 5);
  const auto other = sample_subset(c, Split::kTrain, 30, 6);
  CHECK(a == b);
  CHECK(a != other);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  for (const auto& id : a) CHECK(c.at(id).split == Split::kTrain);
  CHECK(sample_subset(c, Split::kTrain, 100, 1) == c.ids_in(Split::kTrain));
  CHECK(error_of([&] { sample_subset(c, Split::kExtra, 51, 1); }) ==
        "requested 51 documents but split extra has only 50");
}

TEST_CASE("corpus files round-trip and check their version") {
  testing::TempDir tmp("corpus-rt");
  Corpus c("umls", kUmlsLabels);
  Document d;
  d.id = "x";
  d.text = "caf\xC3\xA9 \"quoted\"\nline";
  d.split = Split::kTest;
  d.gold_label = Label::kPositive;
  d.synonyms = {"s1", "s2"};
  c.add(d);
  save_corpus(c, tmp / "c.jsonl");
  CHECK(load_corpus(tmp / "c.jsonl") == c);

  std::string text = read_file(tmp / "c.jsonl");
  text.replace(text.find("\"version\":1"), 11, "\"version\":9");
  write_file(tmp / "v9.jsonl", text);
  CHECK(error_of([&] { load_corpus(tmp / "v9.jsonl"); }).find("unsupported corpus version 9") !=
        std::string::npos);
  write_file(tmp / "empty.jsonl", "");
  CHECK_THROWS_AS(load_corpus(tmp / "empty.jsonl"), Error);
}

TEST_CASE("LabelSet keeps records and discards exclusive") {
  LabelSet s("imdb", kImdbLabels);
  s.add_record({"a", Label::kPositive, LabelSource::kLlm, "m", "h", "positive"});
  s.add_discard("b", "no-label");
  CHECK(s.size() == 1);
  CHECK(s.label_of("a") == Label::kPositive);
  CHECK(!s.label_of("b"));
  CHECK_THROWS_AS(s.add_discard("a", "x"), Error);
  CHECK_THROWS_AS(s.add_record({"b", Label::kNegative, LabelSource::kLlm, "", "", ""}), Error);
  CHECK_THROWS_AS(s.add_record({"a", Label::kNegative, LabelSource::kLlm, "", "", ""}), Error);

  testing::TempDir tmp("labels");
  save_labelset(s, tmp / "l.jsonl", tmp / "d.jsonl");
  const LabelSet back = load_labelset(tmp / "l.jsonl", tmp / "d.jsonl", "imdb", kImdbLabels);
  CHECK(back.records().at("a").raw_response_excerpt == "positive");
  CHECK(back.records().at("a").source == LabelSource::kLlm);
  CHECK(back.discards().at("b") == "no-label");
  write_file(tmp / "bad.jsonl", "{\"doc_id\":\"a\",\"label\":\"maybe\"}\n");
  CHECK_THROWS_AS(load_labelset(tmp / "bad.jsonl", "", "imdb", kImdbLabels), Error);
}

TEST_CASE("gold_labelset filters by split") {
  testing::SyntheticSpec ss;
  ss.n_train = 5;
  ss.n_test = 3;
  ss.n_extra = 2;
  const Corpus c = testing::make_synthetic_corpus(ss);
  CHECK(gold_labelset(c, Split::kTest).size() == 3);
  CHECK(gold_labelset(c, std::nullopt).size() == 10);
  const LabelSet train = gold_labelset(c, Split::kTrain);
  CHECK(train.size() == 5);
  for (const auto& [id, r] : train.records()) {
    CHECK(r.label == *c.at(id).gold_label);
    CHECK(r.source == LabelSource::kGold);
  }
}
