// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <mutex>

#include <json.hpp>

#include "core/annotator.hpp"
#include "support/oracle_replay.hpp"
#include "support/parser_fixtures.hpp"
#include "support/synthetic.hpp"

#ifndef LLB_TEST_DATA_DIR
#error "LLB_TEST_DATA_DIR must be defined"
#endif

using namespace llambert;

namespace {

using testing::replay_oracle_draw;

Corpus oracle_corpus() {
  testing::SyntheticSpec ss;
  ss.n_train = 0;
  ss.n_test = 0;
  ss.n_extra = 1000;
  return testing::make_synthetic_corpus(ss);
}

BackendConfig mock_config(double eps, double delta, std::uint64_t seed) {
  BackendConfig cfg;
  cfg.oracle = {eps, delta, seed};
  return cfg;
}

// Replies from a per-document script of statuses; the last entry repeats.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::vector<BackendReply::Status>> script)
      : script_(std::move(script)) {
    cfg_.max_in_flight = 3;
    cfg_.model_name = "scripted";
  }
  BackendReply complete(const RenderedPrompt&, const Document& doc, const PromptSpec&) override {
    std::lock_guard lock(mu_);
    const auto& steps = script_[doc.id];
    const std::size_t n = calls_[doc.id]++;
    const auto status = steps.empty() ? BackendReply::Status::kOk
                                      : steps[std::min(n, steps.size() - 1)];
    if (status != BackendReply::Status::kOk) return {status, "", "scripted failure"};
    return {status, doc.gold_label == Label::kPositive ? "positive" : "negative", ""};
  }
  const BackendConfig& config() const override { return cfg_; }
  std::size_t calls(const std::string& id) {
    std::lock_guard lock(mu_);
    return calls_[id];
  }

  BackendConfig cfg_;

 private:
  std::mutex mu_;
  std::map<std::string, std::vector<BackendReply::Status>> script_;
  std::map<std::string, std::size_t> calls_;
};

}  // namespace

TEST_CASE("parser fixtures") {
  const PromptSpec imdb = imdb_base_spec();
  const PromptSpec umls = umls_base_spec();
  std::size_t n = 0;
  for (const auto& f : testing::kParserFixtures) {
    const PromptSpec& spec = f.task == "umls" ? umls : imdb;
    const ParseOutcome o = parse_response(f.text, spec.lexicon);
    const std::string got = std::holds_alternative<Label>(o)
                                ? label_name(spec.label_names, std::get<Label>(o))
                                : std::get<Discard>(o).reason;
    INFO("response: " << f.text);
    CHECK(got == f.expected);
    ++n;
  }
  CHECK(n >= 50);
}

TEST_CASE("parser honours multi-word and alternative surfaces") {
  const std::array<std::vector<std::string>, 2> lex{std::vector<std::string>{"not related", "no"},
                                                    std::vector<std::string>{"related", "yes"}};
  CHECK(parse_response("Yes", lex) == ParseOutcome{Label::kPositive});
  CHECK(parse_response("It is not related.", lex) == ParseOutcome{Discard{"ambiguous"}});
  CHECK(parse_response("NO", lex) == ParseOutcome{Label::kNegative});
  CHECK(parse_response("unrelated", lex) == ParseOutcome{Discard{"no-label"}});
}

TEST_CASE("mock oracle responses follow the seeded draw") {
  const Corpus c = oracle_corpus();
  const std::array<std::string, 2> surfaces{"negative", "positive"};
  const OracleParams p{0.2, 0.1, 42};
  for (const auto& [id, d] : c.documents()) {
    const double u = replay_oracle_draw(42, id);
    const std::string r = mock_oracle_respond(d, d.gold_label, p, surfaces);
    const std::string& gold = surfaces[index_of(*d.gold_label)];
    const std::string& flipped = surfaces[index_of(opposite(*d.gold_label))];
    if (u < 0.1) {
      CHECK(r == kGarbageResponse);
    } else if (u < 0.3) {
      CHECK(r == flipped);
    } else {
      CHECK(r == gold);
    }
  }
  Document unlabeled;
  unlabeled.id = "u";
  unlabeled.text = "t";
  CHECK_THROWS_AS(mock_oracle_respond(unlabeled, std::nullopt, p, surfaces), Error);
}

TEST_CASE("mock oracle flip and garbage counts match the golden manifest") {
  const auto golden = nlohmann::json::parse(
      read_file(std::filesystem::path(LLB_TEST_DATA_DIR) / "golden" / "mock_oracle_counts.json"));
  const Corpus c = oracle_corpus();
  const auto ids = c.ids_in(Split::kExtra);
  REQUIRE(ids.size() == 1000);
  for (const auto& g : golden.at("cases")) {
    const double eps = g.at("error_rate"), delta = g.at("garbage_rate");
    const std::uint64_t seed = g.at("seed");
    MockOracleBackend backend(mock_config(eps, delta, seed));
    ResponseCache cache;
    const auto res = label_subset(ids, c, imdb_base_spec(), backend, cache);

    std::size_t replay_flips = 0, replay_garbage = 0;
    for (const auto& id : ids) {
      const double u = replay_oracle_draw(seed, id);
      if (u < delta) {
        ++replay_garbage;
      } else if (u < delta + eps) {
        ++replay_flips;
      }
    }
    const std::size_t flips = res.manifest.at("gold_disagreements");
    const std::size_t discards = res.labels.discards().size();
    CHECK(flips == replay_flips);
    CHECK(discards == replay_garbage);
    CHECK(flips == g.at("gold_disagreements").get<std::size_t>());
    CHECK(discards == g.at("discarded").get<std::size_t>());
    CHECK(res.labels.size() + discards == 1000);
    // Binomial sanity: within 4 sigma of the expected counts.
    auto within = [](double k, double n, double p) {
      return std::abs(k - n * p) <= 4 * std::sqrt(n * p * (1 - p)) + 1e-9;
    };
    CHECK(within(static_cast<double>(discards), 1000, delta));
    CHECK(within(static_cast<double>(flips), 1000.0 - static_cast<double>(discards), eps));
  }
}

TEST_CASE("label_subset manifest counts and excerpt") {
  const Corpus c = oracle_corpus();
  auto ids = c.ids_in(Split::kExtra);
  ids.resize(50);
  MockOracleBackend backend(mock_config(0.0, 0.5, 7));
  ResponseCache cache;
  const auto res = label_subset(ids, c, imdb_base_spec(), backend, cache);
  const auto& m = res.manifest;
  CHECK(m.at("requested") == 50);
  CHECK(m.at("labeled").get<std::size_t>() + m.at("discarded").get<std::size_t>() == 50);
  CHECK(m.at("discard_reasons").value("no-label", 0) == m.at("discarded"));
  CHECK(m.at("gold_disagreements") == 0);
  CHECK(m.at("backend_calls") == 50);
  CHECK(m.at("exemplar_char_budget") == 2000);
  CHECK(m.at("spec_hash") == hex64(imdb_base_spec().spec_hash()));
  for (const auto& [id, r] : res.labels.records()) {
    CHECK(r.source == LabelSource::kLlm);
    CHECK(r.model == "mock-oracle");
    CHECK(r.prompt_hash.size() == 16);
    CHECK(r.raw_response_excerpt == label_name(kImdbLabels, r.label));
  }
}

TEST_CASE("annotate retries transport failures with exponential backoff") {
  using S = BackendReply::Status;
  testing::SyntheticSpec ss;
  ss.n_train = 4;
  ss.n_test = 0;
  ss.n_extra = 0;
  const Corpus c = testing::make_synthetic_corpus(ss);
  const auto ids = c.ids_in(Split::kTrain);
  ScriptedBackend backend({{ids[0], {S::kTransport, S::kTransport, S::kOk}},
                           {ids[1], {S::kTransport}},
                           {ids[2], {S::kProtocol}}});
  std::mutex mu;
  std::vector<long> sleeps;
  ResponseCache cache;
  const auto res = annotate(ids, c, imdb_base_spec(), backend, cache,
                            [&](std::chrono::milliseconds d) {
                              std::lock_guard lock(mu);
                              sleeps.push_back(static_cast<long>(d.count()));
                            });
  CHECK(backend.calls(ids[0]) == 3);
  CHECK(backend.calls(ids[1]) == 4);  // max_attempts
  CHECK(backend.calls(ids[2]) == 1);  // protocol errors are not retried
  CHECK(backend.calls(ids[3]) == 1);
  CHECK(res.failures.at(ids[1]) == "transport");
  CHECK(res.failures.at(ids[2]) == "protocol");
  REQUIRE(res.responses.size() == 2);
  CHECK(res.responses[0].doc_id == ids[0]);
  CHECK(res.backend_calls == 9);
  std::sort(sleeps.begin(), sleeps.end());
  CHECK(sleeps == std::vector<long>{500, 500, 1000, 1000, 2000});

  const auto labeled = label_subset(ids, c, imdb_base_spec(), backend, cache, [](auto) {});
  CHECK(labeled.labels.discards().at(ids[1]) == "transport");
  CHECK(labeled.labels.discards().at(ids[2]) == "protocol");
  CHECK(labeled.manifest.at("cache_hits") == 2);

  CHECK_THROWS_AS(annotate({ids[0], ids[0]}, c, imdb_base_spec(), backend, cache), Error);
  CHECK_THROWS_AS(annotate({"missing"}, c, imdb_base_spec(), backend, cache), Error);
}

TEST_CASE("response cache persists, ignores torn lines, and first write wins") {
  testing::TempDir tmp("cache");
  const auto path = tmp / "responses.jsonl";
  const Corpus c = oracle_corpus();
  auto ids = c.ids_in(Split::kExtra);
  ids.resize(40);
  {
    MockOracleBackend backend(mock_config(0.1, 0.0, 3));
    ResponseCache cache(path);
    const auto first = annotate(ids, c, imdb_base_spec(), backend, cache);
    CHECK(first.backend_calls == 40);
    CHECK(backend.calls() == 40);
  }
  {
    MockOracleBackend backend(mock_config(0.1, 0.0, 3));
    ResponseCache cache(path);
    CHECK(cache.size() == 40);
    const auto again = annotate(ids, c, imdb_base_spec(), backend, cache);
    CHECK(backend.calls() == 0);
    CHECK(again.cache_hits == 40);
  }
  {
    // a different oracle seed is a different backend id: no hits
    MockOracleBackend backend(mock_config(0.1, 0.0, 4));
    ResponseCache cache(path);
    annotate(ids, c, imdb_base_spec(), backend, cache);
    CHECK(backend.calls() == 40);
  }
  std::string text = read_file(path);
  write_file(path, text + "{\"doc_id\":\"torn\",\"prompt_ha");
  ResponseCache reloaded(path);
  CHECK(reloaded.size() == 80);

  ResponseCache mem;
  mem.put({"d", "h", "first", "b", ""});
  mem.put({"d", "h", "second", "b", ""});
  CHECK(mem.get("d", "h", "b")->response_text == "first");
  CHECK(!mem.get("d", "h", "other"));
}

TEST_CASE("backend configuration") {
  auto cfg = backend_from_config(KvConfig::parse(
      "backend.kind = http\nbackend.base_url = http://localhost:9/x\nbackend.model = m\n"
      "backend.max_in_flight = 2\nbackend.retry.max_attempts = 6\n"
      "backend.retry.initial_backoff_ms = 10\nbackend.timeout_s = 5\n"));
  CHECK(cfg.kind == BackendKind::kHttpChat);
  CHECK(cfg.base_url == "http://localhost:9/x");
  CHECK(cfg.max_in_flight == 2);
  CHECK(cfg.retry.max_attempts == 6);
  CHECK(cfg.retry.initial_backoff.count() == 10);
  CHECK(cfg.backend_id() == "http_chat:http://localhost:9/x:m");
  CHECK(cfg.to_json().at("temperature") == 0.0);
  CHECK_NOTHROW(cfg.validate());
  cfg.max_in_flight = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(backend_from_config(KvConfig::parse("backend.kind = carrier-pigeon\n")), Error);
  BackendConfig http;
  http.kind = BackendKind::kHttpChat;
  CHECK_THROWS_AS(http.validate(), Error);  // needs a base_url
  CHECK(mock_config(0.05, 0, 1).backend_id() != mock_config(0.05, 0, 2).backend_id());
  CHECK(mock_config(0.05, 0, 1).backend_id() != mock_config(0.06, 0, 1).backend_id());
}
