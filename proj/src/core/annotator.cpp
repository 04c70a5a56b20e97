// SPDX-License-Identifier: Apache-2.0

#include "core/annotator.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <thread>

namespace llambert {

using nlohmann::json;

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Code point ending just before `end` / starting at `pos`; -1 for bytes that
// do not form a valid UTF-8 sequence.
long decode_before(const std::string& s, std::size_t end) {
  std::size_t start = end;
  int back = 0;
  while (start > 0 && back < 4) {
    --start;
    ++back;
    const unsigned char c = static_cast<unsigned char>(s[start]);
    if ((c & 0xC0) != 0x80) break;
  }
  const unsigned char lead = static_cast<unsigned char>(s[start]);
  const int len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : (lead >> 3) == 0x1E ? 4 : 0;
  if (len != back) return -1;
  long cp = len == 1 ? lead : lead & (0x7F >> len);
  for (int i = 1; i < len; ++i) cp = (cp << 6) | (static_cast<unsigned char>(s[start + i]) & 0x3F);
  return cp;
}

long decode_at(const std::string& s, std::size_t pos) {
  const unsigned char lead = static_cast<unsigned char>(s[pos]);
  const int len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : (lead >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || pos + len > s.size()) return -1;
  long cp = len == 1 ? lead : lead & (0x7F >> len);
  for (int i = 1; i < len; ++i) {
    const unsigned char c = static_cast<unsigned char>(s[pos + i]);
    if ((c & 0xC0) != 0x80) return -1;
    cp = (cp << 6) | (c & 0x3F);
  }
  return cp;
}

// Letters and digits of any script are word characters; so are bytes that
// are not valid UTF-8. Unicode spaces, punctuation and symbols are not.
bool is_word_cp(long cp) {
  if (cp < 0) return true;
  if (cp < 0x80) return std::isalnum(static_cast<int>(cp));
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, arrows, math, shapes
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if ((cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20)) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

std::size_t count_whole_word(const std::string& hay, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_cp(decode_before(hay, pos));
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !is_word_cp(decode_at(hay, end));
    if (left_ok && right_ok) ++count;
  }
  return count;
}

std::string_view kind_name(BackendKind k) {
  return k == BackendKind::kHttpChat ? "http_chat" : "mock_oracle";
}

}  // namespace

void BackendConfig::validate() const {
  if (max_in_flight < 1) fail(ErrorKind::kUsage, "max_in_flight must be >= 1");
  if (retry.max_attempts < 1) fail(ErrorKind::kUsage, "retry max_attempts must be >= 1");
  if (retry.multiplier < 1.0) fail(ErrorKind::kUsage, "retry multiplier must be >= 1");
  if (retry.initial_backoff.count() < 0) fail(ErrorKind::kUsage, "retry backoff must be >= 0");
  if (max_tokens < 1) fail(ErrorKind::kUsage, "max_tokens must be >= 1");
  if (kind == BackendKind::kHttpChat && base_url.empty()) {
    fail(ErrorKind::kUsage, "http backend requires base_url");
  }
  const auto& o = oracle;
  if (!(o.error_rate >= 0.0 && o.error_rate <= 1.0) ||
      !(o.garbage_rate >= 0.0 && o.garbage_rate <= 1.0)) {
    fail(ErrorKind::kUsage, "oracle error_rate and garbage_rate must lie in [0, 1]");
  }
  if (o.error_rate + o.garbage_rate > 1.0 + 1e-12) {
    fail(ErrorKind::kUsage, "oracle error_rate + garbage_rate must not exceed 1");
  }
}

std::string BackendConfig::backend_id() const {
  if (kind == BackendKind::kMockOracle) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "mock_oracle:eps=%.17g:delta=%.17g:seed=%llu",
                  oracle.error_rate, oracle.garbage_rate,
                  static_cast<unsigned long long>(oracle.seed));
    return buf;
  }
  return "http_chat:" + base_url + ":" + model_name;
}

json BackendConfig::to_json() const {
  json j;
  j["kind"] = std::string(kind_name(kind));
  j["model"] = model_name;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["max_in_flight"] = max_in_flight;
  j["retry"] = {{"max_attempts", retry.max_attempts},
                {"initial_backoff_ms", retry.initial_backoff.count()},
                {"multiplier", retry.multiplier}};
  if (kind == BackendKind::kHttpChat) {
    j["base_url"] = base_url;
    j["api_key_env"] = api_key_env;
    j["timeout_s"] = timeout_seconds;
  } else {
    j["error_rate"] = oracle.error_rate;
    j["garbage_rate"] = oracle.garbage_rate;
    j["seed"] = oracle.seed;
  }
  return j;
}

BackendConfig backend_from_config(const KvConfig& cfg, BackendConfig b) {
  if (auto k = cfg.get("backend.kind")) {
    if (*k == "http" || *k == "http_chat") {
      b.kind = BackendKind::kHttpChat;
    } else if (*k == "mock" || *k == "mock_oracle") {
      b.kind = BackendKind::kMockOracle;
    } else {
      fail(ErrorKind::kUsage, "unknown backend.kind '" + *k + "'");
    }
  }
  b.base_url = cfg.get_or("backend.base_url", b.base_url);
  b.model_name = cfg.get_or("backend.model", b.model_name);
  b.temperature = cfg.get_double("backend.temperature", b.temperature);
  b.max_tokens = static_cast<int>(cfg.get_int("backend.max_tokens", b.max_tokens));
  b.max_in_flight = static_cast<int>(cfg.get_int("backend.max_in_flight", b.max_in_flight));
  b.retry.max_attempts =
      static_cast<int>(cfg.get_int("backend.retry.max_attempts", b.retry.max_attempts));
  b.retry.initial_backoff = std::chrono::milliseconds(
      cfg.get_int("backend.retry.initial_backoff_ms", b.retry.initial_backoff.count()));
  b.retry.multiplier = cfg.get_double("backend.retry.multiplier", b.retry.multiplier);
  b.oracle.error_rate = cfg.get_double("backend.error_rate", b.oracle.error_rate);
  b.oracle.garbage_rate = cfg.get_double("backend.garbage_rate", b.oracle.garbage_rate);
  b.oracle.seed = static_cast<std::uint64_t>(
      cfg.get_int("backend.seed", static_cast<long long>(b.oracle.seed)));
  b.api_key_env = cfg.get_or("backend.api_key_env", b.api_key_env);
  b.timeout_seconds = static_cast<int>(cfg.get_int("backend.timeout_s", b.timeout_seconds));
  return b;
}

std::string mock_oracle_respond(const Document& doc, std::optional<Label> gold,
                                const OracleParams& params,
                                const std::array<std::string, 2>& canonical_surfaces) {
  if (!gold) fail(ErrorKind::kData, "mock oracle needs a gold label for document " + doc.id);
  Rng rng(derive_seed(params.seed, doc.id));
  const double u = rng.uniform();
  if (u < params.garbage_rate) return std::string(kGarbageResponse);
  if (u < params.garbage_rate + params.error_rate) return canonical_surfaces[index_of(opposite(*gold))];
  return canonical_surfaces[index_of(*gold)];
}

MockOracleBackend::MockOracleBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

BackendReply MockOracleBackend::complete(const RenderedPrompt&, const Document& doc,
                                         const PromptSpec& spec) {
  ++calls_;
  const std::array<std::string, 2> surfaces{spec.canonical_surface(Label::kNegative),
                                            spec.canonical_surface(Label::kPositive)};
  return {BackendReply::Status::kOk, mock_oracle_respond(doc, doc.gold_label, cfg_.oracle, surfaces), ""};
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == BackendKind::kHttpChat) return std::make_unique<HttpChatBackend>(cfg);
  return std::make_unique<MockOracleBackend>(cfg);
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (path_.empty() || !std::filesystem::exists(path_, ec)) return;
  const std::string all = read_file(path_);
  std::size_t start = 0;
  while (start < all.size()) {
    const std::size_t nl = all.find('\n', start);
    if (nl == std::string::npos) break;  // incomplete trailing record
    const std::string line = all.substr(start, nl - start);
    start = nl + 1;
    try {
      json j = json::parse(line);
      RawResponse r{j.at("doc_id").get<std::string>(), j.at("prompt_hash").get<std::string>(),
                    j.at("response_text").get<std::string>(), j.at("backend").get<std::string>(),
                    j.value("timestamp", "")};
      entries_.try_emplace(key(r.doc_id, r.prompt_hash, r.backend), std::move(r));
    } catch (const json::exception&) {
      // Corrupt lines are skipped; the entry will be recomputed.
    }
  }
}

std::string ResponseCache::key(const std::string& doc_id, const std::string& prompt_hash,
                               const std::string& backend) {
  return doc_id + '\x1f' + prompt_hash + '\x1f' + backend;
}

std::optional<RawResponse> ResponseCache::get(const std::string& doc_id,
                                              const std::string& prompt_hash,
                                              const std::string& backend) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key(doc_id, prompt_hash, backend));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const RawResponse& r) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.try_emplace(key(r.doc_id, r.prompt_hash, r.backend), r);
  if (!inserted || path_.empty()) return;
  json j;
  j["doc_id"] = r.doc_id;
  j["prompt_hash"] = r.prompt_hash;
  j["response_text"] = r.response_text;
  j["backend"] = r.backend;
  j["timestamp"] = r.timestamp;
  const std::string line = j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorKind::kIo, "cannot open cache " + path_.string());
  ::flock(fd, LOCK_EX);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n <= 0) {
      ::flock(fd, LOCK_UN);
      ::close(fd);
      fail(ErrorKind::kIo, "cannot append to cache " + path_.string());
    }
    written += static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

AnnotateResult annotate(const std::vector<std::string>& doc_ids, const Corpus& corpus,
                        const PromptSpec& spec, LlmBackend& backend, ResponseCache& cache,
                        const SleepFn& sleep) {
  const BackendConfig& cfg = backend.config();
  cfg.validate();
  spec.validate();
  const std::string backend_id = cfg.backend_id();

  struct Job {
    const Document* doc;
    RenderedPrompt prompt;
    std::optional<RawResponse> response;
    std::string failure;
  };
  std::vector<std::string> ids = doc_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    fail(ErrorKind::kUsage, "annotate: duplicate document ids in request");
  }
  std::vector<Job> jobs;
  jobs.reserve(ids.size());
  for (const auto& id : ids) {
    const Document& doc = corpus.at(id);
    jobs.push_back({&doc, render(spec, doc), std::nullopt, ""});
  }

  AnnotateResult result;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto hit = cache.get(jobs[i].doc->id, jobs[i].prompt.hash_hex(), backend_id);
    if (hit) {
      jobs[i].response = std::move(*hit);
      ++result.cache_hits;
    } else {
      pending.push_back(i);
    }
  }

  const SleepFn do_sleep = sleep ? sleep : SleepFn([](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  });
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      Job& job = jobs[pending[slot]];
      try {
        auto backoff = std::chrono::duration<double, std::milli>(cfg.retry.initial_backoff);
        for (int attempt = 1;; ++attempt) {
          ++calls;
          BackendReply reply = backend.complete(job.prompt, *job.doc, spec);
          if (reply.status == BackendReply::Status::kOk) {
            RawResponse r{job.doc->id, job.prompt.hash_hex(), std::move(reply.text), backend_id,
                          utc_timestamp()};
            cache.put(r);
            job.response = std::move(r);
            break;
          }
          if (reply.status == BackendReply::Status::kProtocol) {
            job.failure = "protocol";
            break;
          }
          if (attempt >= cfg.retry.max_attempts) {
            job.failure = "transport";
            break;
          }
          do_sleep(std::chrono::duration_cast<std::chrono::milliseconds>(backoff));
          backoff *= cfg.retry.multiplier;
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(pending.size());
        return;
      }
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), pending.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  result.backend_calls = calls.load();
  for (auto& job : jobs) {
    if (job.response) {
      result.responses.push_back(std::move(*job.response));
    } else {
      result.failures.emplace(job.doc->id, job.failure);
    }
  }
  return result;
}

ParseOutcome parse_response(std::string_view response_text,
                            const std::array<std::vector<std::string>, 2>& lexicon) {
  const std::string norm = normalize_answer(response_text);
  std::array<std::size_t, 2> counts{0, 0};
  for (std::size_t i = 0; i < 2; ++i) {
    for (const auto& surface : lexicon[i]) counts[i] += count_whole_word(norm, normalize_answer(surface));
  }
  if (counts[0] > 0 && counts[1] > 0) return Discard{"ambiguous"};
  if (counts[0] > 0) return Label::kNegative;
  if (counts[1] > 0) return Label::kPositive;
  return Discard{"no-label"};
}

LabelSubsetResult label_subset(const std::vector<std::string>& doc_ids, const Corpus& corpus,
                               const PromptSpec& spec, LlmBackend& backend, ResponseCache& cache,
                               const SleepFn& sleep) {
  AnnotateResult ann = annotate(doc_ids, corpus, spec, backend, cache, sleep);
  LabelSubsetResult out{LabelSet(corpus.task_id(), corpus.label_names()), json::object()};
  const std::string model = backend.config().model_name;
  std::map<std::string, std::size_t> reasons;
  for (const auto& [id, why] : ann.failures) {
    out.labels.add_discard(id, why);
    ++reasons[why];
  }
  std::size_t gold_known = 0, gold_disagree = 0;
  for (const auto& r : ann.responses) {
    ParseOutcome parsed = parse_response(r.response_text, spec.lexicon);
    if (const auto* d = std::get_if<Discard>(&parsed)) {
      out.labels.add_discard(r.doc_id, d->reason);
      ++reasons[d->reason];
      continue;
    }
    const Label label = std::get<Label>(parsed);
    out.labels.add_record({r.doc_id, label, LabelSource::kLlm, model, r.prompt_hash,
                           utf8_truncate(r.response_text, kExcerptBytes)});
    const auto& gold = corpus.at(r.doc_id).gold_label;
    if (gold) {
      ++gold_known;
      if (*gold != label) ++gold_disagree;
    }
  }

  json& m = out.manifest;
  m["task_id"] = corpus.task_id();
  m["spec_hash"] = hex64(spec.spec_hash());
  m["wrapper"] = std::string(wrapper_name(spec.wrapper));
  m["exemplar_char_budget"] = spec.exemplar_char_budget;
  json ex = json::array();
  for (const auto& e : spec.exemplars) {
    ex.push_back({{"doc_id", e.doc_id}, {"label", label_name(spec.label_names, e.label)}});
  }
  m["exemplars"] = ex;
  m["backend"] = backend.config().to_json();
  m["requested"] = doc_ids.size();
  m["labeled"] = out.labels.size();
  m["discarded"] = out.labels.discards().size();
  m["discard_reasons"] = reasons;
  m["cache_hits"] = ann.cache_hits;
  m["backend_calls"] = ann.backend_calls;
  m["gold_compared"] = gold_known;
  m["gold_disagreements"] = gold_disagree;
  return out;
}

}  // namespace llambert
