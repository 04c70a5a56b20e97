// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "core/annotator.hpp"
#include "support/synthetic.hpp"

using namespace llambert;
using nlohmann::json;

namespace {

// Chat-completions stand-in on 127.0.0.1 with a scripted status sequence.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/prefix/v1/chat/completions", [this](const httplib::Request& req,
                                                       httplib::Response& res) {
      std::lock_guard lock(mu_);
      bodies.push_back(req.body);
      auth.push_back(req.get_header_value("Authorization"));
      const std::size_t n = bodies.size() - 1;
      const int status = n < statuses.size() ? statuses[n] : 200;
      res.status = status;
      if (status == 200) {
        res.set_content(reply_body, "application/json");
      } else {
        res.set_content("{\"error\":\"nope\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/prefix/"; }

  std::mutex mu_;
  std::vector<int> statuses;
  std::string reply_body =
      R"({"choices":[{"index":0,"message":{"role":"assistant","content":"positive"}}]})";
  std::vector<std::string> bodies;
  std::vector<std::string> auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig http_config(const std::string& url) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kHttpChat;
  cfg.base_url = url;
  cfg.model_name = "llama-2-70b-chat";
  cfg.max_in_flight = 1;
  cfg.timeout_seconds = 5;
  cfg.api_key_env = "LLB_TEST_HTTP_KEY";
  return cfg;
}

Document one_doc() {
  Document d;
  d.id = "d1";
  d.text = "Great film.";
  d.split = Split::kExtra;
  d.gold_label = Label::kPositive;
  return d;
}

}  // namespace

TEST_CASE("extract_content accepts only the chat completion shape") {
  CHECK(HttpChatBackend::extract_content(
            R"({"choices":[{"message":{"content":"negative"}}]})") == "negative");
  CHECK(!HttpChatBackend::extract_content("not json"));
  CHECK(!HttpChatBackend::extract_content("[]"));
  CHECK(!HttpChatBackend::extract_content(R"({"choices":[]})"));
  CHECK(!HttpChatBackend::extract_content(R"({"choices":[{"message":{}}]})"));
  CHECK(!HttpChatBackend::extract_content(R"({"choices":[{"message":{"content":3}}]})"));
}

TEST_CASE("request body follows the wrapper") {
  HttpChatBackend b(http_config("http://127.0.0.1:1"));
  const Document d = one_doc();
  PromptSpec plain = imdb_base_spec();
  plain.wrapper = ChatWrapper::kPlainMessages;
  json body = b.request_body(render(plain, d), plain);
  CHECK(body.at("model") == "llama-2-70b-chat");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("max_tokens") == 8);
  CHECK(body.at("messages").size() == render(plain, d).messages.size());
  CHECK(body.at("messages")[0].at("role") == "system");

  PromptSpec inst = imdb_base_spec();
  inst.wrapper = ChatWrapper::kLlama2Inst;
  body = b.request_body(render(inst, d), inst);
  REQUIRE(body.at("messages").size() == 1);
  CHECK(body.at("messages")[0].at("role") == "user");
  CHECK(body.at("messages")[0].at("content") == render(inst, d).flat_text);
}

TEST_CASE("base url validation") {
  CHECK_THROWS_AS(HttpChatBackend(http_config("ftp://x")), Error);
  CHECK_THROWS_AS(HttpChatBackend(http_config("localhost:8000")), Error);
  CHECK_THROWS_AS(HttpChatBackend(http_config("")), Error);
}

TEST_CASE("http backend round trip, bearer header, and status mapping") {
  FakeServer server;
  setenv("LLB_TEST_HTTP_KEY", "sk-test", 1);
  HttpChatBackend b(http_config(server.base_url()));
  const Document d = one_doc();
  const PromptSpec spec = imdb_base_spec();
  const RenderedPrompt p = render(spec, d);

  BackendReply r = b.complete(p, d, spec);
  CHECK(r.status == BackendReply::Status::kOk);
  CHECK(r.text == "positive");
  CHECK(server.auth.back() == "Bearer sk-test");
  CHECK(json::parse(server.bodies.back()) == b.request_body(p, spec));

  server.statuses = {200, 429, 503, 400};
  CHECK(b.complete(p, d, spec).status == BackendReply::Status::kTransport);
  CHECK(b.complete(p, d, spec).status == BackendReply::Status::kTransport);
  CHECK(b.complete(p, d, spec).status == BackendReply::Status::kProtocol);

  server.reply_body = "{\"choices\":\"garbled\"}";
  r = b.complete(p, d, spec);
  CHECK(r.status == BackendReply::Status::kProtocol);
  CHECK(r.detail == "malformed completion body");

  unsetenv("LLB_TEST_HTTP_KEY");
  server.reply_body = R"({"choices":[{"message":{"content":"negative"}}]})";
  CHECK(b.complete(p, d, spec).text == "negative");
  CHECK(server.auth.back().empty());
}

TEST_CASE("annotate retries 429 and 5xx until the endpoint answers") {
  FakeServer server;
  server.statuses = {429, 500, 502};
  BackendConfig cfg = http_config(server.base_url());
  HttpChatBackend b(cfg);
  Corpus c("imdb", kImdbLabels);
  c.add(one_doc());
  ResponseCache cache;
  std::vector<long> sleeps;
  const auto res = label_subset({"d1"}, c, imdb_base_spec(), b, cache,
                                [&](std::chrono::milliseconds ms) { sleeps.push_back(ms.count()); });
  CHECK(server.bodies.size() == 4);
  CHECK(sleeps == std::vector<long>{500, 1000, 2000});
  CHECK(res.labels.size() == 1);
  CHECK(res.labels.records().at("d1").model == "llama-2-70b-chat");

  // a closed port is a transport failure that becomes a discard
  BackendConfig dead = http_config("http://127.0.0.1:1");
  dead.retry.max_attempts = 2;
  dead.timeout_seconds = 1;
  HttpChatBackend down(dead);
  ResponseCache fresh;
  const auto none = label_subset({"d1"}, c, imdb_base_spec(), down, fresh, [](auto) {});
  CHECK(none.labels.discards().at("d1") == "transport");
}
