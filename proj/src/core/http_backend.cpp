// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include <httplib.h>

#include "core/annotator.hpp"

namespace llambert {

using nlohmann::json;

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.kind = BackendKind::kHttpChat;
  cfg_.validate();
  const std::string& url = cfg_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorKind::kUsage, "base_url must start with http:// or https://: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    fail(ErrorKind::kUsage, "unsupported base_url scheme: " + scheme);
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") fail(ErrorKind::kUsage, "this build has no TLS support; use http://");
#endif
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/v1/chat/completions";
}

json HttpChatBackend::request_body(const RenderedPrompt& prompt, const PromptSpec& spec) const {
  json messages = json::array();
  if (spec.wrapper == ChatWrapper::kLlama2Inst) {
    messages.push_back({{"role", "user"}, {"content", prompt.flat_text}});
  } else {
    for (const auto& m : prompt.messages) {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
  }
  return {{"model", cfg_.model_name},
          {"messages", messages},
          {"temperature", cfg_.temperature},
          {"max_tokens", cfg_.max_tokens}};
}

std::optional<std::string> HttpChatBackend::extract_content(std::string_view body) {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const json& first = (*choices)[0];
  if (!first.is_object()) return std::nullopt;
  auto msg = first.find("message");
  if (msg == first.end() || !msg->is_object()) return std::nullopt;
  auto content = msg->find("content");
  if (content == msg->end() || !content->is_string()) return std::nullopt;
  return content->get<std::string>();
}

BackendReply HttpChatBackend::complete(const RenderedPrompt& prompt, const Document&,
                                       const PromptSpec& spec) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(cfg_.timeout_seconds, 0);
  client.set_read_timeout(cfg_.timeout_seconds, 0);
  client.set_write_timeout(cfg_.timeout_seconds, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body =
      request_body(prompt, spec).dump(-1, ' ', false, json::error_handler_t::replace);
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    return {BackendReply::Status::kTransport, "", httplib::to_string(res.error())};
  }
  if (res->status == 429 || res->status >= 500) {
    return {BackendReply::Status::kTransport, "", "HTTP " + std::to_string(res->status)};
  }
  if (res->status < 200 || res->status >= 300) {
    return {BackendReply::Status::kProtocol, "", "HTTP " + std::to_string(res->status)};
  }
  auto content = extract_content(res->body);
  if (!content) return {BackendReply::Status::kProtocol, "", "malformed completion body"};
  return {BackendReply::Status::kOk, std::move(*content), ""};
}

}  // namespace llambert
