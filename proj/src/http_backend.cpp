/*
 * Copyright 2026 The mmuq Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "mmuq/backends.hpp"
#include "mmuq/error.hpp"

namespace mmuq {
namespace {

bool is_transient(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : Backend(std::move(cfg)) {
  const std::string& url = config().base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "base_url: missing scheme in '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  // Fail before any request when the key is absent.
  if (!config().api_key_env.empty()) {
    const char* v = std::getenv(config().api_key_env.c_str());
    if (v == nullptr || *v == '\0') {
      throw Error(ErrorCode::kAuthError,
                  "environment variable " + config().api_key_env + " is not set");
    }
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.starts_with("https://")) {
    throw Error(ErrorCode::kConfigError, "base_url: built without TLS support");
  }
#endif
}

nlohmann::json HttpChatBackend::build_request(const PromptBundle& bundle,
                                              double temperature) const {
  nlohmann::json content;
  if (bundle.attachments.empty()) {
    content = bundle.text.text;
  } else {
    content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", bundle.text.text}});
    for (const auto& [m, c] : bundle.attachments) {
      if (m != Modality::kImage) {
        throw Error(ErrorCode::kUnsupportedModality,
                    "http_chat cannot carry " + std::string(modality_name(m)) +
                        " attachments; caption them or use the command adapter");
      }
      const std::string png = encode_png(std::get<ImageContent>(c));
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:image/png;base64," + base64_encode(png)}}}});
    }
  }
  return {{"model", config().model_name},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
          {"temperature", temperature}};
}

std::string HttpChatBackend::parse_reply(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() ||
      body["choices"].empty()) {
    throw Error(ErrorCode::kProtocolError, "reply has no choices");
  }
  const auto& choice = body["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content")) {
    throw Error(ErrorCode::kProtocolError, "reply choice has no message content");
  }
  const auto& content = choice["message"]["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text" && part.contains("text")) {
        text += part["text"].get<std::string>();
      }
    }
    return text;
  }
  throw Error(ErrorCode::kProtocolError, "reply content is neither string nor parts");
}

ModelResponse HttpChatBackend::do_respond(const PromptBundle& bundle,
                                          const RequestContext& ctx) {
  const BackendConfig& cfg = config();
  std::string key;
  if (!cfg.api_key_env.empty()) {
    const char* v = std::getenv(cfg.api_key_env.c_str());
    if (v == nullptr || *v == '\0') {
      throw Error(ErrorCode::kAuthError,
                  "environment variable " + cfg.api_key_env + " is not set");
    }
    key = v;
  }
  const std::string body =
      build_request(bundle, ctx.temperature.value_or(cfg.temperature)).dump();
  httplib::Headers headers;
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
  std::string last_error;
  for (int attempt = 1; attempt <= cfg.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          static_cast<long long>(cfg.retry.backoff_base_ms) << (attempt - 2)));
    }
    httplib::Result res;
    {
      InflightLimiter::Slot slot(limiter());
      httplib::Client client(host_);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      res = client.Post(prefix_ + "/chat/completions", headers, body, "application/json");
    }
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::kAuthError,
                  "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (is_transient(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::kBackendError,
                  "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kProtocolError, std::string("unparseable reply: ") + e.what());
    }
    ModelResponse r;
    r.outputs.emplace(Modality::kText, TextContent{parse_reply(parsed)});
    r.raw = std::move(parsed);
    return r;
  }
  throw Error(ErrorCode::kTransportError,
              "giving up after " + std::to_string(cfg.retry.max_attempts) +
                  " attempts; last error " + last_error);
}

}  // namespace mmuq
