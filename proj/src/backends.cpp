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

#include "mmuq/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "mmuq/error.hpp"
#include "mmuq/prompts.hpp"

namespace mmuq {

std::string_view backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHttpChat: return "http_chat";
    case BackendKind::kCommand: return "command";
    case BackendKind::kMock: return "mock";
  }
  return "mock";
}

void validate(const BackendConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kConfigError, field + ": " + why);
  };
  if (cfg.max_inflight < 1) fail("max_inflight", "must be >= 1");
  if (!(cfg.temperature >= 0.0)) fail("temperature", "must be >= 0");
  if (!(cfg.timeout_s > 0.0)) fail("timeout", "must be > 0");
  if (cfg.retry.max_attempts < 1) fail("retry/max_attempts", "must be >= 1");
  if (cfg.retry.backoff_base_ms < 0) fail("retry/backoff_base_ms", "must be >= 0");
  if (cfg.kind == BackendKind::kHttpChat && cfg.base_url.empty()) {
    fail("base_url", "required for http_chat");
  }
  if (cfg.kind == BackendKind::kCommand && cfg.program.empty()) {
    fail("program", "required for command");
  }
}

const std::string& ModelResponse::text() const {
  const auto it = outputs.find(Modality::kText);
  if (it == outputs.end()) {
    throw Error(ErrorCode::kProtocolError, "response carries no text output");
  }
  return std::get<TextContent>(it->second).text;
}

// --- limiter ---

InflightLimiter::InflightLimiter(int max_inflight)
    : max_(std::max(max_inflight, 1)) {}

InflightLimiter::Slot::Slot(InflightLimiter& limiter) : limiter_(limiter) {
  std::unique_lock lock(limiter_.mu_);
  limiter_.cv_.wait(lock, [this] { return limiter_.active_ < limiter_.max_; });
  ++limiter_.active_;
  limiter_.peak_ = std::max(limiter_.peak_, limiter_.active_);
}

InflightLimiter::Slot::~Slot() {
  {
    std::lock_guard lock(limiter_.mu_);
    --limiter_.active_;
  }
  limiter_.cv_.notify_one();
}

int InflightLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

// --- Backend ---

Backend::Backend(BackendConfig cfg)
    : cfg_(std::move(cfg)), limiter_(cfg_.max_inflight) {
  validate(cfg_);
}

ModelResponse Backend::respond(const PromptBundle& bundle,
                               const RequestContext& ctx) {
  const auto start = std::chrono::steady_clock::now();
  ModelResponse r = do_respond(bundle, ctx);
  if (r.outputs.empty()) {
    throw Error(ErrorCode::kProtocolError, "response has no outputs");
  }
  r.latency_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return r;
}

TextContent Backend::caption(const Content& content) {
  if (const auto* t = std::get_if<TextContent>(&content)) return *t;
  std::string c = do_caption(content);
  const auto first = c.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    throw Error(ErrorCode::kEmptyCaption,
                std::string(modality_name(modality_of(content))) +
                    " captioner returned a blank caption");
  }
  const auto last = c.find_last_not_of(" \t\r\n");
  return {c.substr(first, last - first + 1)};
}

bool Backend::judge_equivalence(const std::string& question,
                                const std::string& a, const std::string& b) {
  if (a == b) return true;
  return do_judge(question, a, b);
}

std::string Backend::rephrase(const std::string& text, double temperature) {
  PromptBundle p;
  p.text.text = fill_template(cfg_.rephrase_template, {{"X", text}});
  RequestContext ctx;
  ctx.temperature = temperature;
  std::string out = respond(p, ctx).text();
  const auto first = out.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return out.substr(first, out.find_last_not_of(" \t\r\n") - first + 1);
}

std::string Backend::do_caption(const Content& content) {
  PromptBundle p;
  p.text.text = cfg_.caption_prompt;
  p.attachments.emplace(modality_of(content), content);
  return respond(p).text();
}

bool Backend::do_judge(const std::string& question, const std::string& a,
                       const std::string& b) {
  PromptBundle p;
  p.text.text =
      fill_template(cfg_.judge_template, {{"Q", question}, {"A", a}, {"B", b}});
  return parse_verdict(respond(p).text());
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  switch (cfg.kind) {
    case BackendKind::kHttpChat: return std::make_unique<HttpChatBackend>(cfg);
    case BackendKind::kCommand: return std::make_unique<CommandBackend>(cfg);
    case BackendKind::kMock: return std::make_unique<MockBackend>(cfg);
  }
  throw Error(ErrorCode::kConfigError, "unknown backend kind");
}

Backends make_backends(const BackendRoleSet& roles) {
  Backends b;
  b.responder = make_backend(roles.responder);
  if (roles.captioner) b.captioner = make_backend(*roles.captioner);
  if (roles.judge) b.judge = make_backend(*roles.judge);
  if (roles.grader) b.grader = make_backend(*roles.grader);
  return b;
}

// --- text helpers ---

std::string normalize_answer(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool parse_verdict(std::string_view reply) {
  std::size_t i = 0;
  while (i < reply.size() && !std::isalnum(static_cast<unsigned char>(reply[i]))) ++i;
  std::size_t j = i;
  while (j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]))) ++j;
  std::string token(reply.substr(i, j - i));
  std::transform(token.begin(), token.end(), token.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (token == "yes") return true;
  if (token == "no") return false;
  throw Error(ErrorCode::kUnparseableVerdict,
              "judge reply starts with neither yes nor no: '" +
                  std::string(reply.substr(0, 80)) + "'");
}

std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{static_cast<unsigned char>(bytes[i])} << 16) |
                            (std::uint32_t{static_cast<unsigned char>(bytes[i + 1])} << 8) |
                            static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t{static_cast<unsigned char>(bytes[i])} << 16;
    if (rest == 2) v |= std::uint32_t{static_cast<unsigned char>(bytes[i + 1])} << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

Content synthesize_content(Modality modality, const std::string& label) {
  const std::uint64_t h = content_hash(TextContent{label});
  switch (modality) {
    case Modality::kText:
      return TextContent{label};
    case Modality::kImage:
    case Modality::kVideo: {
      ImageContent img{4, 4, {}};
      for (int i = 0; i < 16; ++i) {
        img.pixels.push_back(static_cast<std::uint8_t>(h >> 0));
        img.pixels.push_back(static_cast<std::uint8_t>(h >> 8));
        img.pixels.push_back(static_cast<std::uint8_t>(h >> 16));
      }
      if (modality == Modality::kImage) return img;
      return VideoContent{10.0, {img, img}};
    }
    case Modality::kAudio: {
      AudioContent a{8000, {}};
      const double cycles = 1.0 + static_cast<double>(h % 7);
      for (int i = 0; i < 64; ++i) {
        const double s = 0.5 * std::sin(2.0 * 3.141592653589793 * cycles * i / 64.0);
        a.samples.push_back(pcm_to_float(float_to_pcm(static_cast<float>(s))));
      }
      return a;
    }
    case Modality::kPointCloud: {
      PointCloudContent pc;
      const double scale = 1.0 + static_cast<double>(h % 100) / 100.0;
      for (int i = 0; i < 8; ++i) {
        pc.points.push_back({scale * (i & 1), scale * ((i >> 1) & 1), scale * ((i >> 2) & 1)});
      }
      return pc;
    }
  }
  return TextContent{label};
}

// --- mock ---

namespace {

std::set<std::string> word_set(const std::string& s) {
  std::set<std::string> words;
  const std::string norm = normalize_answer(s);
  std::size_t i = 0;
  while (i < norm.size()) {
    const auto j = norm.find(' ', i);
    const auto end = j == std::string::npos ? norm.size() : j;
    words.insert(norm.substr(i, end - i));
    i = end + 1;
  }
  return words;
}

std::optional<double> max_step_uncertainty(const std::string& prompt) {
  std::optional<double> best;
  std::size_t pos = 0;
  while ((pos = prompt.find(kCotUncertaintyTag, pos)) != std::string::npos) {
    pos += kCotUncertaintyTag.size();
    try {
      const double u = std::stod(prompt.substr(pos, 16));
      best = best ? std::max(*best, u) : u;
    } catch (const std::exception&) {
    }
  }
  return best;
}

std::string str_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

}  // namespace

MockBackend::MockBackend(BackendConfig cfg) : Backend(std::move(cfg)) {
  const auto& m = config().mock;
  if (!m.is_object()) throw Error(ErrorCode::kConfigError, "mock: must be an object");
  if (m.contains("rules") && !m["rules"].is_array()) {
    throw Error(ErrorCode::kConfigError, "mock/rules: must be an array");
  }
}

const nlohmann::json* MockBackend::match_rule(const std::string& prompt) const {
  const auto& m = config().mock;
  if (!m.contains("rules")) return nullptr;
  const auto words = word_set(prompt);
  for (const auto& rule : m["rules"]) {
    bool all = true;
    for (const auto& w : word_set(str_field(rule, "match"))) {
      if (!words.contains(w)) {
        all = false;
        break;
      }
    }
    if (all) return &rule;
  }
  return nullptr;
}

ModelResponse MockBackend::do_respond(const PromptBundle& bundle,
                                      const RequestContext& ctx) {
  InflightLimiter::Slot slot(limiter());
  const auto& script = config().mock;
  const std::string& prompt = bundle.text.text;
  const nlohmann::json* rule = match_rule(prompt);

  std::string answer = script.contains("default") ? script["default"].get<std::string>()
                                                   : std::string("unknown");
  std::string reason = "default";
  Modality out_modality = Modality::kText;
  if (rule) {
    if (rule->value("fail", false)) {
      throw Error(ErrorCode::kTransportError,
                  "mock rule '" + str_field(*rule, "match") + "' always fails");
    }
    if (rule->contains("output")) out_modality = parse_modality(str_field(*rule, "output"));
    const bool revision = prompt.find(kRevisionMarker) != std::string::npos;
    const auto finish_above = rule->find("finish_above");
    reason = "initial";
    if (revision && rule->contains("revised")) {
      answer = str_field(*rule, "revised");
      reason = "revised";
    } else if (ctx.sample_index && (rule->contains("aligned") || rule->contains("misaligned"))) {
      bool aligned = true;
      std::string degrees;
      for (const auto& a : ctx.applied) {
        if (a.degree != ctx.applied.front().degree) aligned = false;
        char buf[16];
        std::snprintf(buf, sizeof(buf), " %.2f", a.degree);
        degrees += buf;
      }
      answer = aligned ? str_field(*rule, "aligned") : str_field(*rule, "misaligned") + degrees;
      reason = aligned ? "aligned" : "misaligned";
    } else if (ctx.sample_index && rule->contains("samples") && !(*rule)["samples"].empty()) {
      const auto& samples = (*rule)["samples"];
      answer = samples[static_cast<std::size_t>(*ctx.sample_index) % samples.size()];
      reason = "sample";
    } else if (finish_above != rule->end() && max_step_uncertainty(prompt).value_or(-1.0) >
                                                   finish_above->get<double>()) {
      answer = rule->contains("finish_answer") ? str_field(*rule, "finish_answer")
                                               : std::string(kCotFinishToken);
      reason = "finish";
    } else if (rule->contains("initial")) {
      answer = str_field(*rule, "initial");
    }
  }

  ModelResponse r;
  r.outputs.emplace(out_modality, synthesize_content(out_modality, answer));
  r.raw = {{"backend", "mock"}, {"answer", answer}, {"reason", reason}};
  return r;
}

std::string MockBackend::do_caption(const Content& content) {
  InflightLimiter::Slot slot(limiter());
  const auto& script = config().mock;
  const std::string hex = hex64(content_hash(content));
  if (script.contains("captions") && script["captions"].contains(hex)) {
    return script["captions"][hex].get<std::string>();
  }
  // Invert synthesize_content over the labels that this script can produce.
  const Modality m = modality_of(content);
  const std::uint64_t h = content_hash(content);
  std::vector<std::string> labels;
  if (script.contains("labels")) {
    for (const auto& l : script["labels"]) labels.push_back(l.get<std::string>());
  }
  if (script.contains("rules")) {
    for (const auto& rule : script["rules"]) {
      for (const char* key : {"initial", "revised", "aligned", "finish_answer"}) {
        if (rule.contains(key)) labels.push_back(str_field(rule, key));
      }
      if (rule.contains("samples")) {
        for (const auto& s : rule["samples"]) labels.push_back(s.get<std::string>());
      }
    }
  }
  if (script.contains("default")) labels.push_back(str_field(script, "default"));
  for (const auto& l : labels) {
    if (content_hash(synthesize_content(m, l)) == h) return l;
  }
  return std::string(modality_name(m)) + " " + hex;
}

bool MockBackend::do_judge(const std::string& /*question*/, const std::string& a,
                           const std::string& b) {
  InflightLimiter::Slot slot(limiter());
  return normalize_answer(a) == normalize_answer(b);
}

}  // namespace mmuq
