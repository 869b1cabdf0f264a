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

// Model backends: the responder under test, the captioner that projects
// non-text content into text, and the semantic-equivalence judge.
//
// Three transports are provided:
//   http_chat  chat-completions JSON over HTTP(S); images go as base64
//              data-URL content parts, other attachments are rejected.
//   command    an external program: argv = [program, args..., content_path,
//              prompt_path]; stdout is the result text or a path to an output
//              file; exit status 0 means success.
//   mock       a deterministic script (see MockBackend) for tests and demos.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mmuq/media.hpp"
#include "mmuq/perturb.hpp"

namespace mmuq {

enum class BackendKind { kHttpChat, kCommand, kMock };

std::string_view backend_kind_name(BackendKind kind);

inline constexpr std::string_view kDefaultJudgeTemplate =
    "Question: {Q}\nAnswer A: {A}\nAnswer B: {B}\n"
    "Do these two answers convey the same meaning? Reply yes or no.";
inline constexpr std::string_view kDefaultCaptionPrompt =
    "Describe the key content of the attached input in one concise sentence.";
inline constexpr std::string_view kDefaultRephraseTemplate =
    "Rephrase the following text without changing its meaning. "
    "Reply with the rephrased text only.\n\n{X}";

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_base_ms = 250;  // delay before retry k is base * 2^(k-1)
};

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string base_url;
  std::string model_name;
  std::string api_key_env;  // name of the variable, never the key itself
  double temperature = 0.0;
  double timeout_s = 60.0;
  int max_inflight = 4;
  RetryPolicy retry;

  std::string program;  // command adapter
  std::vector<std::string> args;

  nlohmann::json mock = nlohmann::json::object();  // mock script
  std::uint64_t seed = 0;

  std::string judge_template{kDefaultJudgeTemplate};
  std::string caption_prompt{kDefaultCaptionPrompt};
  std::string rephrase_template{kDefaultRephraseTemplate};
};

// Throws Error{kConfigError} naming the offending field.
void validate(const BackendConfig& cfg);

// Per-request knobs. sample_index and applied describe the perturbed prompt
// being answered; real transports ignore them.
struct RequestContext {
  std::optional<double> temperature;
  std::optional<int> sample_index;
  std::vector<AppliedPerturbation> applied;
};

struct ModelResponse {
  std::map<Modality, Content> outputs;
  nlohmann::json raw;
  double latency_ms = 0.0;

  // The text output; throws Error{kProtocolError} if there is none.
  const std::string& text() const;
};

// Caps concurrent requests; shared by every caller of one backend.
class InflightLimiter {
 public:
  explicit InflightLimiter(int max_inflight);

  class Slot {
   public:
    explicit Slot(InflightLimiter& limiter);
    ~Slot();
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InflightLimiter& limiter_;
  };

  int peak() const;

 private:
  const int max_;
  int active_ = 0;
  int peak_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

class Backend {
 public:
  explicit Backend(BackendConfig cfg);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendConfig& config() const { return cfg_; }

  ModelResponse respond(const PromptBundle& bundle,
                        const RequestContext& ctx = {});

  // Text passes through unchanged; a blank caption is Error{kEmptyCaption}.
  TextContent caption(const Content& content);

  // Identical answers short-circuit to true without a backend call.
  bool judge_equivalence(const std::string& question, const std::string& a,
                         const std::string& b);

  std::string rephrase(const std::string& text, double temperature);

 protected:
  virtual ModelResponse do_respond(const PromptBundle& bundle,
                                   const RequestContext& ctx) = 0;
  virtual std::string do_caption(const Content& content);
  virtual bool do_judge(const std::string& question, const std::string& a,
                        const std::string& b);

  InflightLimiter& limiter() { return limiter_; }

 private:
  BackendConfig cfg_;
  InflightLimiter limiter_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

// Lowercase, ASCII punctuation removed, whitespace collapsed and trimmed.
std::string normalize_answer(std::string_view s);

// Leading "yes"/"no" token, case-insensitive; else Error{kUnparseableVerdict}.
bool parse_verdict(std::string_view reply);

// Replaces each {KEY} in tmpl with the mapped value.
std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values);

std::string base64_encode(std::string_view bytes);

// Deterministic stand-in content the mock generates for a non-text answer.
Content synthesize_content(Modality modality, const std::string& label);

// Mock script (BackendConfig::mock):
//   {"rules": [{"match": "what color",   // all normalized words must appear
//               "initial": "blue",       // answer without a sample index
//               "samples": ["blue", ...],// answer for sample i (mod size)
//               "aligned": "blue",       // answer when all applied degrees agree
//               "misaligned": "guess",   // otherwise (suffixed by the degrees)
//               "revised": "red",        // answer to a revision prompt
//               "finish_above": 0.5,     // say "Finish." once a prior step's
//                                        // uncertainty exceeds this
//               "output": "image",       // synthesize non-text output
//               "fail": true}],          // always TransportError
//    "default": "unknown",
//    "labels": ["a red cube"],           // extra caption candidates
//    "captions": {"<content hash hex>": "caption"}}
// The judge compares normalize_answer() of both sides.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendConfig cfg);

 protected:
  ModelResponse do_respond(const PromptBundle& bundle,
                           const RequestContext& ctx) override;
  std::string do_caption(const Content& content) override;
  bool do_judge(const std::string& question, const std::string& a,
                const std::string& b) override;

 private:
  const nlohmann::json* match_rule(const std::string& prompt) const;
};

class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(BackendConfig cfg);

  // Builds the chat-completions request body for a bundle.
  nlohmann::json build_request(const PromptBundle& bundle,
                               double temperature) const;
  // Extracts choices[0].message.content; Error{kProtocolError} otherwise.
  static std::string parse_reply(const nlohmann::json& body);

 protected:
  ModelResponse do_respond(const PromptBundle& bundle,
                           const RequestContext& ctx) override;

 private:
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path prefix before /chat/completions
};

class CommandBackend final : public Backend {
 public:
  explicit CommandBackend(BackendConfig cfg);

  struct Result {
    int exit_status = 0;
    std::string stdout_text;
  };
  // Runs argv with the configured timeout, capturing stdout.
  static Result run_process(const std::vector<std::string>& argv,
                            double timeout_s);

 protected:
  ModelResponse do_respond(const PromptBundle& bundle,
                           const RequestContext& ctx) override;
  std::string do_caption(const Content& content) override;
  bool do_judge(const std::string& question, const std::string& a,
                const std::string& b) override;

 private:
  std::string invoke(const std::filesystem::path& content_path,
                     const std::filesystem::path& prompt_path);
};

struct BackendRoleSet {
  BackendConfig responder;
  std::optional<BackendConfig> captioner;
  std::optional<BackendConfig> judge;
  std::optional<BackendConfig> grader;
};

// Live backends for a role set; absent roles stay null.
struct Backends {
  std::unique_ptr<Backend> responder;
  std::unique_ptr<Backend> captioner;
  std::unique_ptr<Backend> judge;
  std::unique_ptr<Backend> grader;
};

Backends make_backends(const BackendRoleSet& roles);

}  // namespace mmuq
