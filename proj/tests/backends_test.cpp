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

#include <gtest/gtest.h>
#include <httplib.h>
#include <sys/stat.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include "mmuq/backends.hpp"
#include "mmuq/error.hpp"
#include "mmuq/prompts.hpp"
#include "test_support.hpp"

namespace mmuq {
namespace {

using nlohmann::json;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kUnknownSubcommand;
}

PromptBundle text_prompt(const std::string& s) {
  PromptBundle b;
  b.text.text = s;
  return b;
}

BackendConfig mock_config(json script) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kMock;
  cfg.mock = std::move(script);
  return cfg;
}

// --- helpers -------------------------------------------------------------

TEST(HelpersTest, NormalizeAnswer) {
  EXPECT_EQ(normalize_answer("  Yes.  "), "yes");
  EXPECT_EQ(normalize_answer("A  Red\tCube!"), "a red cube");
  EXPECT_EQ(normalize_answer("..."), "");
}

TEST(HelpersTest, ParseVerdict) {
  EXPECT_TRUE(parse_verdict("Yes, they convey the same answer."));
  EXPECT_TRUE(parse_verdict("  yes"));
  EXPECT_FALSE(parse_verdict("No."));
  EXPECT_FALSE(parse_verdict("NO they differ"));
  EXPECT_EQ(code_of([] { parse_verdict("Maybe."); }), ErrorCode::kUnparseableVerdict);
  EXPECT_EQ(code_of([] { parse_verdict("yesterday"); }), ErrorCode::kUnparseableVerdict);
}

TEST(HelpersTest, TemplateAndBase64) {
  EXPECT_EQ(fill_template("{A}-{B}-{A}", {{"A", "x"}, {"B", "y"}}), "x-y-x");
  EXPECT_EQ(fill_template("{Q} {unknown}", {{"Q", "q"}}), "q {unknown}");
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
}

TEST(ConfigTest, Validation) {
  BackendConfig cfg;
  cfg.max_inflight = 0;
  EXPECT_EQ(code_of([&] { validate(cfg); }), ErrorCode::kConfigError);
  cfg = {};
  cfg.temperature = -1;
  EXPECT_EQ(code_of([&] { validate(cfg); }), ErrorCode::kConfigError);
  cfg = {};
  cfg.kind = BackendKind::kHttpChat;
  EXPECT_EQ(code_of([&] { validate(cfg); }), ErrorCode::kConfigError);
}

// --- mock ----------------------------------------------------------------

TEST(MockTest, LookupAndDefault) {
  MockBackend m(mock_config({{"rules", {{{"match", "what color"}, {"initial", "blue"}}}},
                             {"default", "no idea"}}));
  EXPECT_EQ(m.respond(text_prompt("What color is the sky?")).text(), "blue");
  EXPECT_EQ(m.respond(text_prompt("How tall is it?")).text(), "no idea");
}

TEST(MockTest, SamplesAlignedRevisedFail) {
  MockBackend m(mock_config(
      {{"rules",
        {{{"match", "fails"}, {"fail", true}},
         {{"match", "pairing"}, {"aligned", "same"}, {"misaligned", "other"}},
         {{"match", "sky"},
          {"initial", "green"},
          {"samples", {"blue", "blue", "sky blue"}},
          {"revised", "blue"}}}}}));
  RequestContext ctx;
  ctx.sample_index = 5;
  EXPECT_EQ(m.respond(text_prompt("color of the sky"), ctx).text(), "sky blue");
  EXPECT_EQ(m.respond(text_prompt("color of the sky")).text(), "green");
  const std::string revision =
      fill_template(kRevisionTemplate, {{"X", "color of the sky"}, {"Y", "green"}, {"U", "0.90"}});
  EXPECT_EQ(m.respond(text_prompt(revision)).text(), "blue");

  ctx.applied = {{Modality::kText, PerturbKind::kWordSwap, 0.5},
                 {Modality::kImage, PerturbKind::kImageBlur, 0.5}};
  EXPECT_EQ(m.respond(text_prompt("pairing test"), ctx).text(), "same");
  ctx.applied[1].degree = 0.25;
  EXPECT_EQ(m.respond(text_prompt("pairing test"), ctx).text(), "other 0.50 0.25");

  EXPECT_EQ(code_of([&] { m.respond(text_prompt("this fails")); }), ErrorCode::kTransportError);
}

TEST(MockTest, FinishAbove) {
  MockBackend m(mock_config(
      {{"rules", {{{"match", "puzzle"}, {"initial", "step"}, {"finish_above", 0.5}}}}}));
  EXPECT_EQ(m.respond(text_prompt("puzzle\nStep 1: a (uncertainty: 0.40)")).text(), "step");
  EXPECT_EQ(m.respond(text_prompt("puzzle\nStep 1: a (uncertainty: 0.80)")).text(),
            std::string(kCotFinishToken));
}

TEST(MockTest, GenerationAndCaptions) {
  MockBackend m(mock_config({{"rules", {{{"match", "draw"}, {"initial", "a red cube"},
                                         {"output", "image"}}}}}));
  const ModelResponse r = m.respond(text_prompt("draw a cube"));
  ASSERT_EQ(r.outputs.count(Modality::kImage), 1u);
  EXPECT_EQ(code_of([&] { (void)r.text(); }), ErrorCode::kProtocolError);
  EXPECT_EQ(m.caption(r.outputs.at(Modality::kImage)).text, "a red cube");

  const Content img = testing::uniform_image(2, 2, 9);
  const std::string h = hex64(content_hash(img));
  MockBackend c(mock_config({{"captions", {{h, "a red cube on a table"}}}}));
  EXPECT_EQ(c.caption(img).text, "a red cube on a table");
  EXPECT_EQ(c.caption(TextContent{"as is"}).text, "as is");
  EXPECT_EQ(c.caption(testing::uniform_image(2, 2, 10)).text.rfind("image ", 0), 0u);
  MockBackend blank(mock_config({{"captions", {{h, "   "}}}}));
  EXPECT_EQ(code_of([&] { blank.caption(img); }), ErrorCode::kEmptyCaption);
}

TEST(MockTest, SynthesizedContentIsValidAndDistinct) {
  for (Modality m : {Modality::kImage, Modality::kAudio, Modality::kVideo, Modality::kPointCloud}) {
    const Content a = synthesize_content(m, "x");
    EXPECT_NO_THROW(validate(a));
    EXPECT_EQ(modality_of(a), m);
    EXPECT_EQ(a, synthesize_content(m, "x"));
    EXPECT_NE(content_hash(a), content_hash(synthesize_content(m, "y")));
  }
}

TEST(MockTest, JudgeNormalizesAndIsPure) {
  MockBackend m(mock_config(json::object()));
  EXPECT_TRUE(m.judge_equivalence("q", "Yes.", "yes"));
  EXPECT_FALSE(m.judge_equivalence("q", "yes", "no"));
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(m.judge_equivalence("q", "A b", "a  B"));
}

TEST(MockTest, DoesNotMutateBundle) {
  MockBackend m(mock_config({{"default", "x"}}));
  PromptBundle b = text_prompt("hello");
  b.attachments[Modality::kImage] = testing::uniform_image(1, 1, 3);
  const PromptBundle copy = b;
  m.respond(b);
  EXPECT_EQ(b, copy);
}

// --- http ----------------------------------------------------------------

class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  explicit FakeServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& q, httplib::Response& r) {
      ++requests;
      const int now = ++active_;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      handler_(q, r);
      --active_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::atomic<int> requests{0};
  std::atomic<int> peak{0};

 private:
  Handler handler_;
  httplib::Server server_;
  std::atomic<int> active_{0};
  int port_ = 0;
  std::thread thread_;
};

std::string reply(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

BackendConfig http_config(const std::string& url, int attempts = 3) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kHttpChat;
  cfg.base_url = url;
  cfg.model_name = "test-model";
  cfg.api_key_env = "MMUQ_TEST_API_KEY";
  cfg.temperature = 0.7;
  cfg.timeout_s = 5;
  cfg.retry = {attempts, 1};
  return cfg;
}

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override { setenv("MMUQ_TEST_API_KEY", "secret-token", 1); }
  void TearDown() override { unsetenv("MMUQ_TEST_API_KEY"); }
};

TEST_F(HttpTest, CannedReplyAndWireFormat) {
  json seen;
  std::string auth;
  FakeServer srv([&](const httplib::Request& q, httplib::Response& r) {
    seen = json::parse(q.body);
    auth = q.get_header_value("Authorization");
    r.set_content(reply("blue"), "application/json");
  });
  HttpChatBackend b(http_config(srv.url()));
  RequestContext ctx;
  ctx.temperature = 0.1;
  EXPECT_EQ(b.respond(text_prompt("what color?"), ctx).text(), "blue");
  EXPECT_EQ(auth, "Bearer secret-token");
  EXPECT_EQ(seen["model"], "test-model");
  EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.1);
  EXPECT_EQ(seen["messages"][0]["content"], "what color?");
}

TEST_F(HttpTest, ImagesGoAsDataUrlParts) {
  HttpChatBackend b(http_config("http://127.0.0.1:9/v1"));
  PromptBundle p = text_prompt("describe");
  p.attachments[Modality::kImage] = testing::uniform_image(2, 2, 5);
  const json body = b.build_request(p, 0.3);
  const auto& parts = body["messages"][0]["content"];
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0]["type"], "text");
  EXPECT_EQ(parts[1]["type"], "image_url");
  const std::string url = parts[1]["image_url"]["url"];
  EXPECT_EQ(url.rfind("data:image/png;base64,", 0), 0u);
  PromptBundle audio = text_prompt("listen");
  audio.attachments[Modality::kAudio] = AudioContent{8000, {0.0f}};
  EXPECT_EQ(code_of([&] { b.build_request(audio, 0.3); }), ErrorCode::kUnsupportedModality);
}

TEST_F(HttpTest, RetriesTransientFailures) {
  std::atomic<int> n{0};
  FakeServer srv([&](const httplib::Request&, httplib::Response& r) {
    if (n++ < 2) {
      r.status = 503;
      return;
    }
    r.set_content(reply("ok"), "application/json");
  });
  HttpChatBackend three(http_config(srv.url(), 3));
  EXPECT_EQ(three.respond(text_prompt("q")).text(), "ok");
  EXPECT_EQ(srv.requests.load(), 3);

  n = 0;
  HttpChatBackend two(http_config(srv.url(), 2));
  EXPECT_EQ(code_of([&] { two.respond(text_prompt("q")); }), ErrorCode::kTransportError);
  EXPECT_EQ(srv.requests.load(), 5);
}

TEST_F(HttpTest, AuthErrors) {
  FakeServer srv([](const httplib::Request&, httplib::Response& r) { r.status = 401; });
  HttpChatBackend b(http_config(srv.url()));
  EXPECT_EQ(code_of([&] { b.respond(text_prompt("q")); }), ErrorCode::kAuthError);
  EXPECT_EQ(srv.requests.load(), 1);

  unsetenv("MMUQ_TEST_API_KEY");
  try {
    b.respond(text_prompt("q"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAuthError);
    EXPECT_NE(std::string(e.what()).find("MMUQ_TEST_API_KEY"), std::string::npos);
  }
  EXPECT_EQ(srv.requests.load(), 1);
}

TEST_F(HttpTest, ProtocolAndClientErrors) {
  std::atomic<int> mode{0};
  FakeServer srv([&](const httplib::Request&, httplib::Response& r) {
    if (mode == 0) r.set_content("not json", "application/json");
    if (mode == 1) r.set_content(R"({"choices": []})", "application/json");
    if (mode == 2) r.status = 400;
  });
  HttpChatBackend b(http_config(srv.url()));
  EXPECT_EQ(code_of([&] { b.respond(text_prompt("q")); }), ErrorCode::kProtocolError);
  mode = 1;
  EXPECT_EQ(code_of([&] { b.respond(text_prompt("q")); }), ErrorCode::kProtocolError);
  mode = 2;
  EXPECT_EQ(code_of([&] { b.respond(text_prompt("q")); }), ErrorCode::kBackendError);
}

TEST_F(HttpTest, TransportFailureWhenNothingListens) {
  HttpChatBackend b(http_config("http://127.0.0.1:1/v1", 2));
  EXPECT_EQ(code_of([&] { b.respond(text_prompt("q")); }), ErrorCode::kTransportError);
}

TEST_F(HttpTest, InflightCapHolds) {
  FakeServer srv([](const httplib::Request&, httplib::Response& r) {
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    r.set_content(reply("x"), "application/json");
  });
  BackendConfig cfg = http_config(srv.url());
  cfg.max_inflight = 2;
  HttpChatBackend b(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { b.respond(text_prompt("q")); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(srv.requests.load(), 8);
  EXPECT_LE(srv.peak.load(), 2);
  EXPECT_GE(srv.peak.load(), 1);
}

TEST_F(HttpTest, JudgeParsesLeadingToken) {
  std::atomic<int> mode{0};
  std::string prompt;
  FakeServer srv([&](const httplib::Request& q, httplib::Response& r) {
    prompt = json::parse(q.body)["messages"][0]["content"];
    r.set_content(reply(mode == 0 ? "Yes, they convey the same answer." : "Perhaps"),
                  "application/json");
  });
  HttpChatBackend b(http_config(srv.url()));
  EXPECT_TRUE(b.judge_equivalence("Which color?", "blue", "navy"));
  EXPECT_NE(prompt.find("Question: Which color?\nAnswer A: blue\nAnswer B: navy"),
            std::string::npos);
  mode = 1;
  EXPECT_EQ(code_of([&] { b.judge_equivalence("q", "a", "b"); }),
            ErrorCode::kUnparseableVerdict);
  const int before = srv.requests.load();
  EXPECT_TRUE(b.judge_equivalence("q", "same", "same"));
  EXPECT_EQ(srv.requests.load(), before);
}

// --- command adapter -----------------------------------------------------

std::string script(const testing::TempDir& dir, const std::string& name, const std::string& body) {
  const auto p = dir / name;
  write_file(p, "#!/bin/sh\n" + body + "\n");
  chmod(p.c_str(), 0755);
  return p.string();
}

BackendConfig command_config(const std::string& program) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kCommand;
  cfg.program = program;
  cfg.timeout_s = 5;
  return cfg;
}

TEST(CommandTest, CaptionFromStdout) {
  testing::TempDir dir;
  CommandBackend b(command_config(script(dir, "cap.sh",
                                         "test -f \"$1\" || exit 3\necho '  a red cube on a table '")));
  EXPECT_EQ(b.caption(testing::uniform_image(2, 2, 1)).text, "a red cube on a table");
}

TEST(CommandTest, NonzeroExitIsError) {
  testing::TempDir dir;
  CommandBackend b(command_config(script(dir, "bad.sh", "echo oops; exit 4")));
  EXPECT_EQ(code_of([&] { b.respond(text_prompt("q")); }), ErrorCode::kBackendError);
}

TEST(CommandTest, ArgvLayoutAndPromptFile) {
  testing::TempDir dir;
  BackendConfig cfg = command_config(script(dir, "args.sh", "echo \"$# $1 $(cat \"$3\")\""));
  cfg.args = {"--flag"};
  CommandBackend b(cfg);
  EXPECT_EQ(b.respond(text_prompt("hello there")).text().substr(0, 9), "3 --flag ");
  EXPECT_NE(b.respond(text_prompt("hello there")).text().find("hello there"), std::string::npos);
}

TEST(CommandTest, OutputFileBecomesContent) {
  testing::TempDir dir;
  const auto out = dir / "gen.xyz";
  write_file(out, "0 0 0\n1 1 1\n");
  CommandBackend b(command_config(script(dir, "gen.sh", "echo " + out.string())));
  const ModelResponse r = b.respond(text_prompt("make a cloud"));
  ASSERT_EQ(r.outputs.count(Modality::kPointCloud), 1u);
  EXPECT_EQ(std::get<PointCloudContent>(r.outputs.at(Modality::kPointCloud)).points.size(), 2u);
}

TEST(CommandTest, AttachmentPathIsPassed) {
  testing::TempDir dir;
  CommandBackend b(command_config(script(dir, "att.sh", "case \"$1\" in *.wav) echo wav;; *) echo other;; esac")));
  PromptBundle p = text_prompt("listen");
  p.attachments[Modality::kAudio] = AudioContent{8000, {0.0f, 0.5f}};
  EXPECT_EQ(b.respond(p).text(), "wav");
}

TEST(CommandTest, JudgeAndTimeout) {
  testing::TempDir dir;
  CommandBackend yes(command_config(script(dir, "judge.sh", "echo 'yes, same'")));
  EXPECT_TRUE(yes.judge_equivalence("q", "a", "b"));
  BackendConfig slow = command_config(script(dir, "slow.sh", "sleep 5; echo late"));
  slow.timeout_s = 0.2;
  CommandBackend s(slow);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { s.respond(text_prompt("q")); }), ErrorCode::kTransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
}

TEST(RolesTest, MakeBackends) {
  BackendRoleSet roles;
  roles.responder = mock_config({{"default", "x"}});
  roles.judge = mock_config(json::object());
  Backends b = make_backends(roles);
  ASSERT_TRUE(b.responder);
  ASSERT_TRUE(b.judge);
  EXPECT_FALSE(b.captioner);
  EXPECT_FALSE(b.grader);
}

}  // namespace
}  // namespace mmuq
