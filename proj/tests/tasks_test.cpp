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
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <cmath>
#include <functional>

#include "mmuq/config.hpp"
#include "mmuq/error.hpp"
#include "mmuq/metrics.hpp"
#include "mmuq/prompts.hpp"
#include "mmuq/records.hpp"
#include "mmuq/tasks.hpp"
#include "test_support.hpp"

namespace mmuq {
namespace {

using nlohmann::json;
using testing::fixture;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kUnknownSubcommand;
}

// Entropy of a count vector, evaluated in 50-digit arithmetic.
double oracle_u(const std::vector<int>& counts) {
  using Big = boost::multiprecision::cpp_dec_float_50;
  Big n = 0, h = 0;
  for (int c : counts) n += c;
  if (n <= 1) return 0.0;
  for (int c : counts) {
    const Big p = Big(c) / n;
    h -= p * boost::multiprecision::log(p);
  }
  return static_cast<double>(h / boost::multiprecision::log(n));
}

struct Fixture {
  explicit Fixture(const std::string& dir)
      : cfg(load_run_config(fixture(dir + "/config.json"))),
        items(load_manifest(fixture(dir + "/manifest.jsonl"))),
        backends(make_backends(cfg.roles)) {}
  RunConfig cfg;
  std::vector<DatasetItem> items;
  Backends backends;
};

// --- manifest ------------------------------------------------------------

TEST(ManifestTest, ParsesItemsAndAttachments) {
  const auto items = load_manifest(fixture("ablation/manifest.jsonl"));
  ASSERT_EQ(items.size(), 8u);
  EXPECT_EQ(items[0].id, "a00");
  EXPECT_EQ(items[0].ground_truth, "alpha answer");
  EXPECT_EQ(items[0].task_kind, TaskKind::kComprehension);
  const auto& img = std::get<ImageContent>(items[0].prompt.attachments.at(Modality::kImage));
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.pixels[0], 10);
}

TEST(ManifestTest, Rejections) {
  const std::filesystem::path base = fixture("ablation");
  auto bad = [&](const std::string& text) {
    try {
      parse_manifest(text, base);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kFormatError) << text;
      return std::string(e.what());
    }
    ADD_FAILURE() << "accepted: " << text;
    return std::string();
  };
  EXPECT_NE(bad("{\"id\":\"a\",\"text\":\"q\"}\nnot json\n").find("line 2"), std::string::npos);
  bad("{\"id\":\"a\",\"text\":\"q\"}\n{\"id\":\"a\",\"text\":\"r\"}\n");
  bad("{\"id\":\"\",\"text\":\"q\"}\n");
  bad("{\"id\":\"a\",\"text\":\"q\",\"task_kind\":\"other\"}\n");
  bad("{\"id\":\"a\",\"text\":\"q\",\"attachments\":[{\"modality\":\"text\",\"path\":\"x\"}]}\n");
  bad("{\"id\":\"a\",\"text\":\"q\",\"attachments\":[{\"modality\":\"image\",\"path\":\"tile.ppm\"},"
      "{\"modality\":\"image\",\"path\":\"tile.ppm\"}]}\n");
  bad("");
  EXPECT_EQ(code_of([&] {
              parse_manifest("{\"id\":\"a\",\"text\":\"q\",\"attachments\":"
                             "[{\"modality\":\"image\",\"path\":\"missing.png\"}]}\n",
                             base);
            }),
            ErrorCode::kMissingFile);
  const auto gen = parse_manifest("{\"id\":\"g\",\"text\":\"draw\",\"task_kind\":\"generation\"}\n\n",
                                  base);
  ASSERT_EQ(gen.size(), 1u);
  EXPECT_EQ(gen[0].task_kind, TaskKind::kGeneration);
}

// --- detect --------------------------------------------------------------

TEST(DetectTest, ScriptedPatternsGiveOracleValues) {
  Fixture f("detect");
  const auto results = detect(f.items, f.backends, f.cfg.options);
  ASSERT_EQ(results.size(), 10u);
  std::vector<DetectionRecord> records;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    ASSERT_TRUE(r.ok) << r.error;
    EXPECT_EQ(r.record.id, f.items[i].id);
    const bool halluc = i % 2 == 0;
    EXPECT_EQ(r.record.hallucination, halluc);
    EXPECT_NEAR(r.record.u, halluc ? oracle_u({3, 2}) : oracle_u({5}), 1e-9);
    records.push_back(r.record);
  }
  EXPECT_EQ(auroc(records), 1.0);
}

TEST(DetectTest, RerunsAreByteIdenticalAcrossParallelism) {
  Fixture f("detect");
  auto run = [&](int parallelism) {
    TaskOptions o = f.cfg.options;
    o.parallelism = parallelism;
    std::vector<json> rows;
    for (const auto& r : detect(f.items, f.backends, o)) rows.push_back(detection_to_json(r));
    return to_jsonl(run_meta(f.cfg), rows);
  };
  const std::string a = run(1);
  EXPECT_EQ(run(1), a);
  EXPECT_EQ(run(8), a);
}

TEST(DetectTest, FailuresAreIsolated) {
  Fixture f("partial");
  const auto results = detect(f.items, f.backends, f.cfg.options);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_TRUE(results[0].ok);
  EXPECT_FALSE(results[1].ok);
  EXPECT_NE(results[1].error.find("TransportError"), std::string::npos);
}

TEST(DetectTest, SemanticBeatsLexicalOnCaseVariants) {
  RunConfig cfg = load_run_config(fixture("ablation/yes_config.json"));
  const auto items = load_manifest(fixture("ablation/yes_manifest.jsonl"));
  Backends b = make_backends(cfg.roles);
  const double semantic = detect(items, b, cfg.options)[0].record.u;
  cfg.options.clustering = ClusteringMode::kLexical;
  const double lexical = detect(items, b, cfg.options)[0].record.u;
  EXPECT_EQ(semantic, 0.0);
  EXPECT_NEAR(lexical, oracle_u({2, 1}), 1e-12);
  EXPECT_LT(semantic, lexical);
}

TEST(DetectTest, PairingOrderAblation) {
  Fixture f("ablation");
  auto run = [&](PairingOrder order) {
    TaskOptions o = f.cfg.options;
    o.plan.pairing = order;
    std::vector<DetectionRecord> r;
    for (const auto& d : detect(f.items, f.backends, o)) r.push_back(d.record);
    return auroc(r);
  };
  const double progressive = run(PairingOrder::kProgressive);
  const double random = run(PairingOrder::kRandom);
  const double shifted = run(PairingOrder::kShifted);
  EXPECT_EQ(progressive, 1.0);
  EXPECT_GE(progressive, random);
  EXPECT_GE(progressive, shifted);
}

TEST(EstimateBundleTest, NeedsJudgeForSemanticClustering) {
  Fixture f("detect");
  f.backends.judge.reset();
  EXPECT_EQ(code_of([&] { estimate_bundle(f.items[0].prompt, f.backends, f.cfg.options); }),
            ErrorCode::kConfigError);
  TaskOptions lexical = f.cfg.options;
  lexical.clustering = ClusteringMode::kLexical;
  EXPECT_NEAR(estimate_bundle(f.items[0].prompt, f.backends, lexical).u, oracle_u({3, 2}), 1e-12);
}

// --- grading -------------------------------------------------------------

TEST(GradeTest, ExactAndBackend) {
  Fixture f("detect");
  DatasetItem item;
  item.prompt.text.text = "q";
  item.ground_truth = "Blue sky";
  EXPECT_TRUE(grade(item, "blue  sky.", f.backends, f.cfg.options));
  EXPECT_FALSE(grade(item, "grey sky", f.backends, f.cfg.options));
  item.task_kind = TaskKind::kGeneration;
  EXPECT_TRUE(grade(item, "blue sky!", f.backends, f.cfg.options));
}

TEST(AnswerTextTest, CaptionsNonTextOutput) {
  Fixture f("detect");
  ModelResponse r;
  r.outputs[Modality::kImage] = synthesize_content(Modality::kImage, "a red cube");
  EXPECT_EQ(code_of([&] { answer_text(r, f.backends); }), ErrorCode::kConfigError);
  BackendConfig cap;
  cap.mock = json{{"labels", {"a red cube"}}};
  f.backends.captioner = make_backend(cap);
  EXPECT_EQ(answer_text(r, f.backends), "a red cube");
}

// --- mitigation ----------------------------------------------------------

TEST(MitigateTest, RevisionPrompt) {
  EXPECT_EQ(revision_prompt("What color?", "green", 0.8765),
            "Prompt: What color?, Initial Answer: green, Your answer has a high uncertainty "
            "score of 0.88, which ranges from 0 to 1. Could you improve your answer and revise "
            "it to be more accurate?");
}

TEST(MitigateTest, SelectTopUncertain) {
  std::vector<DetectionRecord> r{{"b", 0.5, false, ""}, {"a", 0.5, false, ""},
                                 {"c", 0.9, false, ""}, {"d", 0.1, false, ""},
                                 {"e", 0.0, false, ""}};
  EXPECT_EQ(select_top_uncertain(r, 0.5), (std::vector<std::string>{"c", "a", "b"}));
  EXPECT_EQ(select_top_uncertain(r, 0.2), (std::vector<std::string>{"c"}));
  EXPECT_EQ(select_top_uncertain(r, 1.0).size(), 5u);
  EXPECT_EQ(select_top_uncertain(r, 0.01).size(), 1u);
  EXPECT_EQ(code_of([&] { select_top_uncertain(r, 0.0); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([&] { select_top_uncertain(r, 1.5); }), ErrorCode::kConfigError);
}

TEST(MitigateTest, ScriptedFixture) {
  Fixture f("mitigate");
  const auto detections = detect(f.items, f.backends, f.cfg.options);
  const auto out = mitigate(f.items, detections, f.backends, f.cfg.options);
  ASSERT_EQ(out.size(), 5u);
  std::size_t revised = 0, before = 0, after = 0;
  for (const auto& o : out) {
    ASSERT_TRUE(o.ok) << o.error;
    revised += o.selected;
    before += *o.initial_correct;
    after += *o.final_correct;
    if (!o.selected) EXPECT_EQ(o.y_final, o.y_initial);
  }
  EXPECT_EQ(revised, static_cast<std::size_t>(std::ceil(0.5 * 5)));
  EXPECT_EQ(before, 2u);
  EXPECT_EQ(after, 4u);
  EXPECT_TRUE(out[2].selected);
  EXPECT_EQ(out[2].y_final, "still wrong");
  EXPECT_FALSE(out[4].selected);
}

TEST(MitigateTest, FailedDetectionsAreNotSelected) {
  Fixture f("partial");
  const auto detections = detect(f.items, f.backends, f.cfg.options);
  TaskOptions all = f.cfg.options;
  all.top_fraction = 1.0;
  const auto out = mitigate(f.items, detections, f.backends, all);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].selected);
  EXPECT_FALSE(out[1].ok);
  EXPECT_FALSE(out[1].selected);
}

// --- chain of thought ----------------------------------------------------

TEST(CotTest, PromptShape) {
  EXPECT_EQ(cot_prompt("Q?", {}), "Q?\n" + std::string(kCotFirstStep));
  EXPECT_EQ(cot_prompt("Q?", {{"a", 0.5}, {"b", 0.25}}),
            "Q?\nStep 1: a (uncertainty: 0.50)\nStep 2: b (uncertainty: 0.25)\n" +
                std::string(kCotFinishInstruction));
}

TEST(CotTest, HandTracedFixture) {
  Fixture f("cot");
  ASSERT_EQ(f.cfg.options.max_steps, 3);
  const CotResult immediate = cot(f.items[0], f.backends, f.cfg.options);
  EXPECT_EQ(immediate.status, CotStatus::kFinished);
  EXPECT_EQ(immediate.steps, 1);

  const CotResult gradual = cot(f.items[1], f.backends, f.cfg.options);
  EXPECT_EQ(gradual.status, CotStatus::kFinished);
  EXPECT_EQ(gradual.steps, 2);
  EXPECT_EQ(gradual.final_answer, "step one");
  ASSERT_EQ(gradual.context.size(), 2u);
  EXPECT_NEAR(gradual.context[0].u, 1.0, 1e-12);

  const CotResult endless = cot(f.items[2], f.backends, f.cfg.options);
  EXPECT_EQ(endless.status, CotStatus::kMaxStepsExceeded);
  EXPECT_EQ(endless.steps, 3);
  EXPECT_EQ(endless.final_answer, "keep going");
  for (const auto& r : {immediate, gradual, endless}) {
    EXPECT_EQ(r.context.size(), static_cast<std::size_t>(r.steps));
  }
}

TEST(CotTest, RejectsZeroSteps) {
  Fixture f("cot");
  TaskOptions o = f.cfg.options;
  o.max_steps = 0;
  EXPECT_EQ(code_of([&] { cot(f.items[0], f.backends, o); }), ErrorCode::kConfigError);
}

}  // namespace
}  // namespace mmuq
