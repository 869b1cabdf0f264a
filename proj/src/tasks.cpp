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

#include "mmuq/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "mmuq/error.hpp"
#include "mmuq/parallel.hpp"
#include "mmuq/prompts.hpp"

namespace mmuq {
namespace {

using nlohmann::json;

[[noreturn]] void manifest_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kFormatError,
              "manifest line " + std::to_string(line) + ": " + what);
}

const std::string& required_string(const json& obj, const char* key,
                                   std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    manifest_error(line, std::string("\"") + key + "\" must be a string");
  }
  return it->get_ref<const std::string&>();
}

Backend& require(const std::unique_ptr<Backend>& backend, const char* role) {
  if (!backend) {
    throw Error(ErrorCode::kConfigError,
                std::string("/roles/") + role + ": backend required but not configured");
  }
  return *backend;
}

std::string format_u(double u) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", u);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t ceil_fraction(double k, std::size_t n) {
  const double raw = k * static_cast<double>(n);
  auto c = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(c, n);
}

}  // namespace

std::vector<DatasetItem> parse_manifest(std::string_view jsonl,
                                        const std::filesystem::path& base_dir) {
  std::vector<DatasetItem> items;
  std::set<std::string> ids;
  std::istringstream in{std::string(jsonl)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      manifest_error(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) manifest_error(line, "expected a JSON object");

    DatasetItem item;
    item.id = required_string(obj, "id", line);
    if (item.id.empty()) manifest_error(line, "\"id\" must be non-empty");
    if (!ids.insert(item.id).second) manifest_error(line, "duplicate id \"" + item.id + "\"");
    item.prompt.text.text = required_string(obj, "text", line);
    if (auto it = obj.find("ground_truth"); it != obj.end()) {
      if (!it->is_string()) manifest_error(line, "\"ground_truth\" must be a string");
      item.ground_truth = it->get<std::string>();
    }
    if (auto it = obj.find("task_kind"); it != obj.end()) {
      const std::string kind = it->is_string() ? it->get<std::string>() : "";
      if (kind == "comprehension") {
        item.task_kind = TaskKind::kComprehension;
      } else if (kind == "generation") {
        item.task_kind = TaskKind::kGeneration;
      } else {
        manifest_error(line, "\"task_kind\" must be \"comprehension\" or \"generation\"");
      }
    }
    if (auto it = obj.find("attachments"); it != obj.end()) {
      if (!it->is_array()) manifest_error(line, "\"attachments\" must be an array");
      for (const auto& att : *it) {
        if (!att.is_object()) manifest_error(line, "attachment must be an object");
        Modality m;
        try {
          m = parse_modality(required_string(att, "modality", line));
        } catch (const Error& e) {
          manifest_error(line, e.detail());
        }
        if (m == Modality::kText) manifest_error(line, "text cannot be an attachment");
        if (item.prompt.attachments.count(m)) {
          manifest_error(line, "duplicate " + std::string(modality_name(m)) + " attachment");
        }
        const std::filesystem::path p = base_dir / required_string(att, "path", line);
        item.prompt.attachments.emplace(m, load_content(p, m));
      }
    }
    try {
      validate(item.prompt);
    } catch (const Error& e) {
      manifest_error(line, e.detail());
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw Error(ErrorCode::kFormatError, "manifest has no items");
  return items;
}

std::vector<DatasetItem> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

std::string answer_text(const ModelResponse& response, Backends& backends) {
  if (auto it = response.outputs.find(Modality::kText); it != response.outputs.end()) {
    return std::get<TextContent>(it->second).text;
  }
  if (response.outputs.empty()) {
    throw Error(ErrorCode::kProtocolError, "response carries no output");
  }
  return require(backends.captioner, "captioner")
      .caption(response.outputs.begin()->second)
      .text;
}

bool grade(const DatasetItem& item, const std::string& answer,
           Backends& backends, const TaskOptions& options) {
  if (item.task_kind == TaskKind::kComprehension && options.grader == GraderKind::kExact) {
    return normalize_answer(answer) == normalize_answer(item.ground_truth);
  }
  Backend& grader = backends.grader ? *backends.grader : require(backends.judge, "judge");
  return grader.judge_equivalence(item.prompt.text.text, answer, item.ground_truth);
}

UncertaintyEstimate estimate_bundle(const PromptBundle& bundle,
                                    Backends& backends,
                                    const TaskOptions& options) {
  Backend& responder = require(backends.responder, "responder");
  const Rephraser rephraser = [&responder](const std::string& text, double t) {
    return responder.rephrase(text, t);
  };
  const auto prompts = build_plan(bundle, options.plan, rephraser, options.parallelism);
  std::vector<ModelResponse> responses(prompts.size());
  parallel_for(prompts.size(), options.parallelism, [&](std::size_t i) {
    RequestContext ctx;
    ctx.sample_index = prompts[i].sample_index;
    ctx.applied = prompts[i].applied;
    responses[i] = responder.respond(prompts[i].bundle, ctx);
  });
  EstimatorRoles roles;
  roles.captioner = backends.captioner.get();
  roles.judge = backends.judge.get();
  roles.clustering = options.clustering;
  if (roles.clustering == ClusteringMode::kSemantic && !roles.judge) {
    require(backends.judge, "judge");
  }
  return estimate(responses, roles, bundle.text.text);
}

std::vector<DetectionResult> detect(const std::vector<DatasetItem>& items,
                                    Backends& backends,
                                    const TaskOptions& options) {
  if (items.empty()) throw Error(ErrorCode::kFormatError, "manifest has no items");
  Backend& responder = require(backends.responder, "responder");
  std::vector<DetectionResult> results(items.size());
  parallel_for(items.size(), options.parallelism, [&](std::size_t i) {
    const DatasetItem& item = items[i];
    DetectionResult& out = results[i];
    out.record.id = item.id;
    try {
      RequestContext ctx;
      ctx.temperature = options.initial_temperature;
      const ModelResponse initial = responder.respond(item.prompt, ctx);
      out.record.initial_answer = answer_text(initial, backends);
      out.record.hallucination = !grade(item, out.record.initial_answer, backends, options);
      out.estimate = estimate_bundle(item.prompt, backends, options);
      out.record.u = out.estimate.u;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
      out.record.u = 0.0;
      out.record.hallucination = false;
    }
  });
  return results;
}

std::string revision_prompt(const std::string& prompt, const std::string& answer,
                            double u) {
  return fill_template(kRevisionTemplate, {{"X", prompt}, {"Y", answer}, {"U", format_u(u)}});
}

std::vector<std::string> select_top_uncertain(
    const std::vector<DetectionRecord>& records, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "/tasks/top_fraction: must be in (0, 1]");
  }
  std::vector<const DetectionRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const DetectionRecord* a, const DetectionRecord* b) {
    if (a->u != b->u) return a->u > b->u;
    return a->id < b->id;
  });
  const std::size_t k = ceil_fraction(top_fraction, records.size());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < k; ++i) ids.push_back(order[i]->id);
  return ids;
}

std::vector<MitigationOutcome> mitigate(const std::vector<DatasetItem>& items,
                                        const std::vector<DetectionResult>& detections,
                                        Backends& backends,
                                        const TaskOptions& options) {
  Backend& responder = require(backends.responder, "responder");
  std::map<std::string, const DatasetItem*> by_id;
  for (const auto& item : items) by_id.emplace(item.id, &item);

  std::vector<DetectionRecord> eligible;
  for (const auto& d : detections) {
    if (d.ok && by_id.count(d.record.id)) eligible.push_back(d.record);
  }
  const auto chosen = select_top_uncertain(eligible, options.top_fraction);
  const std::set<std::string> selected(chosen.begin(), chosen.end());

  std::vector<MitigationOutcome> out(detections.size());
  parallel_for(detections.size(), options.parallelism, [&](std::size_t i) {
    const DetectionResult& d = detections[i];
    MitigationOutcome& o = out[i];
    o.id = d.record.id;
    o.y_initial = d.record.initial_answer;
    o.u = d.record.u;
    o.y_final = o.y_initial;
    auto it = by_id.find(o.id);
    if (!d.ok || it == by_id.end()) {
      o.ok = false;
      o.error = !d.ok ? "detection failed: " + d.error : "no manifest item with this id";
      return;
    }
    o.initial_correct = !d.record.hallucination;
    o.final_correct = o.initial_correct;
    if (!selected.count(o.id)) return;
    o.selected = true;
    try {
      const DatasetItem& item = *it->second;
      PromptBundle revised = item.prompt;
      revised.text.text = revision_prompt(item.prompt.text.text, o.y_initial, o.u);
      const ModelResponse r = responder.respond(revised);
      const std::string answer = answer_text(r, backends);
      o.final_correct = grade(item, answer, backends, options);
      o.y_final = answer;
    } catch (const std::exception& e) {
      o.ok = false;
      o.error = e.what();
      o.y_final = o.y_initial;
      o.final_correct = o.initial_correct;
    }
  });
  return out;
}

std::string cot_prompt(const std::string& prompt, const std::vector<CotStep>& context) {
  std::string p = prompt;
  if (context.empty()) {
    p += "\n";
    p += kCotFirstStep;
    return p;
  }
  for (std::size_t k = 0; k < context.size(); ++k) {
    p += "\nStep " + std::to_string(k + 1) + ": " + context[k].answer + " " +
         std::string(kCotUncertaintyTag) + format_u(context[k].u) + ")";
  }
  p += "\n";
  p += kCotFinishInstruction;
  return p;
}

CotResult cot(const DatasetItem& item, Backends& backends,
              const TaskOptions& options) {
  if (options.max_steps < 1) {
    throw Error(ErrorCode::kConfigError, "/tasks/max_steps: must be >= 1");
  }
  Backend& responder = require(backends.responder, "responder");
  CotResult result;
  std::string last_content;
  while (result.steps < options.max_steps) {
    PromptBundle bundle = item.prompt;
    bundle.text.text = cot_prompt(item.prompt.text.text, result.context);
    const ModelResponse r = responder.respond(bundle);
    CotStep step;
    step.answer = answer_text(r, backends);
    step.u = estimate_bundle(bundle, backends, options).u;
    result.context.push_back(step);
    ++result.steps;

    const auto pos = step.answer.find(kCotFinishToken);
    if (pos == std::string::npos) {
      last_content = step.answer;
      continue;
    }
    std::string rest = step.answer;
    rest.erase(pos, kCotFinishToken.size());
    rest = trim(rest);
    if (!rest.empty()) last_content = rest;
    result.status = CotStatus::kFinished;
    break;
  }
  result.final_answer = last_content;
  return result;
}

}  // namespace mmuq
