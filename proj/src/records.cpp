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

#include "mmuq/records.hpp"

#include <charconv>
#include <sstream>

#include "mmuq/error.hpp"

namespace mmuq {
namespace {

using nlohmann::json;

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename Fn>
void for_each_row(std::string_view jsonl, Fn&& fn) {
  std::istringstream in{std::string(jsonl)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kFormatError,
                  "records line " + std::to_string(line) + ": " + e.what());
    }
    if (!row.is_object()) {
      throw Error(ErrorCode::kFormatError,
                  "records line " + std::to_string(line) + ": expected an object");
    }
    if (row.contains("_meta")) continue;
    try {
      fn(row);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError,
                  "records line " + std::to_string(line) + ": " + e.what());
    }
  }
}

}  // namespace

json estimate_to_json(const UncertaintyEstimate& est) {
  json per = json::object();
  for (const auto& [m, u] : est.per_modality) per[std::string(modality_name(m))] = u;
  json clusters = json::array();
  for (const auto& [m, dist] : est.distributions) {
    for (const auto& c : dist.clusters) {
      clusters.push_back({{"modality", std::string(modality_name(m))},
                          {"count", c.count()},
                          {"representative", c.representative.text}});
    }
  }
  return {{"u", est.u}, {"per_modality", per}, {"clusters", clusters}};
}

json detection_to_json(const DetectionResult& r) {
  json j = {{"id", r.record.id},
            {"status", r.ok ? "ok" : "failed"},
            {"u", r.record.u},
            {"hallucination", r.record.hallucination},
            {"initial_answer", r.record.initial_answer}};
  if (r.ok) {
    j["estimate"] = estimate_to_json(r.estimate);
  } else {
    j["error"] = r.error;
  }
  return j;
}

json mitigation_to_json(const MitigationOutcome& o) {
  json j = {{"id", o.id},         {"status", o.ok ? "ok" : "failed"},
            {"y_initial", o.y_initial}, {"u", o.u},
            {"selected", o.selected},   {"y_final", o.y_final}};
  if (o.initial_correct) j["initial_correct"] = *o.initial_correct;
  if (o.final_correct) j["final_correct"] = *o.final_correct;
  if (!o.ok) j["error"] = o.error;
  return j;
}

json cot_to_json(const std::string& id, const CotResult& r) {
  json steps = json::array();
  for (const auto& s : r.context) steps.push_back({{"answer", s.answer}, {"u", s.u}});
  return {{"id", id},
          {"status", r.status == CotStatus::kFinished ? "finished" : "max_steps_exceeded"},
          {"steps", r.steps},
          {"final_answer", r.final_answer},
          {"context", steps}};
}

json report_to_json(const MetricReport& report) {
  json bins = json::array();
  for (const auto& b : report.bins) {
    json jb = {{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}};
    jb["mean_confidence"] = b.mean_confidence ? json(*b.mean_confidence) : json(nullptr);
    jb["accuracy"] = b.accuracy ? json(*b.accuracy) : json(nullptr);
    bins.push_back(jb);
  }
  return {{"auroc", report.auroc ? json(*report.auroc) : json(nullptr)},
          {"aurac", report.aurac},
          {"aurac_definition", "mean accuracy over rejection of the top k, k = 0..n-1"},
          {"ece", report.ece},
          {"n", report.n},
          {"bins", bins}};
}

json applied_to_json(const std::vector<AppliedPerturbation>& applied) {
  json out = json::array();
  for (const auto& a : applied) {
    out.push_back({{"modality", std::string(modality_name(a.modality))},
                   {"kind", std::string(kind_info(a.kind).name)},
                   {"degree", a.degree}});
  }
  return out;
}

std::vector<DetectionRecord> parse_detection_records(std::string_view jsonl,
                                                     std::size_t* failed) {
  std::vector<DetectionRecord> out;
  if (failed) *failed = 0;
  for_each_row(jsonl, [&](const json& row) {
    if (row.value("status", std::string("ok")) != "ok") {
      if (failed) ++*failed;
      return;
    }
    DetectionRecord r;
    r.id = row.at("id").get<std::string>();
    r.u = row.at("u").get<double>();
    r.hallucination = row.at("hallucination").get<bool>();
    r.initial_answer = row.value("initial_answer", std::string());
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<DetectionResult> parse_detection_results(std::string_view jsonl) {
  std::vector<DetectionResult> out;
  for_each_row(jsonl, [&](const json& row) {
    DetectionResult r;
    r.record.id = row.at("id").get<std::string>();
    r.ok = row.value("status", std::string("ok")) == "ok";
    r.record.u = row.value("u", 0.0);
    r.record.hallucination = row.value("hallucination", false);
    r.record.initial_answer = row.value("initial_answer", std::string());
    r.error = row.value("error", std::string());
    out.push_back(std::move(r));
  });
  return out;
}

std::string to_jsonl(const json& meta, const std::vector<json>& rows) {
  std::string out;
  auto line = [](const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  };
  if (!meta.is_null()) out += line(json{{"_meta", meta}});
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string bins_csv(const std::vector<ReliabilityBin>& bins) {
  std::string out = "lo,hi,count,mean_confidence,accuracy\n";
  for (const auto& b : bins) {
    out += shortest(b.lo) + "," + shortest(b.hi) + "," + std::to_string(b.count) + ",";
    if (b.mean_confidence) out += shortest(*b.mean_confidence);
    out += ",";
    if (b.accuracy) out += shortest(*b.accuracy);
    out += "\n";
  }
  return out;
}

}  // namespace mmuq
