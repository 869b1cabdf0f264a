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

// JSON and JSON-Lines encodings of task outputs. A JSON-Lines file may open
// with a {"_meta": {...}} line, which readers skip.

#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mmuq/metrics.hpp"
#include "mmuq/perturb.hpp"
#include "mmuq/tasks.hpp"
#include "mmuq/uncertainty.hpp"

namespace mmuq {

// {"u", "per_modality": {m: u}, "clusters": [{"modality", "count",
// "representative"}]}. Clusters are listed modality by modality.
nlohmann::json estimate_to_json(const UncertaintyEstimate& est);

// {"id", "status": "ok" | "failed", "u", "hallucination", "initial_answer",
//  "error"?}
nlohmann::json detection_to_json(const DetectionResult& result);
nlohmann::json mitigation_to_json(const MitigationOutcome& outcome);
nlohmann::json cot_to_json(const std::string& id, const CotResult& result);
nlohmann::json report_to_json(const MetricReport& report);
nlohmann::json applied_to_json(const std::vector<AppliedPerturbation>& applied);

// Reads DetectionRecords; lines with status "failed" are skipped and
// counted in *failed when non-null. Error{kFormatError} names the line.
std::vector<DetectionRecord> parse_detection_records(std::string_view jsonl,
                                                     std::size_t* failed = nullptr);
// Full detection results (as written by detect), for mitigation input.
std::vector<DetectionResult> parse_detection_results(std::string_view jsonl);

// meta line (when non-null) followed by one compact JSON object per line.
std::string to_jsonl(const nlohmann::json& meta,
                     const std::vector<nlohmann::json>& rows);

// lo,hi,count,mean_confidence,accuracy; empty bins leave the last two blank.
std::string bins_csv(const std::vector<ReliabilityBin>& bins);

}  // namespace mmuq
