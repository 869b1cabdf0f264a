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

// Uncertainty-aware downstream tasks: hallucination detection over a
// dataset manifest, selective revision of the most uncertain answers, and a
// step-wise chain of thought that feeds each step's uncertainty back in.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmuq/backends.hpp"
#include "mmuq/metrics.hpp"
#include "mmuq/perturb.hpp"
#include "mmuq/uncertainty.hpp"

namespace mmuq {

enum class TaskKind { kComprehension, kGeneration };

struct DatasetItem {
  std::string id;
  PromptBundle prompt;
  std::string ground_truth;
  TaskKind task_kind = TaskKind::kComprehension;
};

// JSON-Lines, one item per line:
//   {"id", "text", "attachments": [{"modality", "path"}], "ground_truth",
//    "task_kind": "comprehension" | "generation"}
// Attachment paths resolve against base_dir. Any malformed line or duplicate
// id is Error{kFormatError} naming the line.
std::vector<DatasetItem> parse_manifest(std::string_view jsonl,
                                        const std::filesystem::path& base_dir);
std::vector<DatasetItem> load_manifest(const std::filesystem::path& path);

enum class GraderKind { kExact, kBackend };

struct TaskOptions {
  PerturbationPlan plan;
  ClusteringMode clustering = ClusteringMode::kSemantic;
  GraderKind grader = GraderKind::kExact;
  double initial_temperature = 0.1;  // low-variation first answer
  int parallelism = 1;
  double top_fraction = 0.5;
  int max_steps = 5;
};

// The responder's answer as text: text output directly, otherwise the
// captioner's caption of the first non-text output.
std::string answer_text(const ModelResponse& response, Backends& backends);

// Exact grading compares normalize_answer() of both sides. Backend grading,
// and every generation item, asks the grader (or the judge) whether the
// answer matches the ground truth.
bool grade(const DatasetItem& item, const std::string& answer,
           Backends& backends, const TaskOptions& options);

// Perturb -> respond per perturbed prompt -> caption/cluster/entropy.
UncertaintyEstimate estimate_bundle(const PromptBundle& bundle,
                                    Backends& backends,
                                    const TaskOptions& options);

struct DetectionResult {
  DetectionRecord record;
  bool ok = true;
  std::string error;  // set when !ok
  UncertaintyEstimate estimate;
};

// Per item: initial answer at low temperature and its grade, then the
// uncertainty estimate. Backend failures mark only that item as failed.
// Output order follows the manifest.
std::vector<DetectionResult> detect(const std::vector<DatasetItem>& items,
                                    Backends& backends,
                                    const TaskOptions& options);

struct MitigationOutcome {
  std::string id;
  std::string y_initial;
  double u = 0.0;
  bool selected = false;
  std::string y_final;
  bool ok = true;
  std::string error;
  std::optional<bool> initial_correct;
  std::optional<bool> final_correct;
};

// Revision prompt for one answer (uncertainty printed with two decimals).
std::string revision_prompt(const std::string& prompt, const std::string& answer,
                            double u);

// Ids of the ceil(K * n) records with the highest u (ties: id ascending).
std::vector<std::string> select_top_uncertain(
    const std::vector<DetectionRecord>& records, double top_fraction);

// Revises the selected answers; unselected answers pass through verbatim.
// Records without a matching item, or from failed detections, are reported
// as failed and never selected.
std::vector<MitigationOutcome> mitigate(const std::vector<DatasetItem>& items,
                                        const std::vector<DetectionResult>& detections,
                                        Backends& backends,
                                        const TaskOptions& options);

struct CotStep {
  std::string answer;
  double u = 0.0;
};

enum class CotStatus { kFinished, kMaxStepsExceeded };

struct CotResult {
  std::string final_answer;
  int steps = 0;
  CotStatus status = CotStatus::kMaxStepsExceeded;
  std::vector<CotStep> context;  // one (answer, u) pair per executed step
};

// Prompt for step t (1-based) given the pairs gathered so far.
std::string cot_prompt(const std::string& prompt, const std::vector<CotStep>& context);

CotResult cot(const DatasetItem& item, Backends& backends,
              const TaskOptions& options);

}  // namespace mmuq
