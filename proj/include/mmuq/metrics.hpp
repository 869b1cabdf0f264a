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

// Hallucination-detection metrics over (uncertainty, hallucinated) records.
// High uncertainty should flag hallucination; confidence is 1 - u.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmuq {

struct DetectionRecord {
  std::string id;
  double u = 0.0;
  bool hallucination = false;  // initial answer was wrong
  std::string initial_answer;
};

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_confidence;  // empty bins carry no statistics
  std::optional<double> accuracy;
};

struct MetricReport {
  std::optional<double> auroc;  // empty when only one class is present
  double aurac = 0.0;
  double ece = 0.0;
  std::size_t n = 0;
  std::vector<ReliabilityBin> bins;
};

// Probability that a hallucinated record has higher u than a correct one,
// ties counting half. Rank-sum with mid-ranks, O(n log n). Throws
// Error{kDegenerateLabels} unless both classes are present.
double auroc(std::span<const DetectionRecord> records);

// Mean over k = 0..n-1 of the accuracy on the records left after rejecting
// the k most uncertain ones (ties broken by id ascending).
double aurac(std::span<const DetectionRecord> records);

// Bin b covers [b/B, (b+1)/B); the last bin is closed at 1.
std::size_t confidence_bin(double confidence, std::size_t bin_count);

std::vector<ReliabilityBin> reliability_bins(std::span<const DetectionRecord> records,
                                             std::size_t bin_count = 10);

// sum_b (n_b / n) |accuracy_b - mean_confidence_b| over nonempty bins.
double ece(std::span<const DetectionRecord> records, std::size_t bin_count = 10);

MetricReport metric_report(std::span<const DetectionRecord> records,
                           std::size_t bin_count = 10);

}  // namespace mmuq
