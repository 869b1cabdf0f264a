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

#include "mmuq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmuq/error.hpp"

namespace mmuq {

double auroc(std::span<const DetectionRecord> records) {
  std::size_t pos = 0;
  for (const auto& r : records) pos += r.hallucination ? 1 : 0;
  const std::size_t neg = records.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::kDegenerateLabels,
                "AUROC needs both hallucinated and correct records");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return records[a].u < records[b].u; });

  // Sum of 1-based mid-ranks of the positives; every term is a multiple of
  // 1/2, so the sum is exact in double for any realistic n.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && records[order[j]].u == records[order[i]].u) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (records[order[k]].hallucination) rank_sum += mid;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double aurac(std::span<const DetectionRecord> records) {
  const std::size_t n = records.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].u != records[b].u) return records[a].u > records[b].u;
    return records[a].id < records[b].id;
  });
  // correct_from[k] = correct records among order[k..n).
  std::vector<std::size_t> correct_from(n + 1, 0);
  for (std::size_t k = n; k-- > 0;) {
    correct_from[k] = correct_from[k + 1] + (records[order[k]].hallucination ? 0 : 1);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum += static_cast<double>(correct_from[k]) / static_cast<double>(n - k);
  }
  return sum / static_cast<double>(n);
}

std::size_t confidence_bin(double confidence, std::size_t bin_count) {
  const double c = std::clamp(confidence, 0.0, 1.0);
  const double b = static_cast<double>(bin_count);
  auto bin = static_cast<std::size_t>(std::floor(c * b));
  bin = std::min(bin, bin_count - 1);
  // Reconcile with the interval edges b/B as computed in double.
  while (bin > 0 && c < static_cast<double>(bin) / b) --bin;
  while (bin + 1 < bin_count && c >= static_cast<double>(bin + 1) / b) ++bin;
  return bin;
}

std::vector<ReliabilityBin> reliability_bins(std::span<const DetectionRecord> records,
                                             std::size_t bin_count) {
  if (bin_count == 0) {
    throw Error(ErrorCode::kConfigError, "metrics/bin_count: must be >= 1");
  }
  std::vector<ReliabilityBin> bins(bin_count);
  std::vector<double> conf_sum(bin_count, 0.0), correct(bin_count, 0.0);
  for (std::size_t b = 0; b < bin_count; ++b) {
    bins[b].lo = static_cast<double>(b) / static_cast<double>(bin_count);
    bins[b].hi = static_cast<double>(b + 1) / static_cast<double>(bin_count);
  }
  for (const auto& r : records) {
    const double conf = 1.0 - r.u;
    const std::size_t b = confidence_bin(conf, bin_count);
    ++bins[b].count;
    conf_sum[b] += conf;
    correct[b] += r.hallucination ? 0.0 : 1.0;
  }
  for (std::size_t b = 0; b < bin_count; ++b) {
    if (bins[b].count == 0) continue;
    const double n = static_cast<double>(bins[b].count);
    bins[b].mean_confidence = conf_sum[b] / n;
    bins[b].accuracy = correct[b] / n;
  }
  return bins;
}

double ece(std::span<const DetectionRecord> records, std::size_t bin_count) {
  if (records.empty()) return 0.0;
  const auto bins = reliability_bins(records, bin_count);
  const double n = static_cast<double>(records.size());
  double total = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    total += (static_cast<double>(b.count) / n) * std::abs(*b.accuracy - *b.mean_confidence);
  }
  return total;
}

MetricReport metric_report(std::span<const DetectionRecord> records,
                           std::size_t bin_count) {
  MetricReport r;
  r.n = records.size();
  std::size_t pos = 0;
  for (const auto& rec : records) pos += rec.hallucination ? 1 : 0;
  if (pos > 0 && pos < records.size()) r.auroc = auroc(records);
  r.aurac = aurac(records);
  r.ece = ece(records, bin_count);
  r.bins = reliability_bins(records, bin_count);
  return r;
}

}  // namespace mmuq
